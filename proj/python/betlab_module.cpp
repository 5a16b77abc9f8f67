#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "betlab/cli.hpp"
#include "betlab/errors.hpp"
#include "betlab/verifier.hpp"

namespace py = pybind11;
using namespace betlab;

namespace {

agents::NoisyPolicy policy_for(double epsilon) { return agents::noisy_optimal(epsilon); }

std::string dump_json(const nlohmann::json& j) { return j.dump(); }

}  // namespace

PYBIND11_MODULE(betlab, m) {
  m.doc() = "Deterministic bound-verification lab for betting goals on finite environments";

  // ---- numerics ----
  py::class_<numerics::MarginConstants>(m, "MarginConstants")
      .def_readonly("gamma", &numerics::MarginConstants::gamma)
      .def_readonly("c_gamma", &numerics::MarginConstants::c_gamma)
      .def_readonly("t_gamma", &numerics::MarginConstants::t_gamma)
      .def("t_finite", &numerics::MarginConstants::t_finite);
  m.def("margin_constants", &numerics::margin_constants, py::arg("gamma"));

  py::class_<numerics::BetOutcome>(m, "BetOutcome")
      .def_readonly("value_pi", &numerics::BetOutcome::value_pi)
      .def_readonly("value_star", &numerics::BetOutcome::value_star)
      .def_readonly("regret", &numerics::BetOutcome::regret)
      .def_readonly("wrong_mass", &numerics::BetOutcome::wrong_mass)
      .def_readonly("margin", &numerics::BetOutcome::margin);
  m.def("bet_regret", &numerics::bet_regret, py::arg("u_l"), py::arg("u_r"), py::arg("q"));
  m.def("wrong_mass_bound", &numerics::wrong_mass_bound, py::arg("delta"), py::arg("gamma"));
  m.def("binom_cdf", &numerics::binom_cdf, py::arg("n"), py::arg("p"), py::arg("k"));
  m.def("binom_median", &numerics::binom_median, py::arg("n"), py::arg("p"));

  // ---- environments ----
  py::class_<env::FiniteMDP>(m, "FiniteMDP")
      .def_readonly("n_states", &env::FiniteMDP::n_states)
      .def_readonly("n_actions", &env::FiniteMDP::n_actions)
      .def("p", py::overload_cast<int, int, int>(&env::FiniteMDP::p, py::const_))
      .def("to_json", [](const env::FiniteMDP& e) { return dump_json(env::to_json(e)); })
      .def_static("from_json", [](const std::string& s) {
        return env::mdp_from_json(nlohmann::json::parse(s));
      });
  py::class_<env::FinitePOMDP>(m, "FinitePOMDP")
      .def_readonly("n_latent", &env::FinitePOMDP::n_latent)
      .def_readonly("n_actions", &env::FinitePOMDP::n_actions)
      .def_readonly("n_obs", &env::FinitePOMDP::n_obs)
      .def("to_json", [](const env::FinitePOMDP& e) { return dump_json(env::to_json(e)); })
      .def_static("from_json", [](const std::string& s) {
        return env::pomdp_from_json(nlohmann::json::parse(s));
      });

  py::class_<env::History>(m, "History")
      .def(py::init([](std::vector<int> observations, std::vector<int> actions) {
             return env::History{std::move(observations), std::move(actions)};
           }),
           py::arg("observations"), py::arg("actions"))
      .def_readonly("observations", &env::History::observations)
      .def_readonly("actions", &env::History::actions);

  m.def(
      "random_mdp",
      [](int n_states, int n_actions, uint64_t seed) {
        Rng rng(seed);
        return env::random_mdp(n_states, n_actions, rng);
      },
      py::arg("n_states"), py::arg("n_actions"), py::arg("seed"));
  m.def(
      "random_pomdp",
      [](int n_latent, int n_actions, int n_obs, uint64_t seed) {
        Rng rng(seed);
        return env::random_pomdp(n_latent, n_actions, n_obs, rng);
      },
      py::arg("n_latent"), py::arg("n_actions"), py::arg("n_obs"), py::arg("seed"));
  m.def("prop1_env", &env::prop1_env, py::arg("r"));
  m.def("build_prop1_pair", &env::build_prop1_pair, py::arg("p"), py::arg("q"));
  m.def("mirrored_belief_env", &env::mirrored_belief_env, py::arg("r"));
  m.def("psr_dyadic_env", &env::psr_dyadic_env);

  m.def("enumerate_histories", [](const env::FinitePOMDP& pomdp, int length) {
    std::vector<std::pair<env::History, double>> out;
    for (auto& wh : env::enumerate_histories(pomdp, length)) {
      out.emplace_back(std::move(wh.history), wh.weight);
    }
    return out;
  });
  m.def("filter_belief", [](const env::FinitePOMDP& pomdp, const env::History& h) {
    return env::filter_belief(pomdp, h).weights;
  });

  m.def("l3_counterfactual", [](int model, int observed_a, int observed_s, int alt_a) {
    const auto pair = env::build_l3_pair();
    return env::counterfactual(model == 1 ? pair.model_one : pair.model_two, observed_a,
                               observed_s, alt_a);
  });
  m.def("l3_intervention_kernel", [](int model, int a, int s) {
    const auto pair = env::build_l3_pair();
    return (model == 1 ? pair.model_one : pair.model_two).intervention_kernel(a, s);
  });

  // ---- goals ----
  py::class_<goals::Test>(m, "Test")
      .def(py::init([](std::vector<int> actions, std::vector<std::vector<int>> event) {
             goals::Test t{std::move(actions), std::move(event)};
             t.normalize();
             return t;
           }),
           py::arg("actions"), py::arg("event"))
      .def_readonly("actions", &goals::Test::actions)
      .def_readonly("event", &goals::Test::event);

  py::class_<goals::GoalValue>(m, "GoalValue")
      .def_readonly("u_branch1", &goals::GoalValue::u_branch1)
      .def_readonly("u_branch2", &goals::GoalValue::u_branch2)
      .def_readonly("v_star", &goals::GoalValue::v_star)
      .def_readonly("margin", &goals::GoalValue::margin);

  m.def("composite_goal_value",
        [](const env::FiniteMDP& mdp, int s, int a, int s_next, int n, int k) {
          return goals::composite_goal_value(mdp, {s, a, s_next, n, k});
        });
  m.def("test_probability",
        py::overload_cast<const env::FinitePOMDP&, const env::History&, const goals::Test&>(
            &goals::test_probability));
  m.def("fair_goal_value", &goals::fair_goal_value, py::arg("p_t"));
  m.def("threshold_goal_value", &goals::threshold_goal_value, py::arg("p_t"), py::arg("lam"));
  m.def("threshold_grid", &goals::threshold_grid, py::arg("K"));

  // ---- estimators ----
  m.def("estimate_transition", &estimators::estimate_transition, py::arg("q_row"), py::arg("n"));
  m.def("estimate_world_model_error",
        [](const env::FiniteMDP& mdp, double epsilon, int n) {
          return estimators::estimate_world_model(policy_for(epsilon), mdp, n).mean_abs_error;
        },
        py::arg("mdp"), py::arg("epsilon"), py::arg("n"));
  m.def("estimate_predictive_state",
        [](const env::FinitePOMDP& pomdp, const env::History& h,
           const std::vector<goals::Test>& tests, int K, double epsilon) {
          const auto est =
              estimators::estimate_predictive_state(policy_for(epsilon), pomdp, h, tests, K);
          return std::make_pair(est.eta_hat, est.eta_true);
        },
        py::arg("pomdp"), py::arg("h"), py::arg("tests"), py::arg("K"), py::arg("epsilon") = 0.0);

  // ---- verifier ----
  py::class_<verifier::BoundReport>(m, "BoundReport")
      .def_readonly("theorem", &verifier::BoundReport::theorem)
      .def_readonly("lhs", &verifier::BoundReport::lhs)
      .def_readonly("rhs", &verifier::BoundReport::rhs)
      .def_readonly("slack", &verifier::BoundReport::slack)
      .def_readonly("satisfied", &verifier::BoundReport::satisfied)
      .def_readonly("vacuous", &verifier::BoundReport::vacuous)
      .def_readonly("flags", &verifier::BoundReport::flags)
      .def_readonly("notes", &verifier::BoundReport::notes);

  m.def("verify_thm1",
        [](const env::FiniteMDP& mdp, double epsilon, int n, double gamma) {
          return verifier::verify_thm1(mdp, policy_for(epsilon), n, gamma);
        },
        py::arg("mdp"), py::arg("epsilon"), py::arg("n"), py::arg("gamma"));
  m.def("verify_prop1", [](double p, double q, int depth) {
    return verifier::verify_prop1(p, q, depth);
  });
  m.def("verify_cor2", [] { return verifier::verify_cor2(); });

  // ---- runner ----
  m.def("run_manifest",
        [](const std::string& manifest_json, std::optional<std::string> out_dir,
           std::optional<uint64_t> seed, std::optional<int> jobs) {
          cli::RunOverrides overrides;
          overrides.out_dir = std::move(out_dir);
          overrides.seed = seed;
          overrides.jobs = jobs;
          return cli::run_manifest(nlohmann::json::parse(manifest_json), overrides);
        },
        py::arg("manifest_json"), py::arg("out_dir") = std::nullopt,
        py::arg("seed") = std::nullopt, py::arg("jobs") = std::nullopt);
  m.def("list_suites", &cli::list_suites_text);

  // Exceptions map onto ValueError/RuntimeError via std bases; register the
  // config error so callers can distinguish it.
  py::register_exception<ConfigError>(m, "ConfigError");
}
