#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "betlab/cli.hpp"
#include "betlab/errors.hpp"

namespace betlab::cli {

using nlohmann::json;
using verifier::BoundReport;
using verifier::InputsDigest;

namespace {

// Work-stealing over independent slots; slot outputs merge in index order,
// so the result is identical for any job count.
void parallel_for(int jobs, int n, const std::function<void(int)>& fn) {
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<double> double_list(const json& sweep, const char* key,
                                std::vector<double> fallback) {
  if (!sweep.is_object() || !sweep.contains(key)) return fallback;
  return sweep[key].get<std::vector<double>>();
}

std::vector<int> int_list(const json& sweep, const char* key, std::vector<int> fallback) {
  if (!sweep.is_object() || !sweep.contains(key)) return fallback;
  return sweep[key].get<std::vector<int>>();
}

// Policy sweep: a list of noise levels, each realized as epsilon-noise on
// the optimal policy (epsilon 0 is exactly optimal).
std::vector<double> epsilon_list(const Manifest& m, std::vector<double> fallback) {
  if (m.sweep.is_object() && m.sweep.contains("epsilon")) {
    return m.sweep["epsilon"].get<std::vector<double>>();
  }
  if (m.policy.is_object()) {
    const std::string kind = m.policy.value("kind", "optimal");
    if (kind == "optimal") return {0.0};
    if (kind == "noisy") return {m.policy.value("epsilon", 0.0)};
    throw ConfigError("unknown policy kind \"" + kind + "\"");
  }
  return fallback;
}

env::FiniteMDP mdp_from_spec(const json& spec, Rng env_rng, std::string* tag) {
  if (spec.is_null()) {
    *tag = "random_mdp(4;2)";
    return env::random_mdp(4, 2, env_rng);
  }
  if (spec.contains("builder")) {
    const std::string builder = spec["builder"].get<std::string>();
    if (builder == "random_mdp") {
      const int states = spec.value("states", 4);
      const int actions = spec.value("actions", 2);
      *tag = "random_mdp(" + std::to_string(states) + ";" + std::to_string(actions) + ")";
      return env::random_mdp(states, actions, env_rng);
    }
    throw ConfigError("unknown MDP builder \"" + builder + "\"");
  }
  *tag = "inline_mdp";
  return env::mdp_from_json(spec);
}

env::FinitePOMDP pomdp_from_spec(const json& spec, Rng env_rng, std::string* tag) {
  if (spec.is_null()) {
    *tag = "random_pomdp(3;2;3)";
    return env::random_pomdp(3, 2, 3, env_rng);
  }
  if (spec.contains("builder")) {
    const std::string builder = spec["builder"].get<std::string>();
    if (builder == "random_pomdp") {
      const int latent = spec.value("latent", 3);
      const int actions = spec.value("actions", 2);
      const int obs = spec.value("obs", 3);
      *tag = "random_pomdp(" + std::to_string(latent) + ";" + std::to_string(actions) + ";" +
             std::to_string(obs) + ")";
      return env::random_pomdp(latent, actions, obs, env_rng);
    }
    if (builder == "prop1") {
      const double r = spec.value("r", 0.7);
      *tag = "prop1(" + std::to_string(r) + ")";
      return env::prop1_env(r);
    }
    if (builder == "mirrored_belief") {
      const double r = spec.value("r", 0.8);
      *tag = "mirrored_belief";
      return env::mirrored_belief_env(r);
    }
    if (builder == "psr_dyadic") {
      *tag = "psr_dyadic";
      return env::psr_dyadic_env();
    }
    throw ConfigError("unknown POMDP builder \"" + builder + "\"");
  }
  *tag = "inline_pomdp";
  return env::pomdp_from_json(spec);
}

goals::TestFamilyConfig family_from_spec(const json& evaluation, int default_depth) {
  goals::TestFamilyConfig cfg;
  cfg.max_depth = default_depth;
  if (evaluation.is_object()) {
    cfg.max_depth = evaluation.value("test_depth", default_depth);
    if (evaluation.contains("families")) {
      cfg.singletons = cfg.complements = cfg.prefix_cylinders = false;
      for (const auto& f : evaluation["families"]) {
        const auto name = f.get<std::string>();
        if (name == "singleton") cfg.singletons = true;
        else if (name == "complement") cfg.complements = true;
        else if (name == "cylinder") cfg.prefix_cylinders = true;
        else throw ConfigError("unknown event family \"" + name + "\"");
      }
    }
  }
  return cfg;
}

int history_length_from_spec(const json& evaluation, int fallback) {
  if (evaluation.is_object()) return evaluation.value("history_length", fallback);
  return fallback;
}

// ---- Suites ---------------------------------------------------------------

SuiteResult suite_thm1_sweep(const Manifest& m) {
  Rng rng(m.seed);
  std::string tag;
  const auto mdp = mdp_from_spec(m.environment, rng.fork(0), &tag);
  const auto ns = int_list(m.sweep, "n", {10, 20, 50, 100, 200});
  const auto eps = epsilon_list(m, {0.0, 0.01, 0.02, 0.05, 0.1});
  const auto gammas = double_list(m.sweep, "gamma", {0.25});

  struct Slot {
    std::vector<BoundReport> reports;
    std::vector<EstimateRow> estimates;
  };
  const int n_slots = static_cast<int>(ns.size() * eps.size());
  std::vector<Slot> slots(n_slots);
  parallel_for(m.jobs, n_slots, [&](int i) {
    const int n = ns[i / eps.size()];
    const double e = eps[i % eps.size()];
    const auto policy = agents::noisy_optimal(e);
    InputsDigest digest;
    digest.seed = m.seed;
    digest.epsilon = e;
    digest.env_tag = tag;
    for (double g : gammas) {
      slots[i].reports.push_back(verifier::verify_thm1(mdp, policy, n, g, digest));
    }
    const auto est = estimators::estimate_world_model(policy, mdp, n);
    for (int s = 0; s < mdp.n_states; ++s) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          EstimateRow row;
          row.cell = "thm1/n=" + std::to_string(n) + "/eps=" + std::to_string(e) +
                     "/s=" + std::to_string(s) + "/a=" + std::to_string(a) +
                     "/s2=" + std::to_string(s2);
          row.estimate = est.at(s, a, s2);
          row.truth = mdp.p(s, a, s2);
          row.abs_error = std::abs(row.estimate - row.truth);
          slots[i].estimates.push_back(std::move(row));
        }
      }
    }
  });

  SuiteResult out;
  for (auto& slot : slots) {
    out.reports.insert(out.reports.end(), slot.reports.begin(), slot.reports.end());
    out.estimates.insert(out.estimates.end(), slot.estimates.begin(), slot.estimates.end());
  }
  return out;
}

SuiteResult suite_counterexamples(const Manifest& m) {
  const double p = m.sweep.is_object() ? m.sweep.value("p", 0.7) : 0.7;
  const double q = m.sweep.is_object() ? m.sweep.value("q", 0.6) : 0.6;
  const int depth = m.sweep.is_object() ? m.sweep.value("depth", 3) : 3;

  SuiteResult out;
  InputsDigest digest;
  digest.seed = m.seed;
  digest.env_tag = "prop1_pair";
  out.reports.push_back(verifier::verify_prop1(p, q, depth, digest));
  digest.env_tag = "l3_pair";
  out.reports.push_back(verifier::verify_cor2(digest));
  return out;
}

SuiteResult suite_thm4(const Manifest& m) {
  Rng rng(m.seed);
  std::string tag;
  const auto pomdp = pomdp_from_spec(m.environment, rng.fork(0), &tag);
  const auto cfg = family_from_spec(m.evaluation, 2);
  const int hist_len = history_length_from_spec(m.evaluation, 1);
  const auto eval = goals::build_evaluation(pomdp, hist_len, cfg, false);

  const auto gammas = double_list(m.sweep, "gamma", {0.1, 0.25, 0.4});
  const auto eps = epsilon_list(m, {0.0, 0.01, 0.05, 0.1});

  std::vector<std::vector<BoundReport>> slots(gammas.size() * eps.size());
  parallel_for(m.jobs, static_cast<int>(slots.size()), [&](int i) {
    const double g = gammas[i / eps.size()];
    const double e = eps[i % eps.size()];
    InputsDigest digest;
    digest.seed = m.seed;
    digest.epsilon = e;
    digest.env_tag = tag;
    slots[i] = verifier::verify_thm4(pomdp, agents::noisy_optimal(e), eval, g, digest);
  });

  SuiteResult out;
  for (auto& s : slots) out.reports.insert(out.reports.end(), s.begin(), s.end());
  return out;
}

SuiteResult suite_thm5(const Manifest& m) {
  Rng rng(m.seed);
  std::string tag;
  const auto pomdp = pomdp_from_spec(m.environment, rng.fork(0), &tag);
  const auto cfg = family_from_spec(m.evaluation, 2);
  const int hist_len = history_length_from_spec(m.evaluation, 1);
  const auto eval = goals::build_evaluation(pomdp, hist_len, cfg, false);

  const auto ks = int_list(m.sweep, "K", {1, 2, 4, 8, 16, 32, 64});
  const auto eps = epsilon_list(m, {0.0, 0.05, 0.1});

  std::vector<BoundReport> slots(ks.size() * eps.size());
  parallel_for(m.jobs, static_cast<int>(slots.size()), [&](int i) {
    const int K = ks[i / eps.size()];
    const double e = eps[i % eps.size()];
    InputsDigest digest;
    digest.seed = m.seed;
    digest.epsilon = e;
    digest.env_tag = tag;
    slots[i] = verifier::verify_thm5(pomdp, agents::noisy_optimal(e), eval, K, digest);
  });

  SuiteResult out;
  out.reports = std::move(slots);

  // Zero-noise predictive-state cells at the finest grid.
  const int K_max = *std::max_element(ks.begin(), ks.end());
  std::vector<goals::Test> tests;
  tests.reserve(eval.tests.size());
  for (const auto& wt : eval.tests) tests.push_back(wt.test);
  for (size_t h = 0; h < eval.histories.size(); ++h) {
    const auto est = estimators::estimate_predictive_state(
        agents::OptimalPolicy{}, pomdp, eval.histories[h].history, tests, K_max);
    for (size_t j = 0; j < tests.size(); ++j) {
      EstimateRow row;
      row.cell = "thm5/K=" + std::to_string(K_max) + "/h=" + std::to_string(h) +
                 "/T=" + std::to_string(j);
      row.estimate = est.eta_hat[j];
      row.truth = est.eta_true[j];
      row.abs_error = std::abs(row.estimate - row.truth);
      out.estimates.push_back(std::move(row));
    }
  }
  return out;
}

SuiteResult suite_thm6(const Manifest& m) {
  Rng rng(m.seed);
  std::string tag = "psr_dyadic";
  const auto pomdp = m.environment.is_null() ? env::psr_dyadic_env()
                                             : pomdp_from_spec(m.environment, rng.fork(0), &tag);
  const goals::Test t_zero{{0}, {{0}}};
  const goals::Test t_one{{0}, {{1}}};
  const std::vector<goals::Test> tests{t_zero, t_one};
  const std::vector<env::History> core{{{0}, {}}, {{1}, {}}};
  // Nearly identical beliefs make the exact predictive matrix near singular.
  const std::vector<env::History> near_singular{{{0, 0, 0}, {0, 0}}, {{0, 0, 0, 0}, {0, 0, 0}}};
  const int K = m.sweep.is_object() ? m.sweep.value("K", 512) : 512;

  SuiteResult out;
  auto run = [&](double e, const std::vector<env::History>& histories, const char* variant) {
    InputsDigest digest;
    digest.seed = m.seed;
    digest.epsilon = e;
    digest.env_tag = tag + "/" + variant;
    const auto policy = agents::noisy_optimal(e);
    auto result = verifier::verify_thm6(pomdp, tests, histories, policy, K, 2, digest);
    out.reports.insert(out.reports.end(), result.reports.begin(), result.reports.end());
    return result;
  };

  const auto exact = run(0.0, core, "exact");
  run(0.0005, core, "noisy");
  run(0.001, core, "noisy");
  run(0.0, near_singular, "near_singular_gate");

  const int d = static_cast<int>(tests.size());
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      EstimateRow row;
      row.cell = "thm6/S/test=" + std::to_string(j) + "/history=" + std::to_string(i);
      row.estimate = exact.ops.s_hat(j, i);
      row.truth = exact.truth.s(j, i);
      row.abs_error = std::abs(row.estimate - row.truth);
      out.estimates.push_back(std::move(row));
    }
  }
  return out;
}

SuiteResult suite_thm7(const Manifest& m) {
  SuiteResult out;

  // Tight instance: mirrored beliefs (0.8, 0.2), a singleton straddling
  // test, and a constant memory. Both sides equal q_alias * c(gamma) / 2.
  {
    const auto pomdp = env::mirrored_belief_env(0.8);
    goals::EvaluationDistribution eval;
    eval.histories = {{env::History{{0, 2}, {0}}, 0.5}, {env::History{{1, 2}, {0}}, 0.5}};
    eval.tests = {{goals::Test{{0}, {{3}}}, 1.0}};
    eval.pairs = {{0, 1, 1.0}};
    InputsDigest digest;
    digest.seed = m.seed;
    digest.env_tag = "mirrored_belief/tight";
    out.reports.push_back(verifier::verify_thm7(
        pomdp, agents::MemoryMap::constant(2), agents::Resolver::CellOptimal, 0.0, eval, 0.3,
        digest));
  }

  // Randomized memory maps over seeded environments. The policy descriptor
  // (memory kind, resolver, fixed q) comes from the manifest when present.
  const int configs = m.sweep.is_object() ? m.sweep.value("configs", 20) : 20;
  const std::string memory_kind =
      m.policy.is_object() ? m.policy.value("memory", "random") : "random";
  const std::string resolver_name =
      m.policy.is_object() ? m.policy.value("resolver", "cell_optimal") : "cell_optimal";
  const double fixed_q = m.policy.is_object() ? m.policy.value("q", 0.5) : 0.5;
  agents::Resolver resolver;
  if (resolver_name == "cell_optimal") resolver = agents::Resolver::CellOptimal;
  else if (resolver_name == "majority") resolver = agents::Resolver::MajorityVote;
  else if (resolver_name == "fixed") resolver = agents::Resolver::FixedQ;
  else throw ConfigError("unknown resolver \"" + resolver_name + "\"");

  Rng rng(m.seed);
  std::vector<BoundReport> slots(configs);
  parallel_for(m.jobs, configs, [&](int c) {
    auto cfg_rng = rng.fork(100 + c);
    const auto pomdp = env::random_pomdp(3, 2, 3, cfg_rng);
    goals::TestFamilyConfig cfg;
    cfg.max_depth = 2;
    const auto eval = goals::build_evaluation(pomdp, 1, cfg, true);
    const int n_hist = static_cast<int>(eval.histories.size());
    auto mem_rng = cfg_rng.fork(1);
    agents::MemoryMap memory;
    if (memory_kind == "random") {
      memory = agents::MemoryMap::random(n_hist, mem_rng.uniform_int(1, 4), mem_rng);
    } else if (memory_kind == "constant") {
      memory = agents::MemoryMap::constant(n_hist);
    } else if (memory_kind == "identity") {
      memory = agents::MemoryMap::identity(n_hist);
    } else if (memory_kind == "last_obs") {
      memory = agents::MemoryMap::last_observation(eval.histories);
    } else {
      throw ConfigError("unknown memory kind \"" + memory_kind + "\"");
    }
    const double gamma = c % 2 == 0 ? 0.1 : 0.25;
    InputsDigest digest;
    digest.seed = m.seed;
    digest.env_tag = "random_pomdp(3;2;3)#cfg" + std::to_string(c);
    slots[c] = verifier::verify_thm7(pomdp, memory, resolver, fixed_q, eval, gamma, digest);
  });
  out.reports.insert(out.reports.end(), slots.begin(), slots.end());
  return out;
}

SuiteResult suite_corollaries(const Manifest& m) {
  SuiteResult out;
  Rng rng(m.seed);

  // cor1: do-kernel within an entrywise budget of the kernel.
  {
    std::string tag;
    const auto mdp = mdp_from_spec(m.environment, rng.fork(0), &tag);
    const int n = m.sweep.is_object() ? m.sweep.value("n", 50) : 50;
    const double gamma = m.sweep.is_object() ? m.sweep.value("gamma", 0.25) : 0.25;
    const auto eps_cmp = double_list(m.sweep, "eps_cmp", {0.0, 0.02, 0.05});
    const auto eps = epsilon_list(m, {0.0, 0.05});
    for (double e : eps) {
      const auto policy = agents::noisy_optimal(e);
      for (double ec : eps_cmp) {
        for (bool adversarial : {false, true}) {
          InputsDigest digest;
          digest.seed = m.seed;
          digest.epsilon = e;
          digest.env_tag = tag;
          out.reports.push_back(verifier::verify_cor1(mdp, policy, n, gamma, ec,
                                                      m.seed ^ 0xc0ffee, adversarial, digest));
        }
      }
    }
  }

  // cor2: the structural-model counterexample.
  {
    InputsDigest digest;
    digest.seed = m.seed;
    digest.env_tag = "l3_pair";
    out.reports.push_back(verifier::verify_cor2(digest));
  }

  const auto pomdp = env::mirrored_belief_env(0.8);
  const double gamma = 0.3;

  // cor3: two blocks; only block 0 carries straddling tests.
  {
    goals::EvaluationDistribution eval;
    eval.histories = {{env::History{{0, 2}, {0}}, 0.5}, {env::History{{1, 2}, {0}}, 0.5}};
    eval.tests = {{goals::Test{{0}, {{3}}}, 0.5}, {goals::Test{{0}, {{3}, {4}}}, 0.5}};
    eval.pairs = {{0, 1, 1.0}};
    InputsDigest digest;
    digest.seed = m.seed;
    digest.env_tag = "mirrored_belief/blocks";
    auto reports = verifier::verify_cor3(pomdp, {{0}, {1}}, agents::MemoryMap::constant(2),
                                         agents::Resolver::CellOptimal, 0.0, eval, gamma, digest);
    out.reports.insert(out.reports.end(), reports.begin(), reports.end());
  }

  // cor4: two regimes flipping the optimal bet under a shared last observation.
  {
    goals::EvaluationDistribution eval;
    eval.histories = {{env::History{{0, 2}, {0}}, 0.5}, {env::History{{1, 2}, {0}}, 0.5}};
    eval.tests = {{goals::Test{{0}, {{3}}}, 1.0}};
    eval.pairs = {{0, 1, 1.0}};
    eval.regimes = {0, 1};
    InputsDigest digest;
    digest.seed = m.seed;
    digest.env_tag = "mirrored_belief/regimes";
    out.reports.push_back(verifier::verify_cor4(pomdp, agents::MemoryMap::constant(2),
                                                agents::Resolver::CellOptimal, 0.0, eval, gamma,
                                                digest));
  }

  // cor5: relabeled minimal memories agree on the pair support.
  {
    goals::TestFamilyConfig cfg;
    cfg.max_depth = 1;
    const auto eval = goals::build_evaluation(pomdp, 1, cfg, true);
    InputsDigest digest;
    digest.seed = m.seed;
    digest.env_tag = "mirrored_belief/full";
    out.reports.push_back(
        verifier::verify_cor5(pomdp, eval, gamma, m.seed ^ 0xbeef, digest).report);
  }
  return out;
}

}  // namespace

SuiteResult run_suite(const Manifest& manifest) {
  if (manifest.suite == "thm1_sweep") return suite_thm1_sweep(manifest);
  if (manifest.suite == "counterexamples") return suite_counterexamples(manifest);
  if (manifest.suite == "thm4_necessity") return suite_thm4(manifest);
  if (manifest.suite == "thm5_grid") return suite_thm5(manifest);
  if (manifest.suite == "thm6_psr") return suite_thm6(manifest);
  if (manifest.suite == "thm7_alias") return suite_thm7(manifest);
  if (manifest.suite == "corollaries") return suite_corollaries(manifest);
  throw ConfigError("unknown suite \"" + manifest.suite + "\" (see `betlab list`)");
}

}  // namespace betlab::cli
