#include <cmath>

#include <doctest.h>

#include "betlab/errors.hpp"
#include "betlab/verifier.hpp"
#include "support/oracles.hpp"

using namespace betlab;
using namespace betlab::verifier;

namespace {

// Uniform belief under a dedicated uninformative observation, so test
// probabilities like exactly 1/2 are constructible.
env::FinitePOMDP half_env() {
  env::FinitePOMDP e;
  e.n_latent = 2;
  e.n_actions = 2;
  e.n_obs = 3;
  e.transition.assign(2 * 2 * 2, 0.0);
  e.t(0, 0, 0) = 1.0;
  e.t(1, 0, 1) = 1.0;
  e.t(0, 1, 1) = 1.0;
  e.t(1, 1, 0) = 1.0;
  e.observation = {0.375, 0.125, 0.5, 0.125, 0.375, 0.5};
  e.initial = {0.5, 0.5};
  return e;
}

goals::EvaluationDistribution single_cell_eval(goals::Test test) {
  goals::EvaluationDistribution eval;
  eval.histories = {{env::History{{2}, {}}, 1.0}};
  eval.tests = {{std::move(test), 1.0}};
  return eval;
}

}  // namespace

TEST_CASE("report bookkeeping") {
  const auto good = make_report("x", 0.5, 0.7, {});
  CHECK(good.satisfied);
  CHECK(good.slack == doctest::Approx(0.2));
  const auto boundary = make_report("x", 0.5, 0.5 - 0.5e-9, {});
  CHECK(boundary.satisfied);  // inside the arithmetic slop
  const auto bad = make_report("x", 0.5, 0.4, {});
  CHECK_FALSE(bad.satisfied);
  CHECK(bad.slack < 0.0);
}

TEST_CASE("transition recovery bound across policies") {
  Rng rng(101);
  const auto mdp = env::random_mdp(4, 2, rng);

  const auto opt = verify_thm1(mdp, agents::OptimalPolicy{}, 100, 0.25);
  CHECK(opt.satisfied);
  CHECK_FALSE(opt.vacuous);
  CHECK(opt.slack > 0.0);
  CHECK(opt.lhs <= 2.0 / 100 + 1e-12);

  const auto noisy = verify_thm1(mdp, agents::noisy_optimal(0.05), 100, 0.25);
  CHECK(noisy.satisfied);
  CHECK(noisy.lhs >= opt.lhs - 1e-12);

  const auto myopic = verify_thm1(mdp, agents::OptimalPolicy{}, 1, 0.25);
  CHECK(myopic.vacuous);  // rhs exceeds any possible mean error
  CHECK(myopic.rhs > 1.0);

  const auto half = verify_thm1(mdp, agents::OptimalPolicy{}, 50, 0.5);
  CHECK(half.vacuous);
  CHECK(std::isinf(half.rhs));
}

TEST_CASE("do-kernel bound") {
  Rng rng(202);
  const auto mdp = env::random_mdp(4, 2, rng);

  const auto zero = verify_cor1(mdp, agents::OptimalPolicy{}, 50, 0.25, 0.0, 9, false);
  const auto base = verify_thm1(mdp, agents::OptimalPolicy{}, 50, 0.25);
  CHECK(zero.lhs == doctest::Approx(base.lhs).epsilon(1e-12));

  for (double eps_cmp : {0.02, 0.05}) {
    for (bool adversarial : {false, true}) {
      const auto r =
          verify_cor1(mdp, agents::noisy_optimal(0.05), 50, 0.25, eps_cmp, 9, adversarial);
      CHECK(r.satisfied);
    }
  }
}

TEST_CASE("interventional equality with counterfactual disagreement") {
  const auto r = verify_cor2();
  CHECK(r.satisfied);
  CHECK(r.lhs == 0.0);
  CHECK(r.notes[0] == "kernel_gap=0");
  CHECK(r.notes[1] == "counterfactual_gap=1");
}

TEST_CASE("restricted wrong-mass bound") {
  // Single history, two tests with margins 0.3 and 0.05.
  const auto e = half_env();
  goals::EvaluationDistribution eval;
  eval.histories = {{env::History{{0}, {}}, 1.0}};
  // At history (0) the belief is (0.75, 0.25): the first test has
  // probability 0.75 * 0.375*2 ... use direct probabilities instead.
  const auto b = env::filter_belief(e, eval.histories[0].history);
  CHECK(b.weights[0] == doctest::Approx(0.75));

  goals::Test strong{{0}, {{0}, {2}}};  // p = 0.75*0.875 + 0.25*0.625 = 0.8125
  goals::Test weak{{0}, {{2}}};         // p = 0.5 everywhere
  eval.tests = {{strong, 0.5}, {weak, 0.5}};

  const double p_strong = goals::test_probability(e, eval.histories[0].history, strong);
  CHECK(p_strong == doctest::Approx(0.8125));
  CHECK(goals::test_probability(e, eval.histories[0].history, weak) == doctest::Approx(0.5));

  for (double eps : {0.0, 0.05, 0.1, 0.25}) {
    const auto reports = verify_thm4(e, agents::noisy_optimal(eps), eval, 0.2);
    REQUIRE(reports.size() >= 1);
    const auto& main = reports[0];
    CHECK(main.satisfied);
    // Only the large-margin test contributes wrong mass, with weight 1/2.
    CHECK(main.lhs == doctest::Approx(0.5 * eps).epsilon(1e-12));
    if (reports.size() == 2) {
      CHECK(reports[1].theorem == "thm4_cond");
      CHECK(reports[1].satisfied);
    }
  }
}

TEST_CASE("wrong-mass LHS grows with noise") {
  Rng rng(303);
  const auto pomdp = env::random_pomdp(3, 2, 3, rng);
  goals::TestFamilyConfig cfg;
  cfg.max_depth = 2;
  const auto eval = goals::build_evaluation(pomdp, 1, cfg, false);
  double prev_lhs = -1.0;
  for (double eps : {0.0, 0.01, 0.05, 0.1, 0.25}) {
    const auto reports = verify_thm4(pomdp, agents::noisy_optimal(eps), eval, 0.1);
    CHECK(reports[0].satisfied);
    CHECK(reports[0].lhs >= prev_lhs);
    prev_lhs = reports[0].lhs;
  }
}

TEST_CASE("one-sided universes are flagged, not failed") {
  const auto e = half_env();
  goals::EvaluationDistribution eval;
  eval.histories = {{env::History{{0}, {}}, 1.0}};
  goals::Test strong{{0}, {{0}, {2}}};  // p = 0.8125 only
  eval.tests = {{strong, 1.0}};
  const auto reports = verify_thm4(e, agents::OptimalPolicy{}, eval, 0.2);
  CHECK(reports[0].satisfied);
  CHECK(reports[0].lhs == 0.0);
  bool flagged = false;
  for (const auto& note : reports[0].notes) flagged |= note == "one_sided_universe";
  CHECK(flagged);
}

TEST_CASE("indistinguishable bets with distinct predictive states") {
  const auto r = verify_prop1(0.7, 0.6, 3);
  CHECK(r.satisfied);
  CHECK(r.lhs <= 1e-12);
  const auto r2 = verify_prop1(0.51, 0.99, 2);
  CHECK(r2.satisfied);
}

TEST_CASE("threshold recovery bound over K and noise") {
  // The squared-error LHS itself is not monotone in the noise level (noise
  // can pull an off-grid estimate toward the truth), but the measured grid
  // regret is, and the bound holds at every point.
  Rng rng(404);
  const auto pomdp = env::random_pomdp(3, 2, 3, rng);
  goals::TestFamilyConfig cfg;
  cfg.max_depth = 2;
  const auto eval = goals::build_evaluation(pomdp, 1, cfg, false);
  for (int K : {1, 2, 4, 8, 16, 32, 64}) {
    double prev_rhs = -1.0;
    for (double eps : {0.0, 0.05, 0.1, 0.25}) {
      const auto r = verify_thm5(pomdp, agents::noisy_optimal(eps), eval, K);
      CHECK(r.satisfied);
      CHECK(r.rhs >= prev_rhs - 1e-15);  // 2 * delta_bar_K grows with noise
      prev_rhs = r.rhs;
    }
  }
}

TEST_CASE("threshold recovery boundary instance at K = 1") {
  const auto e = half_env();
  goals::Test coin{{0}, {{0}, {1}}};  // p = 1/2 exactly at the uniform belief
  const auto eval = single_cell_eval(coin);
  CHECK(goals::test_probability(e, eval.histories[0].history, coin) == 0.5);

  const auto r = verify_thm5(e, agents::OptimalPolicy{}, eval, 1);
  CHECK(std::abs(r.lhs - 0.25) <= 1e-12);
  CHECK(std::abs(r.rhs - 0.25) <= 1e-12);
  CHECK(r.satisfied);
}

TEST_CASE("operator recovery end to end") {
  const auto pomdp = env::psr_dyadic_env();
  const std::vector<goals::Test> tests{{{0}, {{0}}}, {{0}, {{1}}}};
  const std::vector<env::History> histories{{{0}, {}}, {{1}, {}}};

  const auto exact =
      verify_thm6(pomdp, tests, histories, agents::OptimalPolicy{}, 512);
  REQUIRE(exact.reports.size() == 2);
  CHECK(exact.reports[0].satisfied);
  CHECK(exact.reports[1].satisfied);
  CHECK(exact.linear_update_violation <= 1e-8);
  CHECK(exact.delta_bar_k == 0.0);
  CHECK(std::sqrt(exact.ops.b_error.value()) <= 1e-6);

  const auto noisy =
      verify_thm6(pomdp, tests, histories, agents::noisy_optimal(0.001), 512);
  REQUIRE(noisy.reports.size() == 2);
  CHECK(noisy.reports[0].satisfied);
  CHECK(noisy.reports[1].satisfied);

  // Nearly collinear predictive columns trip the invertibility gate.
  const std::vector<env::History> close{{{0, 0, 0}, {0, 0}}, {{0, 0, 0, 0}, {0, 0, 0}}};
  const auto gated = verify_thm6(pomdp, tests, close, agents::OptimalPolicy{}, 512);
  REQUIRE(gated.reports.size() == 1);
  CHECK(gated.reports[0].satisfied);
  CHECK_FALSE(gated.ops.s_cond_ok);
  CHECK_FALSE(gated.ops.recovered);
}

TEST_CASE("operator recovery flags environments without a linear update") {
  Rng rng(505);
  const auto pomdp = env::random_pomdp(3, 2, 2, rng);  // 3 latent states, 2 tests
  const std::vector<goals::Test> tests{{{0}, {{0}}}, {{0}, {{1}}}};
  const std::vector<env::History> histories{{{0}, {}}, {{1}, {}}};
  const auto result = verify_thm6(pomdp, tests, histories, agents::OptimalPolicy{}, 64);
  REQUIRE(result.reports.size() == 1);  // no operator report under a failed assumption
  REQUIRE_FALSE(result.reports[0].flags.empty());
  CHECK(result.reports[0].flags[0].rfind("linear_update_violated", 0) == 0);
  CHECK(result.linear_update_violation > 1e-8);
}

TEST_CASE("aliasing lower bound is tight on the mirrored instance") {
  const auto pomdp = env::mirrored_belief_env(0.8);
  goals::EvaluationDistribution eval;
  eval.histories = {{env::History{{0, 2}, {0}}, 0.5}, {env::History{{1, 2}, {0}}, 0.5}};
  eval.tests = {{goals::Test{{0}, {{3}}}, 1.0}};
  eval.pairs = {{0, 1, 1.0}};

  const auto tight = verify_thm7(pomdp, agents::MemoryMap::constant(2),
                                 agents::Resolver::CellOptimal, 0.0, eval, 0.3);
  CHECK(tight.satisfied);
  CHECK(std::abs(tight.lhs - 0.375) <= 1e-12);
  CHECK(std::abs(tight.rhs - tight.lhs) < 1e-9);  // equality case

  const auto identity = verify_thm7(pomdp, agents::MemoryMap::identity(2),
                                    agents::Resolver::CellOptimal, 0.0, eval, 0.3);
  CHECK(identity.vacuous);  // no aliased pair carries witness mass
  CHECK(identity.lhs == 0.0);
  CHECK(identity.satisfied);
}

TEST_CASE("random memories never violate the aliasing bound") {
  for (int cfg_id = 0; cfg_id < 25; ++cfg_id) {
    Rng rng(9000 + cfg_id);
    const auto pomdp = env::random_pomdp(3, 2, 3, rng);
    goals::TestFamilyConfig cfg;
    cfg.max_depth = 2;
    const auto eval = goals::build_evaluation(pomdp, 1, cfg, true);
    auto mem_rng = rng.fork(1);
    const auto memory = agents::MemoryMap::random(static_cast<int>(eval.histories.size()),
                                                  mem_rng.uniform_int(1, 4), mem_rng);
    const auto r = verify_thm7(pomdp, memory, agents::Resolver::CellOptimal, 0.0, eval,
                               cfg_id % 2 == 0 ? 0.1 : 0.25);
    CHECK(r.satisfied);
  }
}

TEST_CASE("noisy memory-based policies keep the bound with growing slack") {
  const auto pomdp = env::mirrored_belief_env(0.8);
  goals::EvaluationDistribution eval;
  eval.histories = {{env::History{{0, 2}, {0}}, 0.5}, {env::History{{1, 2}, {0}}, 0.5}};
  eval.tests = {{goals::Test{{0}, {{3}}}, 1.0}};
  eval.pairs = {{0, 1, 1.0}};
  const auto table = goals::build_eval_table(pomdp, eval);
  const auto base = std::make_shared<agents::MBasedPolicy>(agents::make_m_based_policy(
      agents::MemoryMap::constant(2), agents::Resolver::CellOptimal, 0.0, eval, table,
      agents::GoalFamily::fair()));

  const double lower = 1.0 * numerics::margin_constants(0.3).c_gamma / 2.0;
  double prev = -1.0;
  for (double eps : {0.0, 0.1, 0.25, 0.5}) {
    const agents::NoisyPolicy noisy(eps, base);
    const auto profile =
        agents::regret_profile(noisy, eval, table, agents::GoalFamily::fair());
    CHECK(profile.pair_average.value() >= lower - 1e-12);
    CHECK(profile.pair_average.value() >= prev - 1e-15);
    prev = profile.pair_average.value();
  }
}

TEST_CASE("per-block alias bounds") {
  const auto pomdp = env::mirrored_belief_env(0.8);
  goals::EvaluationDistribution eval;
  eval.histories = {{env::History{{0, 2}, {0}}, 0.5}, {env::History{{1, 2}, {0}}, 0.5}};
  eval.tests = {{goals::Test{{0}, {{3}}}, 0.5}, {goals::Test{{0}, {{3}, {4}}}, 0.5}};
  eval.pairs = {{0, 1, 1.0}};

  // Identity memory: no aliasing anywhere.
  auto clean = verify_cor3(pomdp, {{0}, {1}}, agents::MemoryMap::identity(2),
                           agents::Resolver::CellOptimal, 0.0, eval, 0.3);
  REQUIRE(clean.size() == 2);
  for (const auto& r : clean) {
    CHECK(r.lhs == 0.0);
    CHECK(r.satisfied);
  }

  // Constant memory aliases only the straddling block.
  auto aliased = verify_cor3(pomdp, {{0}, {1}}, agents::MemoryMap::constant(2),
                             agents::Resolver::CellOptimal, 0.0, eval, 0.3);
  REQUIRE(aliased.size() == 2);
  CHECK(aliased[0].lhs == doctest::Approx(1.0));
  CHECK(aliased[0].satisfied);
  CHECK(std::abs(aliased[0].rhs - aliased[0].lhs) <= 1e-9);  // tight block
  CHECK(aliased[1].lhs == 0.0);
  CHECK(aliased[1].satisfied);

  // Zero-mass blocks are excluded.
  goals::EvaluationDistribution weighted = eval;
  weighted.tests[1].weight = 0.0;
  weighted.tests[0].weight = 1.0;
  auto pruned = verify_cor3(pomdp, {{0}, {1}}, agents::MemoryMap::constant(2),
                            agents::Resolver::CellOptimal, 0.0, weighted, 0.3);
  CHECK(pruned.size() == 1);
}

TEST_CASE("alias mass shrinks along a noise sweep of the regret budget") {
  // delta_bar -> 0 forces the block bound toward zero; here the converse
  // reading: the measured bound scales linearly in delta_bar.
  const auto pomdp = env::mirrored_belief_env(0.8);
  goals::EvaluationDistribution eval;
  eval.histories = {{env::History{{0, 2}, {0}}, 0.5}, {env::History{{1, 2}, {0}}, 0.5}};
  eval.tests = {{goals::Test{{0}, {{3}}}, 1.0}};
  eval.pairs = {{0, 1, 1.0}};
  const auto table = goals::build_eval_table(pomdp, eval);
  const double c = numerics::margin_constants(0.3).c_gamma;
  for (double eps : {0.0, 0.01, 0.05, 0.1}) {
    const auto profile = agents::regret_profile(agents::noisy_optimal(eps), eval, table,
                                                agents::GoalFamily::fair());
    const double alias_bound = 2.0 * profile.pair_average.value() / c;
    CHECK(alias_bound == doctest::Approx(2.0 * eps).epsilon(1e-9));
  }
}

TEST_CASE("regime-mismatch bound") {
  const auto pomdp = env::mirrored_belief_env(0.8);
  goals::EvaluationDistribution eval;
  eval.histories = {{env::History{{0, 2}, {0}}, 0.5}, {env::History{{1, 2}, {0}}, 0.5}};
  eval.tests = {{goals::Test{{0}, {{3}}}, 1.0}};
  eval.pairs = {{0, 1, 1.0}};
  eval.regimes = {0, 1};

  const auto blind = verify_cor4(pomdp, agents::MemoryMap::constant(2),
                                 agents::Resolver::CellOptimal, 0.0, eval, 0.3);
  CHECK(blind.satisfied);
  CHECK(blind.lhs == doctest::Approx(1.0));
  CHECK(std::abs(blind.rhs - 1.0) <= 1e-9);

  const auto aware = verify_cor4(pomdp, agents::MemoryMap::identity(2),
                                 agents::Resolver::CellOptimal, 0.0, eval, 0.3);
  CHECK(aware.lhs == 0.0);
  CHECK(aware.satisfied);

  goals::EvaluationDistribution same = eval;
  same.regimes = {0, 0};
  const auto vacuous = verify_cor4(pomdp, agents::MemoryMap::constant(2),
                                   agents::Resolver::CellOptimal, 0.0, same, 0.3);
  CHECK(vacuous.vacuous);

  goals::EvaluationDistribution unlabeled = eval;
  unlabeled.regimes.clear();
  CHECK_THROWS_AS(verify_cor4(pomdp, agents::MemoryMap::constant(2),
                              agents::Resolver::CellOptimal, 0.0, unlabeled, 0.3),
                  ConfigError);
}

TEST_CASE("relabeled minimal memories agree on the support") {
  const auto pomdp = env::mirrored_belief_env(0.8);
  goals::TestFamilyConfig cfg;
  cfg.max_depth = 1;
  const auto eval = goals::build_evaluation(pomdp, 1, cfg, true);

  const auto result = verify_cor5(pomdp, eval, 0.3, 99);
  CHECK(result.report.satisfied);
  CHECK(result.report.flags.empty());
  CHECK(result.profile.n_classes == 2);
  CHECK(result.incomplete_pairs.empty());
  // The exhibited maps invert each other on every support id.
  for (size_t h = 0; h < eval.histories.size(); ++h) {
    const int m1 = result.memory_one.memory_id[h];
    const int m2 = result.memory_two.memory_id[h];
    CHECK(result.phi[m2] == m1);
    CHECK(result.psi[m1] == m2);
  }
}

TEST_CASE("merging profile classes forfeits low regret") {
  const auto pomdp = env::mirrored_belief_env(0.8);
  goals::EvaluationDistribution eval;
  eval.histories = {{env::History{{0, 2}, {0}}, 0.5}, {env::History{{1, 2}, {0}}, 0.5}};
  eval.tests = {{goals::Test{{0}, {{3}}}, 1.0}};
  eval.pairs = {{0, 1, 1.0}};
  // Constant memory merges the two distinct profile classes; the aliasing
  // lower bound is strictly positive.
  const auto r = verify_thm7(pomdp, agents::MemoryMap::constant(2),
                             agents::Resolver::CellOptimal, 0.0, eval, 0.3);
  CHECK(r.lhs > 0.0);
  CHECK(r.rhs >= r.lhs - 1e-9);
}

TEST_CASE("gamma-completeness failures are listed instead of asserted") {
  const auto e = half_env();
  goals::EvaluationDistribution eval;
  // Beliefs (0.75, 0.25) and (0.25, 0.75) under observations 0 and 1.
  eval.histories = {{env::History{{0}, {}}, 0.5}, {env::History{{1}, {}}, 0.5}};
  // p = 0.8125 vs 0.5625: labels L vs undecided at gamma = 0.3, but the
  // pair never straddles, so no witness exists.
  eval.tests = {{goals::Test{{0}, {{0}, {2}}}, 1.0}};
  eval.pairs = {{0, 1, 1.0}};

  const auto result = verify_cor5(e, eval, 0.3, 5);
  CHECK_FALSE(result.incomplete_pairs.empty());
  REQUIRE_FALSE(result.report.flags.empty());
  CHECK(result.report.flags[0].rfind("gamma_completeness_failed", 0) == 0);
}

TEST_CASE("single-history support degenerates cleanly") {
  const auto pomdp = env::mirrored_belief_env(0.8);
  goals::EvaluationDistribution eval;
  eval.histories = {{env::History{{0, 2}, {0}}, 1.0}};
  eval.tests = {{goals::Test{{0}, {{3}}}, 1.0}};
  eval.pairs = {{0, 0, 1.0}};
  const auto result = verify_cor5(pomdp, eval, 0.3, 1);
  CHECK(result.report.satisfied);
  CHECK(result.report.flags.empty());
}

TEST_CASE("nondegeneracy measurements") {
  const auto e = env::prop1_env(0.7);
  goals::TestFamilyConfig cfg;
  cfg.max_depth = 1;
  const auto eval = goals::build_evaluation(e, 0, cfg, false);
  const auto table = goals::build_eval_table(e, eval);

  // Probabilities all sit in {0, 0.3, 0.7, 1}.
  const auto at_point1 = measure_nondegeneracy(eval, table, 0.1);
  CHECK(at_point1.q_gamma == doctest::Approx(1.0));

  // Universes closed under complement are symmetric.
  CHECK(at_point1.eta == doctest::Approx(at_point1.eta_prime).epsilon(1e-12));

  // A universe with only high-probability events is one-sided.
  goals::EvaluationDistribution one_sided;
  one_sided.histories = eval.histories;
  one_sided.tests = {{goals::Test{{0}, {{1}, {2}}}, 1.0}};  // p = 1 at (u)
  const auto table2 = goals::build_eval_table(e, one_sided);
  const auto skew = measure_nondegeneracy(one_sided, table2, 0.1);
  CHECK(skew.eta == doctest::Approx(1.0));
  CHECK(skew.eta_prime == 0.0);
}
