#include "betlab/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "betlab/errors.hpp"

namespace betlab::verifier {

namespace {

using agents::CellKey;
using numerics::bet_regret;
using numerics::margin_constants;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

// Both-orientation straddle at margin gamma.
bool straddles(double p_a, double p_b, double gamma) {
  return (p_a >= 0.5 + gamma && p_b <= 0.5 - gamma) ||
         (p_b >= 0.5 + gamma && p_a <= 0.5 - gamma);
}

std::vector<double> pair_induced_weights(const goals::EvaluationDistribution& eval) {
  if (eval.pairs.empty()) {
    throw ConfigError("this check needs an evaluation with history pairs");
  }
  std::vector<double> w(eval.histories.size(), 0.0);
  for (const auto& pr : eval.pairs) {
    if (eval.histories[pr.first].history.last_obs() !=
        eval.histories[pr.second].history.last_obs()) {
      throw ConfigError("paired histories must share their last observation");
    }
    w[pr.first] += 0.5 * pr.weight;
    w[pr.second] += 0.5 * pr.weight;
  }
  return w;
}

}  // namespace

BoundReport make_report(std::string theorem, double lhs, double rhs, InputsDigest inputs,
                        bool vacuous) {
  BoundReport r;
  r.theorem = std::move(theorem);
  r.lhs = lhs;
  r.rhs = rhs;
  r.slack = rhs - lhs;
  r.satisfied = lhs <= rhs + kSlackTol;
  r.vacuous = vacuous;
  r.inputs = std::move(inputs);
  return r;
}

Nondegeneracy measure_nondegeneracy(const goals::EvaluationDistribution& eval,
                                    const goals::EvalTable& table, double gamma) {
  Nondegeneracy out;
  for (int h = 0; h < table.n_hist; ++h) {
    for (int t = 0; t < table.n_tests; ++t) {
      const double mass = eval.histories[h].weight * eval.tests[t].weight;
      const double p = table.at(h, t);
      if (std::abs(p - 0.5) >= gamma) out.q_gamma += mass;
      if (p >= 0.5 + gamma) out.eta += mass;
      if (p <= 0.5 - gamma) out.eta_prime += mass;
    }
  }
  return out;
}

DecisionProfile decision_profile(const goals::EvalTable& table, double gamma) {
  DecisionProfile profile;
  profile.n_hist = table.n_hist;
  profile.n_tests = table.n_tests;
  profile.entries.resize(static_cast<size_t>(table.n_hist) * table.n_tests);
  for (int h = 0; h < table.n_hist; ++h) {
    for (int t = 0; t < table.n_tests; ++t) {
      const double p = table.at(h, t);
      int8_t label = 0;
      if (p >= 0.5 + gamma) label = 1;
      if (p <= 0.5 - gamma) label = -1;
      profile.entries[static_cast<size_t>(h) * table.n_tests + t] = label;
    }
  }
  // Group identical rows in first-appearance order.
  profile.class_id.assign(table.n_hist, -1);
  std::vector<int> representatives;
  for (int h = 0; h < table.n_hist; ++h) {
    for (size_t c = 0; c < representatives.size(); ++c) {
      const int rep = representatives[c];
      if (std::equal(profile.entries.begin() + static_cast<size_t>(h) * table.n_tests,
                     profile.entries.begin() + static_cast<size_t>(h + 1) * table.n_tests,
                     profile.entries.begin() + static_cast<size_t>(rep) * table.n_tests)) {
        profile.class_id[h] = static_cast<int>(c);
        break;
      }
    }
    if (profile.class_id[h] < 0) {
      representatives.push_back(h);
      profile.class_id[h] = static_cast<int>(representatives.size()) - 1;
    }
  }
  profile.n_classes = static_cast<int>(representatives.size());
  return profile;
}

// ---- Fully observed ------------------------------------------------------

namespace {

double thm1_rhs(const env::FiniteMDP& mdp, int n, double gamma, double delta_bar) {
  const auto constants = margin_constants(gamma);
  if (!constants.t_finite()) return std::numeric_limits<double>::infinity();
  double mean_sigma = 0.0;
  const auto n_cells = static_cast<double>(mdp.kernel.size());
  for (double p : mdp.kernel) mean_sigma += std::sqrt(p * (1.0 - p) / n);
  mean_sigma /= n_cells;
  return 2.0 * constants.t_gamma * mean_sigma +
         (static_cast<double>(n + 1) / n) * delta_bar / constants.c_gamma + 3.5 / n;
}

}  // namespace

BoundReport verify_thm1(const env::FiniteMDP& mdp, const agents::BranchPolicy& policy, int n,
                        double gamma, InputsDigest inputs) {
  const auto validation = env::validate(mdp);
  if (!validation.ok() || !validation.communicating.value_or(false)) {
    throw std::invalid_argument("transition recovery needs a valid communicating environment");
  }
  inputs.gamma = gamma;
  inputs.n = n;

  const auto est = estimators::estimate_world_model(policy, mdp, n);
  const double delta_bar = agents::regret_profile_mdp(policy, mdp, n).average;
  const double rhs = thm1_rhs(mdp, n, gamma, delta_bar);

  auto report = make_report("thm1", est.mean_abs_error, rhs, std::move(inputs), rhs >= 1.0);
  report.notes.push_back("delta_bar=" + fmt(delta_bar));
  if (!margin_constants(gamma).t_finite()) report.notes.push_back("t_gamma_infinite");
  return report;
}

namespace {

// Moves probability mass m <= eps within one kernel row (two entries change
// by -m/+m), keeping the row stochastic and every entry shift within eps.
env::FiniteMDP perturbed_do_kernel(const env::FiniteMDP& mdp, double eps, uint64_t seed,
                                   bool adversarial) {
  env::FiniteMDP out = mdp;
  if (eps == 0.0) return out;
  Rng rng(seed);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      int best_i = -1, best_j = -1;
      double best_m = -1.0;
      if (adversarial) {
        for (int i = 0; i < mdp.n_states; ++i) {
          for (int j = 0; j < mdp.n_states; ++j) {
            if (i == j) continue;
            const double m = std::min({eps, mdp.p(s, a, i), 1.0 - mdp.p(s, a, j)});
            if (m > best_m) {
              best_m = m;
              best_i = i;
              best_j = j;
            }
          }
        }
      } else {
        // A few seeded proposals; keep the first feasible one.
        for (int attempt = 0; attempt < 16 && best_m <= 0.0; ++attempt) {
          const int i = rng.uniform_int(0, mdp.n_states - 1);
          int j = rng.uniform_int(0, mdp.n_states - 2);
          if (j >= i) ++j;
          const double m = std::min({eps, mdp.p(s, a, i), 1.0 - mdp.p(s, a, j)});
          if (m > 0.0) {
            best_m = m;
            best_i = i;
            best_j = j;
          }
        }
      }
      if (best_m > 0.0) {
        out.p(s, a, best_i) -= best_m;
        out.p(s, a, best_j) += best_m;
      }
    }
  }
  return out;
}

}  // namespace

BoundReport verify_cor1(const env::FiniteMDP& mdp, const agents::BranchPolicy& policy, int n,
                        double gamma, double eps_cmp, uint64_t perturb_seed, bool adversarial,
                        InputsDigest inputs) {
  if (eps_cmp < 0.0) throw std::invalid_argument("eps_cmp must be nonnegative");
  inputs.gamma = gamma;
  inputs.n = n;

  const auto do_kernel = perturbed_do_kernel(mdp, eps_cmp, perturb_seed, adversarial);
  const auto est = estimators::estimate_world_model(policy, mdp, n);
  double lhs = 0.0;
  for (size_t i = 0; i < est.p_hat.size(); ++i) {
    lhs += std::abs(est.p_hat[i] - do_kernel.kernel[i]);
  }
  lhs /= static_cast<double>(est.p_hat.size());

  const double delta_bar = agents::regret_profile_mdp(policy, mdp, n).average;
  const double rhs = thm1_rhs(mdp, n, gamma, delta_bar) + eps_cmp;
  auto report = make_report("cor1", lhs, rhs, std::move(inputs), rhs >= 1.0 + eps_cmp);
  report.notes.push_back("eps_cmp=" + fmt(eps_cmp));
  report.notes.push_back(adversarial ? "perturbation=adversarial" : "perturbation=random");
  return report;
}

BoundReport verify_cor2(InputsDigest inputs) {
  const auto pair = env::build_l3_pair();
  double kernel_gap = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int s = 0; s < 2; ++s) {
      kernel_gap = std::max(kernel_gap, std::abs(pair.model_one.intervention_kernel(a, s) -
                                                 pair.model_two.intervention_kernel(a, s)));
    }
  }
  // Evidence (a=0, s'=1), counterfactual action 1.
  const int cf_one = env::counterfactual(pair.model_one, 0, 1, 1);
  const int cf_two = env::counterfactual(pair.model_two, 0, 1, 1);
  const double cf_gap = std::abs(cf_one - cf_two);

  auto report = make_report("cor2", kernel_gap + (1.0 - cf_gap), 0.0, std::move(inputs));
  report.notes.push_back("kernel_gap=" + fmt(kernel_gap));
  report.notes.push_back("counterfactual_gap=" + fmt(cf_gap));
  return report;
}

// ---- Partially observed --------------------------------------------------

std::vector<BoundReport> verify_thm4(const env::FinitePOMDP& pomdp,
                                     const agents::BranchPolicy& policy,
                                     const goals::EvaluationDistribution& eval, double gamma,
                                     InputsDigest inputs) {
  const auto constants = margin_constants(gamma);
  inputs.gamma = gamma;
  const auto table = goals::build_eval_table(pomdp, eval);
  const auto nondeg = measure_nondegeneracy(eval, table, gamma);

  double lhs = 0.0;
  for (int h = 0; h < table.n_hist; ++h) {
    for (int t = 0; t < table.n_tests; ++t) {
      const double p = table.at(h, t);
      if (std::abs(p - 0.5) < gamma) continue;
      const auto v = goals::fair_goal_value(p);
      const double q = policy.branch_prob(v, CellKey{h, t, -1});
      lhs += eval.histories[h].weight * eval.tests[t].weight *
             bet_regret(v.u_branch1, v.u_branch2, q).wrong_mass;
    }
  }
  const double delta_bar =
      agents::regret_profile(policy, eval, table, agents::GoalFamily::fair()).average;
  const double rhs = delta_bar / constants.c_gamma;

  auto main = make_report("thm4", lhs, rhs, inputs, rhs >= 1.0);
  main.notes.push_back("delta_bar=" + fmt(delta_bar));
  main.notes.push_back("q_gamma=" + fmt(nondeg.q_gamma));
  main.notes.push_back("eta=" + fmt(nondeg.eta));
  main.notes.push_back("eta_prime=" + fmt(nondeg.eta_prime));
  if (nondeg.eta == 0.0 || nondeg.eta_prime == 0.0) {
    main.notes.push_back("one_sided_universe");
  }

  std::vector<BoundReport> reports;
  if (nondeg.q_gamma > 0.0) {
    auto cond =
        make_report("thm4_cond", lhs / nondeg.q_gamma, rhs / nondeg.q_gamma, inputs, rhs >= 1.0);
    reports.push_back(std::move(main));
    reports.push_back(std::move(cond));
  } else {
    main.notes.push_back("conditional_skipped_q_gamma_zero");
    reports.push_back(std::move(main));
  }
  return reports;
}

BoundReport verify_prop1(double p, double q, int depth, InputsDigest inputs) {
  const auto pair = env::build_prop1_pair(p, q);
  const env::History h{{0}, {}};  // the shared first observation u

  goals::TestFamilyConfig cfg;
  cfg.max_depth = depth;
  cfg.singletons = true;
  cfg.complements = true;
  cfg.prefix_cylinders = true;
  const auto universe = goals::enumerate_tests(pair.first.n_actions, pair.first.n_obs, cfg);

  const auto belief_p = env::filter_belief(pair.first, h);
  const auto belief_q = env::filter_belief(pair.second, h);
  int mismatched_bets = 0;
  double max_gap = 0.0;
  for (const auto& wt : universe) {
    const double p_p = goals::test_probability(pair.first, belief_p, wt.test);
    const double p_q = goals::test_probability(pair.second, belief_q, wt.test);
    const bool bet_p = p_p >= 0.5;
    const bool bet_q = p_q >= 0.5;
    if (bet_p != bet_q) ++mismatched_bets;
    max_gap = std::max(max_gap, std::abs(p_p - p_q));
  }
  const double expected_gap = std::abs(p - q);

  auto report = make_report("prop1", mismatched_bets + std::abs(max_gap - expected_gap), 0.0,
                            std::move(inputs));
  report.notes.push_back("max_gap=" + fmt(max_gap));
  report.notes.push_back("expected_gap=" + fmt(expected_gap));
  report.notes.push_back("tests=" + std::to_string(universe.size()));
  return report;
}

BoundReport verify_thm5(const env::FinitePOMDP& pomdp, const agents::BranchPolicy& policy,
                        const goals::EvaluationDistribution& eval, int K, InputsDigest inputs) {
  if (K < 1) throw std::invalid_argument("threshold grid needs K >= 1");
  inputs.K = K;
  const auto table = goals::build_eval_table(pomdp, eval);

  double lhs = 0.0;
  double delta_bar_k = 0.0;
  for (int h = 0; h < table.n_hist; ++h) {
    for (int t = 0; t < table.n_tests; ++t) {
      const double mass = eval.histories[h].weight * eval.tests[t].weight;
      if (mass == 0.0) continue;
      const double p = table.at(h, t);
      double p_hat = 0.0;
      double regret_avg = 0.0;
      for (int k = 0; k < K; ++k) {
        const double lambda = (k + 0.5) / K;
        const auto v = goals::threshold_goal_value(p, lambda);
        const double qk = policy.branch_prob(v, CellKey{h, t, k});
        p_hat += qk;
        regret_avg += bet_regret(v.u_branch1, v.u_branch2, qk).regret;
      }
      p_hat /= K;
      regret_avg /= K;
      lhs += mass * (p_hat - p) * (p_hat - p);
      delta_bar_k += mass * regret_avg;
    }
  }
  const double rhs = 2.0 * delta_bar_k + 1.0 / (4.0 * static_cast<double>(K) * K);
  auto report = make_report("thm5", lhs, rhs, std::move(inputs), rhs >= 1.0);
  report.notes.push_back("delta_bar_k=" + fmt(delta_bar_k));
  return report;
}

Thm6Result verify_thm6(const env::FinitePOMDP& pomdp, const std::vector<goals::Test>& tests,
                       const std::vector<env::History>& histories,
                       const agents::BranchPolicy& policy, int K, int check_length,
                       InputsDigest inputs) {
  const int d = static_cast<int>(tests.size());
  if (d == 0 || static_cast<int>(histories.size()) != d) {
    throw std::invalid_argument("operator recovery needs d tests and d histories");
  }
  inputs.K = K;

  Thm6Result result;
  const int n_sigma = pomdp.n_actions * pomdp.n_obs;

  // Indexed family: the d core tests followed by every composed sigma o T_j.
  std::vector<goals::Test> family = tests;
  family.reserve(static_cast<size_t>(d) * (1 + n_sigma));
  for (int a = 0; a < pomdp.n_actions; ++a) {
    for (int o = 0; o < pomdp.n_obs; ++o) {
      for (const auto& t : tests) family.push_back(goals::compose_test(a, o, t));
    }
  }

  // Exact predictive values: column i of S is s(h^i).
  Eigen::MatrixXd s_true(d, d);
  std::vector<Eigen::MatrixXd> y_true(n_sigma, Eigen::MatrixXd(d, d));
  std::vector<env::Belief> beliefs;
  beliefs.reserve(d);
  for (int i = 0; i < d; ++i) beliefs.push_back(env::filter_belief(pomdp, histories[i]));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      s_true(j, i) = goals::test_probability(pomdp, beliefs[i], family[j]);
    }
    for (int sig = 0; sig < n_sigma; ++sig) {
      for (int j = 0; j < d; ++j) {
        y_true[sig](j, i) = goals::test_probability(pomdp, beliefs[i], family[d + sig * d + j]);
      }
    }
  }
  result.truth = estimators::PsrTruth{s_true, y_true};

  // Validate the linear-update assumption on every enumerated history.
  std::string assumption_flag;
  const double sing_tol = 1e-10 * d * s_true.cwiseAbs().maxCoeff();
  const double sigma_min_true = s_true.jacobiSvd().singularValues().tail(1)(0);
  if (sigma_min_true <= sing_tol) {
    assumption_flag = "true_s_singular:sigma_min=" + fmt(sigma_min_true);
  } else {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(s_true.transpose());
    std::vector<Eigen::MatrixXd> b_true;
    b_true.reserve(n_sigma);
    for (int sig = 0; sig < n_sigma; ++sig) {
      b_true.push_back(lu.solve(Eigen::MatrixXd(y_true[sig].transpose())).transpose());
    }
    for (int len = 0; len <= check_length; ++len) {
      for (const auto& wh : env::enumerate_histories(pomdp, len)) {
        const auto belief = env::filter_belief(pomdp, wh.history);
        Eigen::VectorXd s_h(d);
        for (int j = 0; j < d; ++j) {
          s_h(j) = goals::test_probability(pomdp, belief, family[j]);
        }
        for (int sig = 0; sig < n_sigma; ++sig) {
          Eigen::VectorXd s_sig(d);
          for (int j = 0; j < d; ++j) {
            s_sig(j) = goals::test_probability(pomdp, belief, family[d + sig * d + j]);
          }
          result.linear_update_violation = std::max(
              result.linear_update_violation, (s_sig - b_true[sig] * s_h).cwiseAbs().maxCoeff());
        }
      }
    }
    if (result.linear_update_violation > 1e-8) {
      assumption_flag = "linear_update_violated:" + fmt(result.linear_update_violation);
    }
  }

  // Estimated system from threshold bets, plus the measured grid regret.
  Eigen::MatrixXd s_hat(d, d);
  std::vector<Eigen::MatrixXd> y_hat(n_sigma, Eigen::MatrixXd(d, d));
  double delta_bar_k = 0.0;
  const int family_size = static_cast<int>(family.size());
  for (int i = 0; i < d; ++i) {
    const auto est = estimators::estimate_predictive_state(policy, pomdp, histories[i], family, K);
    for (int j = 0; j < family_size; ++j) {
      const double p = est.eta_true[j];
      for (int k = 0; k < K; ++k) {
        const auto v = goals::threshold_goal_value(p, (k + 0.5) / K);
        const double qk = policy.branch_prob(v, CellKey{-1, j, k});
        delta_bar_k += bet_regret(v.u_branch1, v.u_branch2, qk).regret;
      }
    }
    for (int j = 0; j < d; ++j) s_hat(j, i) = est.eta_hat[j];
    for (int sig = 0; sig < n_sigma; ++sig) {
      for (int j = 0; j < d; ++j) y_hat[sig](j, i) = est.eta_hat[d + sig * d + j];
    }
  }
  delta_bar_k /= static_cast<double>(d) * family_size * K;
  result.delta_bar_k = delta_bar_k;
  result.epsilon_k = 2.0 * delta_bar_k + 1.0 / (4.0 * static_cast<double>(K) * K);

  result.ops =
      estimators::recover_psr_operators(s_hat, y_hat, result.epsilon_k, &result.truth);

  auto sy = make_report("thm6_sy", result.ops.sy_error.value(), result.ops.sy_bound.value(),
                        inputs, result.ops.sy_bound.value() >= static_cast<double>(d) * d *
                                                                   (1 + n_sigma));
  sy.notes.push_back("delta_bar_k=" + fmt(delta_bar_k));
  sy.notes.push_back("epsilon_k=" + fmt(result.epsilon_k));
  sy.notes.push_back("linear_update_violation=" + fmt(result.linear_update_violation));
  if (!assumption_flag.empty()) sy.flags.push_back(assumption_flag);
  if (!result.ops.s_cond_ok) {
    sy.notes.push_back("s_cond_gate:skipped(lhs=" + fmt(result.ops.s_cond_lhs) +
                       ";rhs=" + fmt(result.ops.s_cond_rhs) + ")");
  }
  result.reports.push_back(std::move(sy));

  if (result.ops.recovered && assumption_flag.empty()) {
    auto b = make_report("thm6_b", result.ops.b_error.value(), result.ops.b_bound.value(), inputs);
    b.notes.push_back("b_frobenius_error=" + fmt(std::sqrt(result.ops.b_error.value())));
    result.reports.push_back(std::move(b));
  }
  return result;
}

// ---- Memory necessity ------------------------------------------------------

namespace {

struct AliasAccumulator {
  double q_alias = 0.0;          // alias and straddle
  double regime_mismatch = 0.0;  // alias and straddle and regimes differ
  double mismatch_mass = 0.0;    // pair mass with differing regimes
};

AliasAccumulator alias_mass(const goals::EvaluationDistribution& eval,
                            const goals::EvalTable& table, const agents::MemoryMap& memory,
                            double gamma, const std::vector<int>* test_subset = nullptr,
                            double subset_mass = 1.0) {
  AliasAccumulator acc;
  const bool has_regimes = !eval.regimes.empty();
  for (const auto& pr : eval.pairs) {
    const bool aliased = memory.memory_id[pr.first] == memory.memory_id[pr.second];
    const bool mismatched = has_regimes && eval.regimes[pr.first] != eval.regimes[pr.second];
    if (mismatched) acc.mismatch_mass += pr.weight;
    if (!aliased) continue;
    auto add_test = [&](int t) {
      const double d_mass = eval.tests[t].weight / subset_mass;
      if (straddles(table.at(pr.first, t), table.at(pr.second, t), gamma)) {
        acc.q_alias += pr.weight * d_mass;
        if (mismatched) acc.regime_mismatch += pr.weight * d_mass;
      }
    };
    if (test_subset) {
      for (int t : *test_subset) add_test(t);
    } else {
      for (int t = 0; t < table.n_tests; ++t) add_test(t);
    }
  }
  return acc;
}

}  // namespace

BoundReport verify_thm7(const env::FinitePOMDP& pomdp, const agents::MemoryMap& memory,
                        agents::Resolver resolver, double fixed_q,
                        const goals::EvaluationDistribution& eval, double gamma,
                        InputsDigest inputs) {
  const auto constants = margin_constants(gamma);
  inputs.gamma = gamma;
  const auto table = goals::build_eval_table(pomdp, eval);
  const auto weights = pair_induced_weights(eval);

  const auto policy = agents::make_m_based_policy(memory, resolver, fixed_q, eval, table,
                                                  agents::GoalFamily::fair(), &weights);
  const auto profile = agents::regret_profile(policy, eval, table, agents::GoalFamily::fair());
  const auto acc = alias_mass(eval, table, memory, gamma);

  const double lhs = acc.q_alias * constants.c_gamma / 2.0;
  auto report =
      make_report("thm7", lhs, profile.pair_average.value(), std::move(inputs), acc.q_alias == 0.0);
  report.notes.push_back("q_alias=" + fmt(acc.q_alias));
  if (acc.q_alias == 0.0) report.notes.push_back("empty_witness_sets");
  return report;
}

std::vector<BoundReport> verify_cor3(const env::FinitePOMDP& pomdp,
                                     const std::vector<std::vector<int>>& blocks,
                                     const agents::MemoryMap& memory, agents::Resolver resolver,
                                     double fixed_q, const goals::EvaluationDistribution& eval,
                                     double gamma, InputsDigest inputs) {
  const auto constants = margin_constants(gamma);
  inputs.gamma = gamma;
  const auto table = goals::build_eval_table(pomdp, eval);
  const auto weights = pair_induced_weights(eval);

  const auto policy = agents::make_m_based_policy(memory, resolver, fixed_q, eval, table,
                                                  agents::GoalFamily::fair(), &weights);
  const double delta_bar_p =
      agents::regret_profile(policy, eval, table, agents::GoalFamily::fair())
          .pair_average.value();

  std::vector<BoundReport> reports;
  for (size_t i = 0; i < blocks.size(); ++i) {
    double block_mass = 0.0;
    for (int t : blocks[i]) block_mass += eval.tests[t].weight;
    if (block_mass <= 0.0) continue;  // zero-mass blocks are excluded
    const auto acc = alias_mass(eval, table, memory, gamma, &blocks[i], block_mass);
    const double rhs = 2.0 * delta_bar_p / (block_mass * constants.c_gamma);
    auto report = make_report("cor3_block" + std::to_string(i), acc.q_alias, rhs, inputs,
                              rhs >= 1.0);
    report.notes.push_back("block_mass=" + fmt(block_mass));
    report.notes.push_back("delta_bar_p=" + fmt(delta_bar_p));
    reports.push_back(std::move(report));
  }
  return reports;
}

BoundReport verify_cor4(const env::FinitePOMDP& pomdp, const agents::MemoryMap& memory,
                        agents::Resolver resolver, double fixed_q,
                        const goals::EvaluationDistribution& eval, double gamma,
                        InputsDigest inputs) {
  if (eval.regimes.size() != eval.histories.size()) {
    throw ConfigError("regime-mismatch check needs a regime label per history");
  }
  const auto constants = margin_constants(gamma);
  inputs.gamma = gamma;
  const auto table = goals::build_eval_table(pomdp, eval);
  const auto weights = pair_induced_weights(eval);

  const auto policy = agents::make_m_based_policy(memory, resolver, fixed_q, eval, table,
                                                  agents::GoalFamily::fair(), &weights);
  const double delta_bar_p =
      agents::regret_profile(policy, eval, table, agents::GoalFamily::fair())
          .pair_average.value();
  const auto acc = alias_mass(eval, table, memory, gamma);

  const double rhs = 2.0 * delta_bar_p / constants.c_gamma;
  const bool vacuous = acc.mismatch_mass == 0.0;
  auto report = make_report("cor4", acc.regime_mismatch, rhs, std::move(inputs), vacuous);
  report.notes.push_back("mismatch_mass=" + fmt(acc.mismatch_mass));
  report.notes.push_back("delta_bar_p=" + fmt(delta_bar_p));
  if (vacuous) report.notes.push_back("no_regime_mismatch");
  return report;
}

Cor5Result verify_cor5(const env::FinitePOMDP& pomdp, const goals::EvaluationDistribution& eval,
                       double gamma, uint64_t relabel_seed, InputsDigest inputs) {
  inputs.gamma = gamma;
  const auto table = goals::build_eval_table(pomdp, eval);

  Cor5Result result;
  result.profile = decision_profile(table, gamma);

  // Support: histories carrying pair mass; all weighted histories otherwise.
  std::vector<char> support(eval.histories.size(), 0);
  if (!eval.pairs.empty()) {
    for (const auto& pr : eval.pairs) {
      if (pr.weight > 0.0) {
        support[pr.first] = 1;
        support[pr.second] = 1;
      }
    }
  } else {
    for (size_t h = 0; h < eval.histories.size(); ++h) {
      support[h] = eval.histories[h].weight > 0.0 ? 1 : 0;
    }
  }

  // Gamma-completeness: profile-separated support pairs must carry witness mass.
  for (const auto& pr : eval.pairs) {
    if (pr.weight <= 0.0) continue;
    if (result.profile.class_id[pr.first] == result.profile.class_id[pr.second]) continue;
    double witness_mass = 0.0;
    for (int t = 0; t < table.n_tests; ++t) {
      if (straddles(table.at(pr.first, t), table.at(pr.second, t), gamma)) {
        witness_mass += eval.tests[t].weight;
      }
    }
    if (witness_mass <= 0.0) result.incomplete_pairs.push_back({pr.first, pr.second});
  }

  // Two gamma-minimal memories: independently relabeled copies of the
  // profile partition.
  Rng rng(relabel_seed);
  auto rng_one = rng.fork(1);
  auto rng_two = rng.fork(2);
  result.memory_one = agents::MemoryMap::from_labels(result.profile.class_id, &rng_one);
  result.memory_two = agents::MemoryMap::from_labels(result.profile.class_id, &rng_two);

  int mismatches = 0;
  if (result.incomplete_pairs.empty()) {
    result.phi.assign(result.memory_two.n_memories, -1);
    result.psi.assign(result.memory_one.n_memories, -1);
    for (size_t h = 0; h < eval.histories.size(); ++h) {
      if (!support[h]) continue;
      const int m1 = result.memory_one.memory_id[h];
      const int m2 = result.memory_two.memory_id[h];
      if (result.phi[m2] == -1) result.phi[m2] = m1;
      if (result.psi[m1] == -1) result.psi[m1] = m2;
      if (result.phi[m2] != m1 || result.psi[m1] != m2) ++mismatches;
    }
    // Mutual inversion on ids seen in the support.
    for (int m2 = 0; m2 < result.memory_two.n_memories; ++m2) {
      if (result.phi[m2] != -1 && result.psi[result.phi[m2]] != m2) ++mismatches;
    }
  }

  result.report = make_report("cor5", mismatches, 0.0, std::move(inputs));
  result.report.notes.push_back("profile_classes=" + std::to_string(result.profile.n_classes));
  if (!result.incomplete_pairs.empty()) {
    std::string detail = "gamma_completeness_failed:pairs=";
    for (size_t i = 0; i < result.incomplete_pairs.size() && i < 8; ++i) {
      if (i) detail += '/';
      detail += std::to_string(result.incomplete_pairs[i].first) + "-" +
                std::to_string(result.incomplete_pairs[i].second);
    }
    result.report.flags.push_back(detail);
  }
  return result;
}

}  // namespace betlab::verifier
