#include "betlab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "betlab/errors.hpp"

namespace betlab::estimators {

double estimate_transition(const std::vector<double>& q_row, int n) {
  if (static_cast<int>(q_row.size()) != n + 1) {
    throw std::invalid_argument("branch-probability row must have n + 1 entries");
  }
  double sum = 0.0;
  for (double q : q_row) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("branch probabilities must lie in [0,1]");
    sum += 1.0 - q;
  }
  return (sum - 0.5) / n;
}

TransitionEstimate estimate_world_model(const agents::BranchPolicy& policy,
                                        const env::FiniteMDP& mdp, int n) {
  if (n < 1) throw std::invalid_argument("goal depth n must be >= 1");
  const auto report = env::validate(mdp);
  if (!report.ok()) throw std::invalid_argument("environment failed validation: " + report.failures.front());

  TransitionEstimate est;
  est.n_states = mdp.n_states;
  est.n_actions = mdp.n_actions;
  est.n = n;
  est.p_hat.resize(mdp.kernel.size());

  double abs_err = 0.0;
  std::vector<double> q_row(n + 1);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.p(s, a, s2);
        double cdf = 0.0;
        for (int k = 0; k <= n; ++k) {
          cdf = k == n ? 1.0 : std::min(cdf + numerics::binom_pmf(n, p, k), 1.0);
          const auto v = goals::make_goal_value(cdf, 1.0 - cdf);
          q_row[k] = policy.branch_prob(v, agents::CellKey{});
        }
        const double p_hat = estimate_transition(q_row, n);
        est.p_hat[(s * mdp.n_actions + a) * mdp.n_states + s2] = p_hat;
        abs_err += std::abs(p_hat - p);
      }
    }
  }
  est.mean_abs_error = abs_err / static_cast<double>(mdp.kernel.size());
  return est;
}

PredictiveStateEstimate estimate_predictive_state(const agents::BranchPolicy& policy,
                                                  const env::FinitePOMDP& pomdp,
                                                  const env::History& h,
                                                  const std::vector<goals::Test>& tests, int K,
                                                  int history_id,
                                                  const std::vector<int>* test_ids) {
  if (K < 1) throw std::invalid_argument("threshold grid needs K >= 1");
  if (test_ids && test_ids->size() != tests.size()) {
    throw std::invalid_argument("test_ids must match the test list");
  }
  const auto belief = env::filter_belief(pomdp, h);
  PredictiveStateEstimate out;
  out.eta_hat.reserve(tests.size());
  out.eta_true.reserve(tests.size());
  for (size_t j = 0; j < tests.size(); ++j) {
    const double p = goals::test_probability(pomdp, belief, tests[j]);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      const double lambda = (k + 0.5) / K;
      const auto v = goals::threshold_goal_value(p, lambda);
      acc += policy.branch_prob(
          v, agents::CellKey{history_id, test_ids ? (*test_ids)[j] : static_cast<int>(j), k});
    }
    out.eta_hat.push_back(acc / K);
    out.eta_true.push_back(p);
  }
  return out;
}

nlohmann::json to_json(const TransitionEstimate& est, const env::FiniteMDP& mdp) {
  nlohmann::json cells = nlohmann::json::array();
  for (int s = 0; s < est.n_states; ++s) {
    for (int a = 0; a < est.n_actions; ++a) {
      for (int s2 = 0; s2 < est.n_states; ++s2) {
        cells.push_back({{"cell", "s=" + std::to_string(s) + "/a=" + std::to_string(a) +
                                      "/s2=" + std::to_string(s2)},
                         {"estimate", est.at(s, a, s2)},
                         {"truth", mdp.p(s, a, s2)},
                         {"abs_error", std::abs(est.at(s, a, s2) - mdp.p(s, a, s2))}});
      }
    }
  }
  return {{"n", est.n}, {"mean_abs_error", est.mean_abs_error}, {"cells", std::move(cells)}};
}

nlohmann::json to_json(const PredictiveStateEstimate& est) {
  nlohmann::json cells = nlohmann::json::array();
  for (size_t j = 0; j < est.eta_hat.size(); ++j) {
    cells.push_back({{"cell", "test=" + std::to_string(j)},
                     {"estimate", est.eta_hat[j]},
                     {"truth", est.eta_true[j]},
                     {"abs_error", std::abs(est.eta_hat[j] - est.eta_true[j])}});
  }
  return {{"cells", std::move(cells)}};
}

namespace {

double spectral_norm(const Eigen::MatrixXd& m) {
  return m.jacobiSvd().singularValues()(0);
}

}  // namespace

double psr_recovery_constant(const PsrTruth& truth) {
  const double d = static_cast<double>(truth.s.rows());
  const double kappa = 1.0 / truth.s.jacobiSvd().singularValues().tail(1)(0);
  double y_norms = 0.0;
  for (const auto& y : truth.y) {
    const double ny = spectral_norm(y);
    y_norms += ny * ny;
  }
  const double k2 = kappa * kappa;
  return 8.0 * d * d * (1.0 + static_cast<double>(truth.y.size())) * (k2 + k2 * k2 * y_norms);
}

PsrOperators recover_psr_operators(const Eigen::MatrixXd& s_hat,
                                   const std::vector<Eigen::MatrixXd>& y_hats,
                                   std::optional<double> epsilon_budget, const PsrTruth* truth) {
  const Eigen::Index d = s_hat.rows();
  if (s_hat.cols() != d) throw std::invalid_argument("s_hat must be square");
  for (const auto& y : y_hats) {
    if (y.rows() != d || y.cols() != d) throw std::invalid_argument("y_hat dimension mismatch");
  }
  if (truth && (truth->s.rows() != d || truth->y.size() != y_hats.size())) {
    throw std::invalid_argument("truth dimensions do not match the estimates");
  }

  PsrOperators out;
  out.s_hat = s_hat;
  out.y_hat = y_hats;

  const auto svd = s_hat.jacobiSvd();
  out.sigma_min = svd.singularValues().tail(1)(0);
  const double sing_tol = 1e-10 * static_cast<double>(d) * s_hat.cwiseAbs().maxCoeff();
  const bool invertible = out.sigma_min > sing_tol;
  out.norm_s_hat_inv = invertible ? 1.0 / out.sigma_min : std::numeric_limits<double>::infinity();

  const double n_sigma = static_cast<double>(y_hats.size());
  if (truth) {
    const double eps = epsilon_budget.value_or(0.0);
    double sy = (s_hat - truth->s).squaredNorm();
    for (size_t i = 0; i < y_hats.size(); ++i) sy += (y_hats[i] - truth->y[i]).squaredNorm();
    out.sy_error = sy;
    if (epsilon_budget) {
      out.sy_bound = static_cast<double>(d * d) * (1.0 + n_sigma) * eps;
    }
  }

  bool run_solve = true;
  if (epsilon_budget) {
    // Gate: d * sqrt((1 + #sigma) * eps) <= 1 / (2 ||S^{-1}||_2), with the
    // true S when available.
    double inv_norm = out.norm_s_hat_inv;
    if (truth) {
      inv_norm = 1.0 / truth->s.jacobiSvd().singularValues().tail(1)(0);
    }
    out.s_cond_checked = true;
    out.s_cond_lhs = static_cast<double>(d) * std::sqrt((1.0 + n_sigma) * *epsilon_budget);
    out.s_cond_rhs = 1.0 / (2.0 * inv_norm);
    out.s_cond_ok = out.s_cond_lhs <= out.s_cond_rhs;
    run_solve = out.s_cond_ok;
  } else if (!invertible) {
    std::ostringstream msg;
    msg << "s_hat is singular beyond tolerance: sigma_min = " << out.sigma_min
        << ", tolerance = " << sing_tol << ", condition = "
        << (out.sigma_min > 0.0 ? svd.singularValues()(0) / out.sigma_min
                                : std::numeric_limits<double>::infinity());
    throw SingularMatrixError(msg.str());
  }

  if (run_solve && invertible) {
    // B S = Y  =>  S^T B^T = Y^T.
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(s_hat.transpose());
    out.b_hat.reserve(y_hats.size());
    for (const auto& y : y_hats) {
      Eigen::MatrixXd b = lu.solve(Eigen::MatrixXd(y.transpose())).transpose();
      out.max_residual = std::max(out.max_residual, (b * s_hat - y).norm());
      out.b_hat.push_back(std::move(b));
    }
    out.recovered = true;
  }

  if (truth && out.recovered) {
    // True operators from the exact system.
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu_true(truth->s.transpose());
    double b_err = 0.0;
    for (size_t i = 0; i < y_hats.size(); ++i) {
      Eigen::MatrixXd b_true = lu_true.solve(Eigen::MatrixXd(truth->y[i].transpose())).transpose();
      b_err += (out.b_hat[i] - b_true).squaredNorm();
    }
    out.b_error = b_err;
    if (epsilon_budget) out.b_bound = psr_recovery_constant(*truth) * *epsilon_budget;
  }
  return out;
}

}  // namespace betlab::estimators
