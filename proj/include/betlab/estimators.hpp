#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "betlab/agents.hpp"

namespace betlab::estimators {

// Raw soft estimate of one transition probability from the policy's branch
// probabilities across thresholds k = 0..n: (sum_k (1 - q_k) - 1/2) / n.
// Deliberately unclamped; use clamp01 for downstream consumers.
double estimate_transition(const std::vector<double>& q_row, int n);

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

struct TransitionEstimate {
  int n_states = 0;
  int n_actions = 0;
  int n = 0;
  std::vector<double> p_hat;  // [s][a][s'], raw
  double mean_abs_error = 0.0;

  double at(int s, int a, int s2) const { return p_hat[(s * n_actions + a) * n_states + s2]; }
};

// Applies estimate_transition to every (s, a, s') cell; the error is the
// uniform average of |p_hat - p| over all cells.
TransitionEstimate estimate_world_model(const agents::BranchPolicy& policy,
                                        const env::FiniteMDP& mdp, int n);

struct PredictiveStateEstimate {
  std::vector<double> eta_hat;   // threshold-grid estimate per test
  std::vector<double> eta_true;  // exact test probabilities, for reporting
};

// Per-test estimate (1/K) sum_k q_{T,lambda_k}(h) on the K-point grid.
// history_id / test_ids feed cell keys so memory-based policies resolve;
// leave them defaulted for key-free policies.
PredictiveStateEstimate estimate_predictive_state(const agents::BranchPolicy& policy,
                                                  const env::FinitePOMDP& pomdp,
                                                  const env::History& h,
                                                  const std::vector<goals::Test>& tests, int K,
                                                  int history_id = -1,
                                                  const std::vector<int>* test_ids = nullptr);

// True predictive matrices for operator recovery; B is derived as Y S^{-1}.
struct PsrTruth {
  Eigen::MatrixXd s;
  std::vector<Eigen::MatrixXd> y;
};

struct PsrOperators {
  Eigen::MatrixXd s_hat;
  std::vector<Eigen::MatrixXd> y_hat;
  std::vector<Eigen::MatrixXd> b_hat;  // empty unless recovered
  bool recovered = false;

  // Condition data for s_hat.
  double sigma_min = 0.0;
  double norm_s_hat_inv = 0.0;

  // Invertibility gate, evaluated when an error budget is supplied. The
  // inverse norm is the true S's when truth is given, else s_hat's.
  bool s_cond_checked = false;
  bool s_cond_ok = false;
  double s_cond_lhs = 0.0;
  double s_cond_rhs = 0.0;

  // Residual max_sigma ||b_hat * s_hat - y_hat||_F over recovered operators.
  double max_residual = 0.0;

  // Error accounting against supplied truth.
  std::optional<double> sy_error;  // ||s_hat-S||_F^2 + sum ||y_hat-Y||_F^2
  std::optional<double> sy_bound;  // d^2 (1 + #sigma) * epsilon budget
  std::optional<double> b_error;   // sum ||b_hat - B||_F^2
  std::optional<double> b_bound;   // C(S, Y) * epsilon budget
};

// Recovers b_hat_sigma = y_hat_sigma * s_hat^{-1} via a pivoted solve with
// singularity tolerance 1e-10 * d * max|entry|. With an epsilon budget the
// invertibility gate decides whether the solve runs; without one a singular
// s_hat throws SingularMatrixError carrying the condition diagnostic.
PsrOperators recover_psr_operators(const Eigen::MatrixXd& s_hat,
                                   const std::vector<Eigen::MatrixXd>& y_hats,
                                   std::optional<double> epsilon_budget = std::nullopt,
                                   const PsrTruth* truth = nullptr);

// C(S, Y) = 8 d^2 (1 + #sigma) (||S^{-1}||_2^2 + ||S^{-1}||_2^4 sum ||Y_sigma||_2^2).
double psr_recovery_constant(const PsrTruth& truth);

// JSON exports mirroring the CSV estimate rows (cell, estimate, truth,
// absolute error).
nlohmann::json to_json(const TransitionEstimate& est, const env::FiniteMDP& mdp);
nlohmann::json to_json(const PredictiveStateEstimate& est);

}  // namespace betlab::estimators
