#pragma once

#include <string>
#include <vector>

#include "betlab/environments.hpp"
#include "betlab/numerics.hpp"

namespace betlab::goals {

inline constexpr int kDefaultDepthCap = 4;

// Action-conditioned prediction test: execute `actions`, succeed iff the
// resulting observation sequence lands in `event`. The event is an explicit
// sorted set of sequences, each as long as the action list.
struct Test {
  std::vector<int> actions;
  std::vector<std::vector<int>> event;

  int depth() const { return static_cast<int>(actions.size()); }
  void normalize();  // sort + dedupe the event set
  bool operator==(const Test&) const = default;
};

// Either-or commitment about how many of n attempted (s,a)->s_next
// transitions succeed relative to threshold k.
struct CompositeGoal {
  int s = 0;
  int a = 0;
  int s_next = 0;
  int n = 1;
  int k = 0;
};

// Bet a test against an independent reference lottery of probability lambda.
struct ThresholdGoal {
  Test test;
  double lambda = 0.0;
};

// Branch values of a binary goal; branch 1 is the L report.
struct GoalValue {
  double u_branch1 = 0.0;
  double u_branch2 = 0.0;
  double v_star = 0.0;
  double margin = 0.0;  // |u1 - u2| / 2
};

GoalValue make_goal_value(double u1, double u2);

// Branch values (F(k), 1 - F(k)) of the counting goal, where F is the
// binomial CDF at the tested transition probability. Requires a
// communicating environment (otherwise attempts may never complete).
GoalValue composite_goal_value(const env::FiniteMDP& mdp, const CompositeGoal& g);

// Exact P(observations in event | history, prescribed actions).
double test_probability(const env::FinitePOMDP& pomdp, const env::History& h, const Test& t);

// Same, starting from an already-filtered belief.
double test_probability(const env::FinitePOMDP& pomdp, const env::Belief& belief, const Test& t);

// Fair bet on the test against its complement.
GoalValue fair_goal_value(double p_t);

// Bet the test (branch 1) against the lottery (branch 2).
GoalValue threshold_goal_value(double p_t, double lambda);

// Midpoints (k - 1/2) / K for k = 1..K.
std::vector<double> threshold_grid(int K);

struct WeightedTest {
  Test test;
  double weight = 0.0;
};

// Event families used when materializing a finite test universe.
struct TestFamilyConfig {
  int max_depth = 2;
  bool singletons = true;
  bool complements = true;
  bool prefix_cylinders = false;
  long max_tests = 100000;
};

// All (actions, event) pairs for depths 1..max_depth under the configured
// families, deduplicated, deterministically ordered, uniformly weighted.
std::vector<WeightedTest> enumerate_tests(int n_actions, int n_obs, const TestFamilyConfig& cfg);

// Histories, the test distribution, and optional same-last-observation
// pairs with regime labels: everything a bound check is averaged over.
struct EvaluationDistribution {
  std::vector<env::WeightedHistory> histories;
  std::vector<WeightedTest> tests;
  std::vector<env::WeightedPair> pairs;  // may be empty
  std::vector<int> regimes;              // per history; may be empty
};

EvaluationDistribution build_evaluation(const env::FinitePOMDP& pomdp, int history_length,
                                        const TestFamilyConfig& cfg, bool with_pairs);

// Cached exact test probabilities p[h][t] over an evaluation.
struct EvalTable {
  int n_hist = 0;
  int n_tests = 0;
  std::vector<double> p;

  double at(int h, int t) const { return p[static_cast<size_t>(h) * n_tests + t]; }
};

EvalTable build_eval_table(const env::FinitePOMDP& pomdp, const EvaluationDistribution& eval);

// Indices of universe tests straddling the margin band: p >= 1/2 + gamma at
// h and p <= 1/2 - gamma at h_prime (orientation fixed: high at h).
std::vector<int> witness_tests(const env::FinitePOMDP& pomdp, const env::History& h,
                               const env::History& h_prime, double gamma,
                               const std::vector<WeightedTest>& universe);

// ((a, actions), {o} x event): prefix the test with one action-observation
// step. Throws ResourceLimitError past the depth cap.
Test compose_test(int action, int obs, const Test& t, int depth_cap = kDefaultDepthCap);

// Universe serialization for reproducible experiment manifests.
nlohmann::json to_json(const Test& t);
nlohmann::json to_json(const std::vector<WeightedTest>& universe);
Test test_from_json(const nlohmann::json& j);
std::vector<WeightedTest> universe_from_json(const nlohmann::json& j);

}  // namespace betlab::goals
