#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "betlab/rng.hpp"

namespace betlab::env {

inline constexpr double kRowSumTol = 1e-12;
inline constexpr int kDefaultHistoryCap = 4;

// Fully observed tabular environment. kernel is row-major [s][a][s'].
struct FiniteMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> kernel;
  std::vector<double> initial;

  double p(int s, int a, int s2) const { return kernel[(s * n_actions + a) * n_states + s2]; }
  double& p(int s, int a, int s2) { return kernel[(s * n_actions + a) * n_states + s2]; }
};

// Partially observed tabular environment. transition is [x][a][x'],
// observation is [x][o].
struct FinitePOMDP {
  int n_latent = 0;
  int n_actions = 0;
  int n_obs = 0;
  std::vector<double> transition;
  std::vector<double> observation;
  std::vector<double> initial;

  double t(int x, int a, int x2) const { return transition[(x * n_actions + a) * n_latent + x2]; }
  double& t(int x, int a, int x2) { return transition[(x * n_actions + a) * n_latent + x2]; }
  double z(int x, int o) const { return observation[x * n_obs + o]; }
  double& z(int x, int o) { return observation[x * n_obs + o]; }
};

// Alternating observation/action record o_0, a_0, o_1, ..., a_{t-1}, o_t.
struct History {
  std::vector<int> observations;
  std::vector<int> actions;

  int length() const { return static_cast<int>(actions.size()); }
  int last_obs() const { return observations.back(); }
  bool operator==(const History&) const = default;
};

struct WeightedHistory {
  History history;
  double weight = 0.0;
};

// Ordered pair of indices into a history list, sharing the last observation.
struct WeightedPair {
  int first = 0;
  int second = 0;
  double weight = 0.0;
};

struct Belief {
  std::vector<double> weights;
};

struct ValidationReport {
  bool stochastic_ok = true;
  std::vector<std::string> failures;       // offending rows, if any
  bool action_dependent = true;            // some (s,a,a',s') with differing kernels
  std::optional<bool> communicating;       // MDPs only
  std::vector<std::string> warnings;

  bool ok() const { return stochastic_ok; }
};

ValidationReport validate(const FiniteMDP& mdp);
ValidationReport validate(const FinitePOMDP& pomdp);

// Probability of the history under the environment with uniformly random
// reference actions.
double history_probability(const FinitePOMDP& pomdp, const History& h);

// All positive-probability histories of exactly `length` actions under the
// uniform reference rule, weighted by probability. Throws ResourceLimitError
// past the cap.
std::vector<WeightedHistory> enumerate_histories(const FinitePOMDP& pomdp, int length,
                                                 int cap = kDefaultHistoryCap);

// Posterior over latent states given the history. Actions are conditioned
// on, not marginalized, so the reference rule's probabilities drop out.
// Throws ConditioningError on a zero-probability history.
Belief filter_belief(const FinitePOMDP& pomdp, const History& h);

// Ordered same-last-observation pairs (i, j), weighted as: draw h from the
// history weights, then h' from the weights renormalized over the class
// sharing last(h). Includes the diagonal.
std::vector<WeightedPair> pairs_same_last_obs(const std::vector<WeightedHistory>& histories);

// ---- Builders ----------------------------------------------------------

FiniteMDP random_mdp(int n_states, int n_actions, Rng& rng);
FinitePOMDP random_pomdp(int n_latent, int n_actions, int n_obs, Rng& rng);

// Four-latent-state environment with observations {u, 0, 1} (indices 0,1,2):
// start in x0 w.p. r else x1, first observation always u, then absorb into
// y0/y1 which reveal 0/1 forever. Requires r in (1/2, 1).
FinitePOMDP prop1_env(double r);

// The pair (E_p, E_q), identical apart from the initial distribution.
// Requires p, q in (1/2, 1) and p != q.
std::pair<FinitePOMDP, FinitePOMDP> build_prop1_pair(double p, double q);

// Two-branch environment: the first observation (A or B, indices 0/1) sets
// the latent mix to (r, 1-r) or (1-r, r) over x0/x1 under a shared second
// observation u (index 2); afterwards the state is revealed as 0/1
// (indices 3/4). Gives same-last-observation histories with mirrored
// beliefs, exact for dyadic r.
FinitePOMDP mirrored_belief_env(double r);

// Two-latent-state environment with dyadic kernels (denominators <= 8) and
// deterministic latent dynamics: action 0 keeps the state, action 1 swaps
// it. Depth-1 test probabilities at depth-0 histories are multiples of
// 2^-9, so a 512-point threshold grid reads them off exactly.
FinitePOMDP psr_dyadic_env();

// ---- Structural-model counterexample ------------------------------------

// Binary-outcome structural model over exogenous U ~ Bernoulli(1/2):
// next_state[a][u] is the successor under action a and noise u.
struct ScmModel {
  std::array<std::array<int, 2>, 2> next_state{};

  // P(S' = s | do(A = a)), averaging over U.
  double intervention_kernel(int a, int s) const;
};

struct ScmPair {
  ScmModel model_one;  // s' = u
  ScmModel model_two;  // s' = a xor u
};

// The two models share interventional kernels but differ counterfactually.
ScmPair build_l3_pair();

// Abduct U from (observed_a, observed_s), then re-execute with alt_a.
// Throws AbductionError when no consistent U exists (or the consistent
// values disagree about the counterfactual outcome).
int counterfactual(const ScmModel& model, int observed_a, int observed_s, int alt_a);

// ---- JSON round trip -----------------------------------------------------

nlohmann::json to_json(const FiniteMDP& mdp);
nlohmann::json to_json(const FinitePOMDP& pomdp);
FiniteMDP mdp_from_json(const nlohmann::json& j);
FinitePOMDP pomdp_from_json(const nlohmann::json& j);

}  // namespace betlab::env
