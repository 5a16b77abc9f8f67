#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "betlab/goals.hpp"
#include "betlab/rng.hpp"

namespace betlab::agents {

// Identifies a bet cell inside an evaluation; -1 marks "not applicable".
struct CellKey {
  int history = -1;
  int test = -1;
  int threshold = -1;
};

// Goal-conditioned stochastic policy, reduced to its one interface with a
// binary goal: the probability q of committing to branch 1 (the L report).
class BranchPolicy {
 public:
  virtual ~BranchPolicy() = default;
  virtual double branch_prob(const goals::GoalValue& value, const CellKey& key) const = 0;
};

// q = 1 iff branch 1 is at least as good as branch 2; zero regret everywhere.
class OptimalPolicy final : public BranchPolicy {
 public:
  double branch_prob(const goals::GoalValue& value, const CellKey&) const override {
    return value.u_branch1 >= value.u_branch2 ? 1.0 : 0.0;
  }
};

// Flips the base policy's report with probability epsilon, giving an
// analytically known per-cell regret (epsilon times the margin factor when
// the base is optimal).
class NoisyPolicy final : public BranchPolicy {
 public:
  NoisyPolicy(double epsilon, std::shared_ptr<const BranchPolicy> base);
  double branch_prob(const goals::GoalValue& value, const CellKey& key) const override;
  double epsilon() const { return epsilon_; }

 private:
  double epsilon_;
  std::shared_ptr<const BranchPolicy> base_;
};

// Optimal policy degraded by epsilon-noise.
NoisyPolicy noisy_optimal(double epsilon);

// Memory statistic over an enumerated history set: history index -> cell id.
struct MemoryMap {
  std::vector<int> memory_id;
  int n_memories = 0;

  static MemoryMap identity(int n_histories);
  static MemoryMap constant(int n_histories);
  static MemoryMap last_observation(const std::vector<env::WeightedHistory>& histories);
  static MemoryMap random(int n_histories, int n_cells, Rng& rng);
  // Classes of the given labeling, relabeled by a seeded permutation.
  static MemoryMap from_labels(const std::vector<int>& labels, Rng* shuffle = nullptr);
};

// How an aliased memory cell resolves its common bet.
enum class Resolver {
  CellOptimal,   // q minimizing the cell's weighted average regret (exact; regret is linear in q)
  MajorityVote,  // bet with the weighted majority of member histories
  FixedQ,        // constant q
};

// Which goal family the cells of an evaluation carry.
struct GoalFamily {
  enum Kind { Fair, Threshold } kind = Fair;
  int n_thresholds = 0;  // K for Threshold

  static GoalFamily fair() { return {Fair, 0}; }
  static GoalFamily threshold(int K) { return {Threshold, K}; }
};

// Policy factored through a memory map: q depends on the history only via
// its memory id. Built against a fixed evaluation; queries need valid
// history/test keys and throw ConfigError otherwise.
class MBasedPolicy final : public BranchPolicy {
 public:
  double branch_prob(const goals::GoalValue& value, const CellKey& key) const override;

  const MemoryMap& memory() const { return memory_; }

 private:
  friend MBasedPolicy make_m_based_policy(const MemoryMap&, Resolver, double,
                                          const goals::EvaluationDistribution&,
                                          const goals::EvalTable&, GoalFamily,
                                          const std::vector<double>*);
  MemoryMap memory_;
  int n_tests = 0;
  int slots_per_test = 1;
  std::vector<double> q_table;  // [memory][test][threshold slot]
};

// Fits per-(memory, test[, threshold]) bets under the resolver. History
// weights default to the evaluation's; pass pair-induced weights when the
// target is a pair-averaged regret.
MBasedPolicy make_m_based_policy(const MemoryMap& memory, Resolver resolver, double fixed_q,
                                 const goals::EvaluationDistribution& eval,
                                 const goals::EvalTable& table, GoalFamily family,
                                 const std::vector<double>* history_weights = nullptr);

struct RegretProfile {
  std::vector<double> cells;  // flattened per-cell regrets
  double average = 0.0;
  std::optional<double> pair_average;  // when the evaluation carries pairs
};

// Exact per-cell regrets and weighted averages over (histories x tests
// [x thresholds]); the pair average follows the evaluation's pair weights.
RegretProfile regret_profile(const BranchPolicy& policy, const goals::EvaluationDistribution& eval,
                             const goals::EvalTable& table, GoalFamily family);

// Regret over the composite-goal family: uniform cells (s, a, s', k) for
// k = 0..n.
RegretProfile regret_profile_mdp(const BranchPolicy& policy, const env::FiniteMDP& mdp, int n);

}  // namespace betlab::agents
