#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "betlab/agents.hpp"
#include "betlab/estimators.hpp"

namespace betlab::verifier {

// Arithmetic slop allowed when certifying lhs <= rhs.
inline constexpr double kSlackTol = 1e-9;

struct InputsDigest {
  uint64_t seed = 0;
  std::optional<double> gamma;
  std::optional<int> n;
  std::optional<int> K;
  std::optional<double> epsilon;
  std::string env_tag;
};

// One certified inequality: lhs computed from simulation, rhs from the
// bound's formula with explicit constants.
struct BoundReport {
  std::string theorem;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;        // rhs - lhs
  bool satisfied = false;    // lhs <= rhs + kSlackTol
  bool vacuous = false;      // rhs can never bite (or the check had no mass)
  InputsDigest inputs;
  std::vector<std::string> flags;  // violated assumptions; dirty for the exit code
  std::vector<std::string> notes;  // informational only
};

BoundReport make_report(std::string theorem, double lhs, double rhs, InputsDigest inputs,
                        bool vacuous = false);

// Measured mass of informative cells under (H, D):
//   q_gamma = P(margin >= gamma), eta = P(p >= 1/2 + gamma),
//   eta_prime = P(p <= 1/2 - gamma).
struct Nondegeneracy {
  double q_gamma = 0.0;
  double eta = 0.0;
  double eta_prime = 0.0;
};

Nondegeneracy measure_nondegeneracy(const goals::EvaluationDistribution& eval,
                                    const goals::EvalTable& table, double gamma);

// Per-history labeling of every test: +1 confidently L, -1 confidently R,
// 0 undecided at margin gamma. class_id groups histories with identical rows.
struct DecisionProfile {
  int n_hist = 0;
  int n_tests = 0;
  std::vector<int8_t> entries;
  std::vector<int> class_id;
  int n_classes = 0;

  int8_t at(int h, int t) const { return entries[static_cast<size_t>(h) * n_tests + t]; }
};

DecisionProfile decision_profile(const goals::EvalTable& table, double gamma);

// ---- Fully observed ------------------------------------------------------

// Mean absolute transition error vs
//   2 t_gamma E[sqrt(p(1-p)/n)] + ((n+1)/n) delta_bar / c(gamma) + 7/(2n),
// where delta_bar is the measured average regret over the composite cells.
BoundReport verify_thm1(const env::FiniteMDP& mdp, const agents::BranchPolicy& policy, int n,
                        double gamma, InputsDigest inputs = {});

// Same pipeline against a synthetic do-kernel within entrywise budget
// eps_cmp of the kernel; rhs gains + eps_cmp. The perturbation is seeded;
// adversarial mode saturates the budget where feasible.
BoundReport verify_cor1(const env::FiniteMDP& mdp, const agents::BranchPolicy& policy, int n,
                        double gamma, double eps_cmp, uint64_t perturb_seed, bool adversarial,
                        InputsDigest inputs = {});

// Counterexample: interventional kernels of the structural pair coincide
// while a counterfactual cell differs. lhs = kernel gap + (1 - counterfactual
// gap), rhs = 0; both gaps are recorded in the notes.
BoundReport verify_cor2(InputsDigest inputs = {});

// ---- Partially observed --------------------------------------------------

// E[wrong mass restricted to margin >= gamma] <= delta_bar / c(gamma),
// plus the conditional form when q_gamma > 0. Returns {main, conditional?}.
std::vector<BoundReport> verify_thm4(const env::FinitePOMDP& pomdp,
                                     const agents::BranchPolicy& policy,
                                     const goals::EvaluationDistribution& eval, double gamma,
                                     InputsDigest inputs = {});

// Counterexample: on the prop1 pair every fair bet is identical across
// environments while the largest predictive-state gap equals |p - q|.
// lhs = bet mismatches + |max gap - |p - q||, rhs = 0.
BoundReport verify_prop1(double p, double q, int depth, InputsDigest inputs = {});

// E[(p_hat - p)^2] <= 2 delta_bar_K + 1/(4 K^2) over the evaluation.
BoundReport verify_thm5(const env::FinitePOMDP& pomdp, const agents::BranchPolicy& policy,
                        const goals::EvaluationDistribution& eval, int K,
                        InputsDigest inputs = {});

struct Thm6Result {
  std::vector<BoundReport> reports;  // "thm6_sy" and, when recovered, "thm6_b"
  estimators::PsrOperators ops;
  estimators::PsrTruth truth;
  double linear_update_violation = 0.0;
  double delta_bar_k = 0.0;
  double epsilon_k = 0.0;
};

// Builds the exact predictive system on the given core tests/histories,
// validates the linear-update assumption on every enumerated history up to
// check_length, estimates the system from threshold bets, and checks the
// matrix bounds. The invertibility gate decides whether operators are
// recovered.
Thm6Result verify_thm6(const env::FinitePOMDP& pomdp, const std::vector<goals::Test>& tests,
                       const std::vector<env::History>& histories,
                       const agents::BranchPolicy& policy, int K, int check_length = 2,
                       InputsDigest inputs = {});

// Aliasing lower bound: q_alias * c(gamma) / 2 <= pair-averaged regret of
// the resolver-optimal memory-based policy.
BoundReport verify_thm7(const env::FinitePOMDP& pomdp, const agents::MemoryMap& memory,
                        agents::Resolver resolver, double fixed_q,
                        const goals::EvaluationDistribution& eval, double gamma,
                        InputsDigest inputs = {});

// Per-block alias bound q_alias_i <= 2 delta_bar_P / (p_i c(gamma)) for a
// disjoint partition of the test universe (one report per block; zero-mass
// blocks are excluded).
std::vector<BoundReport> verify_cor3(const env::FinitePOMDP& pomdp,
                                     const std::vector<std::vector<int>>& blocks,
                                     const agents::MemoryMap& memory, agents::Resolver resolver,
                                     double fixed_q, const goals::EvaluationDistribution& eval,
                                     double gamma, InputsDigest inputs = {});

// Regime-mismatch bound: P(aliased, regimes differ, test straddles)
// <= 2 delta_bar_P / c(gamma). Requires regime labels on the evaluation;
// vacuous when mismatched pairs carry no mass.
BoundReport verify_cor4(const env::FinitePOMDP& pomdp, const agents::MemoryMap& memory,
                        agents::Resolver resolver, double fixed_q,
                        const goals::EvaluationDistribution& eval, double gamma,
                        InputsDigest inputs = {});

struct Cor5Result {
  BoundReport report;
  DecisionProfile profile;
  agents::MemoryMap memory_one;
  agents::MemoryMap memory_two;
  std::vector<int> phi;  // memory_two id -> memory_one id on the support
  std::vector<int> psi;  // inverse direction
  std::vector<std::pair<int, int>> incomplete_pairs;  // gamma-completeness failures
};

// Builds the gamma-coarsened decision profile, relabels its partition into
// two minimal memories, checks gamma-completeness on the pair support, and
// certifies the partitions equal via explicit mutually inverse maps.
Cor5Result verify_cor5(const env::FinitePOMDP& pomdp, const goals::EvaluationDistribution& eval,
                       double gamma, uint64_t relabel_seed, InputsDigest inputs = {});

}  // namespace betlab::verifier
