#include "betlab/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "betlab/errors.hpp"

namespace betlab::agents {

NoisyPolicy::NoisyPolicy(double epsilon, std::shared_ptr<const BranchPolicy> base)
    : epsilon_(epsilon), base_(std::move(base)) {
  if (!(epsilon_ >= 0.0 && epsilon_ <= 1.0)) {
    throw std::invalid_argument("noise level must lie in [0,1]");
  }
  if (!base_) throw std::invalid_argument("noisy policy needs a base policy");
}

double NoisyPolicy::branch_prob(const goals::GoalValue& value, const CellKey& key) const {
  const double q = base_->branch_prob(value, key);
  return (1.0 - epsilon_) * q + epsilon_ * (1.0 - q);
}

NoisyPolicy noisy_optimal(double epsilon) {
  return NoisyPolicy(epsilon, std::make_shared<OptimalPolicy>());
}

MemoryMap MemoryMap::identity(int n_histories) {
  MemoryMap m;
  m.memory_id.resize(n_histories);
  for (int i = 0; i < n_histories; ++i) m.memory_id[i] = i;
  m.n_memories = n_histories;
  return m;
}

MemoryMap MemoryMap::constant(int n_histories) {
  MemoryMap m;
  m.memory_id.assign(n_histories, 0);
  m.n_memories = n_histories > 0 ? 1 : 0;
  return m;
}

MemoryMap MemoryMap::last_observation(const std::vector<env::WeightedHistory>& histories) {
  std::vector<int> labels;
  labels.reserve(histories.size());
  for (const auto& wh : histories) labels.push_back(wh.history.last_obs());
  return from_labels(labels);
}

MemoryMap MemoryMap::random(int n_histories, int n_cells, Rng& rng) {
  if (n_cells < 1) throw std::invalid_argument("memory needs at least one cell");
  MemoryMap m;
  m.memory_id.resize(n_histories);
  for (auto& id : m.memory_id) id = rng.uniform_int(0, n_cells - 1);
  m.n_memories = n_cells;
  return m;
}

MemoryMap MemoryMap::from_labels(const std::vector<int>& labels, Rng* shuffle) {
  // Compress labels to 0..n-1 in first-appearance order.
  MemoryMap m;
  m.memory_id.resize(labels.size());
  std::vector<int> seen;
  for (size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(seen.begin(), seen.end(), labels[i]);
    if (it == seen.end()) {
      seen.push_back(labels[i]);
      m.memory_id[i] = static_cast<int>(seen.size()) - 1;
    } else {
      m.memory_id[i] = static_cast<int>(it - seen.begin());
    }
  }
  m.n_memories = static_cast<int>(seen.size());
  if (shuffle && m.n_memories > 1) {
    std::vector<int> perm(m.n_memories);
    for (int i = 0; i < m.n_memories; ++i) perm[i] = i;
    for (int i = m.n_memories - 1; i > 0; --i) {
      std::swap(perm[i], perm[shuffle->uniform_int(0, i)]);
    }
    for (auto& id : m.memory_id) id = perm[id];
  }
  return m;
}

namespace {

goals::GoalValue cell_value(const goals::EvalTable& table, GoalFamily family, int h, int t,
                            int slot) {
  const double p = table.at(h, t);
  if (family.kind == GoalFamily::Fair) return goals::fair_goal_value(p);
  const double lambda = (slot + 0.5) / family.n_thresholds;
  return goals::threshold_goal_value(p, lambda);
}

}  // namespace

double MBasedPolicy::branch_prob(const goals::GoalValue&, const CellKey& key) const {
  if (key.history < 0 || key.history >= static_cast<int>(memory_.memory_id.size())) {
    throw ConfigError("memory-based policy queried without a resolvable history id");
  }
  if (key.test < 0 || key.test >= n_tests) {
    throw ConfigError("memory-based policy queried without a resolvable test id");
  }
  const int slot = slots_per_test == 1 ? 0 : key.threshold;
  if (slot < 0 || slot >= slots_per_test) {
    throw ConfigError("memory-based policy queried without a resolvable threshold id");
  }
  const int mem = memory_.memory_id[key.history];
  return q_table[(static_cast<size_t>(mem) * n_tests + key.test) * slots_per_test + slot];
}

MBasedPolicy make_m_based_policy(const MemoryMap& memory, Resolver resolver, double fixed_q,
                                 const goals::EvaluationDistribution& eval,
                                 const goals::EvalTable& table, GoalFamily family,
                                 const std::vector<double>* history_weights) {
  const int n_hist = static_cast<int>(eval.histories.size());
  if (static_cast<int>(memory.memory_id.size()) != n_hist) {
    throw ConfigError("memory map does not cover the evaluation's histories");
  }
  if (family.kind == GoalFamily::Threshold && family.n_thresholds < 1) {
    throw ConfigError("threshold family needs K >= 1");
  }
  std::vector<double> weights;
  if (history_weights) {
    weights = *history_weights;
  } else {
    weights.reserve(n_hist);
    for (const auto& wh : eval.histories) weights.push_back(wh.weight);
  }
  if (static_cast<int>(weights.size()) != n_hist) {
    throw ConfigError("history weight vector does not match the evaluation");
  }

  MBasedPolicy policy;
  policy.memory_ = memory;
  policy.n_tests = static_cast<int>(eval.tests.size());
  policy.slots_per_test = family.kind == GoalFamily::Threshold ? family.n_thresholds : 1;
  policy.q_table.assign(
      static_cast<size_t>(memory.n_memories) * policy.n_tests * policy.slots_per_test, 1.0);

  for (int mem = 0; mem < memory.n_memories; ++mem) {
    for (int t = 0; t < policy.n_tests; ++t) {
      for (int slot = 0; slot < policy.slots_per_test; ++slot) {
        double q = 1.0;
        switch (resolver) {
          case Resolver::FixedQ:
            q = fixed_q;
            break;
          case Resolver::MajorityVote: {
            double mass_b1 = 0.0, mass_b2 = 0.0;
            for (int h = 0; h < n_hist; ++h) {
              if (memory.memory_id[h] != mem || weights[h] <= 0.0) continue;
              const auto v = cell_value(table, family, h, t, slot);
              (v.u_branch1 >= v.u_branch2 ? mass_b1 : mass_b2) += weights[h];
            }
            q = mass_b1 >= mass_b2 ? 1.0 : 0.0;
            break;
          }
          case Resolver::CellOptimal: {
            // Regret is linear in q, so the cell optimum sits at an endpoint.
            double regret_q0 = 0.0, regret_q1 = 0.0;
            for (int h = 0; h < n_hist; ++h) {
              if (memory.memory_id[h] != mem || weights[h] <= 0.0) continue;
              const auto v = cell_value(table, family, h, t, slot);
              regret_q0 += weights[h] * numerics::bet_regret(v.u_branch1, v.u_branch2, 0.0).regret;
              regret_q1 += weights[h] * numerics::bet_regret(v.u_branch1, v.u_branch2, 1.0).regret;
            }
            q = regret_q1 <= regret_q0 ? 1.0 : 0.0;
            break;
          }
        }
        policy.q_table[(static_cast<size_t>(mem) * policy.n_tests + t) * policy.slots_per_test +
                       slot] = q;
      }
    }
  }
  return policy;
}

RegretProfile regret_profile(const BranchPolicy& policy, const goals::EvaluationDistribution& eval,
                             const goals::EvalTable& table, GoalFamily family) {
  const int n_hist = static_cast<int>(eval.histories.size());
  const int n_tests = static_cast<int>(eval.tests.size());
  const int slots = family.kind == GoalFamily::Threshold ? family.n_thresholds : 1;

  RegretProfile profile;
  profile.cells.resize(static_cast<size_t>(n_hist) * n_tests * slots);

  // delta[h] = E_{T ~ D}[regret at h] (threshold families average the grid).
  std::vector<double> delta_h(n_hist, 0.0);
  for (int h = 0; h < n_hist; ++h) {
    for (int t = 0; t < n_tests; ++t) {
      double cell_sum = 0.0;
      for (int slot = 0; slot < slots; ++slot) {
        const auto v = cell_value(table, family, h, t, slot);
        const double q = policy.branch_prob(v, CellKey{h, t, slots == 1 ? -1 : slot});
        const double regret = numerics::bet_regret(v.u_branch1, v.u_branch2, q).regret;
        profile.cells[(static_cast<size_t>(h) * n_tests + t) * slots + slot] = regret;
        cell_sum += regret;
      }
      delta_h[h] += eval.tests[t].weight * cell_sum / slots;
    }
  }

  profile.average = 0.0;
  for (int h = 0; h < n_hist; ++h) profile.average += eval.histories[h].weight * delta_h[h];

  if (!eval.pairs.empty()) {
    double pair_avg = 0.0;
    for (const auto& pr : eval.pairs) {
      pair_avg += pr.weight * 0.5 * (delta_h[pr.first] + delta_h[pr.second]);
    }
    profile.pair_average = pair_avg;
  }
  return profile;
}

RegretProfile regret_profile_mdp(const BranchPolicy& policy, const env::FiniteMDP& mdp, int n) {
  if (n < 1) throw std::invalid_argument("composite-goal depth n must be >= 1");
  RegretProfile profile;
  const size_t n_cells =
      static_cast<size_t>(mdp.n_states) * mdp.n_actions * mdp.n_states * (n + 1);
  profile.cells.reserve(n_cells);
  double total = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.p(s, a, s2);
        double cdf = 0.0;
        for (int k = 0; k <= n; ++k) {
          cdf = k == n ? 1.0 : std::min(cdf + numerics::binom_pmf(n, p, k), 1.0);
          const auto v = goals::make_goal_value(cdf, 1.0 - cdf);
          const double q = policy.branch_prob(v, CellKey{});
          const double regret = numerics::bet_regret(v.u_branch1, v.u_branch2, q).regret;
          profile.cells.push_back(regret);
          total += regret;
        }
      }
    }
  }
  profile.average = total / static_cast<double>(n_cells);
  return profile;
}

}  // namespace betlab::agents
