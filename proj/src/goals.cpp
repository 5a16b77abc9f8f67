#include "betlab/goals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "betlab/errors.hpp"

namespace betlab::goals {

void Test::normalize() {
  std::sort(event.begin(), event.end());
  event.erase(std::unique(event.begin(), event.end()), event.end());
}

GoalValue make_goal_value(double u1, double u2) {
  GoalValue v;
  v.u_branch1 = u1;
  v.u_branch2 = u2;
  v.v_star = std::max(u1, u2);
  v.margin = std::abs(u1 - u2) / 2.0;
  return v;
}

GoalValue composite_goal_value(const env::FiniteMDP& mdp, const CompositeGoal& g) {
  if (g.n < 1 || g.k < 0 || g.k > g.n) {
    throw std::invalid_argument("composite goal requires n >= 1 and 0 <= k <= n");
  }
  if (g.s < 0 || g.s >= mdp.n_states || g.s_next < 0 || g.s_next >= mdp.n_states || g.a < 0 ||
      g.a >= mdp.n_actions) {
    throw std::invalid_argument("composite goal indices out of range");
  }
  const auto report = env::validate(mdp);
  if (!report.ok() || !report.communicating.value_or(false)) {
    throw std::invalid_argument(
        "composite goals need a valid communicating environment (attempt times must be finite)");
  }
  const double f = numerics::binom_cdf(g.n, mdp.p(g.s, g.a, g.s_next), g.k);
  return make_goal_value(f, 1.0 - f);
}

double test_probability(const env::FinitePOMDP& pomdp, const env::Belief& belief, const Test& t) {
  const int k = t.depth();
  for (const auto& w : t.event) {
    if (static_cast<int>(w.size()) != k) {
      throw std::invalid_argument("event member length differs from the action sequence");
    }
  }
  double total = 0.0;
  std::vector<double> v(pomdp.n_latent), next(pomdp.n_latent);
  for (const auto& w : t.event) {
    v = belief.weights;
    for (int j = 0; j < k; ++j) {
      const int a = t.actions[j];
      const int o = w[j];
      std::fill(next.begin(), next.end(), 0.0);
      for (int x = 0; x < pomdp.n_latent; ++x) {
        if (v[x] == 0.0) continue;
        for (int x2 = 0; x2 < pomdp.n_latent; ++x2) {
          next[x2] += v[x] * pomdp.t(x, a, x2);
        }
      }
      for (int x2 = 0; x2 < pomdp.n_latent; ++x2) next[x2] *= pomdp.z(x2, o);
      v.swap(next);
    }
    for (double m : v) total += m;
  }
  return std::min(total, 1.0);
}

double test_probability(const env::FinitePOMDP& pomdp, const env::History& h, const Test& t) {
  return test_probability(pomdp, env::filter_belief(pomdp, h), t);
}

GoalValue fair_goal_value(double p_t) {
  if (!(p_t >= 0.0 && p_t <= 1.0)) throw std::invalid_argument("p_t must lie in [0,1]");
  return make_goal_value(p_t, 1.0 - p_t);
}

GoalValue threshold_goal_value(double p_t, double lambda) {
  if (!(p_t >= 0.0 && p_t <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("p_t and lambda must lie in [0,1]");
  }
  return make_goal_value(p_t, lambda);
}

std::vector<double> threshold_grid(int K) {
  if (K < 1) throw std::invalid_argument("threshold grid needs K >= 1");
  std::vector<double> grid(K);
  for (int k = 1; k <= K; ++k) grid[k - 1] = (k - 0.5) / K;
  return grid;
}

namespace {

void append_sequences(int n_obs, int depth, std::vector<std::vector<int>>& out) {
  std::vector<int> cur(depth, 0);
  while (true) {
    out.push_back(cur);
    int j = depth - 1;
    while (j >= 0 && cur[j] == n_obs - 1) {
      cur[j] = 0;
      --j;
    }
    if (j < 0) break;
    ++cur[j];
  }
}

bool test_less(const Test& a, const Test& b) {
  if (a.actions != b.actions) return a.actions < b.actions;
  return a.event < b.event;
}

}  // namespace

std::vector<WeightedTest> enumerate_tests(int n_actions, int n_obs, const TestFamilyConfig& cfg) {
  if (cfg.max_depth < 1 || cfg.max_depth > kDefaultDepthCap) {
    throw std::invalid_argument("test depth must lie in [1, depth cap]");
  }
  std::vector<Test> tests;
  for (int depth = 1; depth <= cfg.max_depth; ++depth) {
    std::vector<std::vector<int>> action_seqs;
    append_sequences(n_actions, depth, action_seqs);
    std::vector<std::vector<int>> obs_seqs;
    append_sequences(n_obs, depth, obs_seqs);

    for (const auto& alpha : action_seqs) {
      if (cfg.singletons) {
        for (const auto& w : obs_seqs) tests.push_back({alpha, {w}});
      }
      if (cfg.complements && obs_seqs.size() > 1) {
        for (const auto& w : obs_seqs) {
          Test t{alpha, {}};
          for (const auto& other : obs_seqs) {
            if (other != w) t.event.push_back(other);
          }
          tests.push_back(std::move(t));
        }
      }
      if (cfg.prefix_cylinders && depth >= 2 && n_obs > 1) {
        for (int o = 0; o < n_obs; ++o) {
          Test t{alpha, {}};
          for (const auto& w : obs_seqs) {
            if (w[0] == o) t.event.push_back(w);
          }
          tests.push_back(std::move(t));
        }
      }
      if (static_cast<long>(tests.size()) > cfg.max_tests) {
        throw ResourceLimitError("test universe exceeds max_tests = " + std::to_string(cfg.max_tests));
      }
    }
  }
  for (auto& t : tests) t.normalize();
  std::sort(tests.begin(), tests.end(), test_less);
  tests.erase(std::unique(tests.begin(), tests.end()), tests.end());

  std::vector<WeightedTest> out;
  out.reserve(tests.size());
  const double w = 1.0 / static_cast<double>(tests.size());
  for (auto& t : tests) out.push_back({std::move(t), w});
  return out;
}

EvaluationDistribution build_evaluation(const env::FinitePOMDP& pomdp, int history_length,
                                        const TestFamilyConfig& cfg, bool with_pairs) {
  EvaluationDistribution eval;
  eval.histories = env::enumerate_histories(pomdp, history_length);
  eval.tests = enumerate_tests(pomdp.n_actions, pomdp.n_obs, cfg);
  if (with_pairs) eval.pairs = env::pairs_same_last_obs(eval.histories);
  return eval;
}

EvalTable build_eval_table(const env::FinitePOMDP& pomdp, const EvaluationDistribution& eval) {
  EvalTable table;
  table.n_hist = static_cast<int>(eval.histories.size());
  table.n_tests = static_cast<int>(eval.tests.size());
  table.p.resize(static_cast<size_t>(table.n_hist) * table.n_tests);
  for (int i = 0; i < table.n_hist; ++i) {
    const auto belief = env::filter_belief(pomdp, eval.histories[i].history);
    for (int j = 0; j < table.n_tests; ++j) {
      table.p[static_cast<size_t>(i) * table.n_tests + j] =
          test_probability(pomdp, belief, eval.tests[j].test);
    }
  }
  return table;
}

std::vector<int> witness_tests(const env::FinitePOMDP& pomdp, const env::History& h,
                               const env::History& h_prime, double gamma,
                               const std::vector<WeightedTest>& universe) {
  const auto b = env::filter_belief(pomdp, h);
  const auto b2 = env::filter_belief(pomdp, h_prime);
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(universe.size()); ++j) {
    const double p_high = test_probability(pomdp, b, universe[j].test);
    const double p_low = test_probability(pomdp, b2, universe[j].test);
    if (p_high >= 0.5 + gamma && p_low <= 0.5 - gamma) out.push_back(j);
  }
  return out;
}

nlohmann::json to_json(const Test& t) {
  return {{"actions", t.actions}, {"event", t.event}};
}

nlohmann::json to_json(const std::vector<WeightedTest>& universe) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& wt : universe) {
    auto j = to_json(wt.test);
    j["weight"] = wt.weight;
    out.push_back(std::move(j));
  }
  return out;
}

Test test_from_json(const nlohmann::json& j) {
  Test t{j.at("actions").get<std::vector<int>>(),
         j.at("event").get<std::vector<std::vector<int>>>()};
  t.normalize();
  for (const auto& w : t.event) {
    if (w.size() != t.actions.size()) {
      throw std::invalid_argument("event member length differs from the action sequence");
    }
  }
  return t;
}

std::vector<WeightedTest> universe_from_json(const nlohmann::json& j) {
  std::vector<WeightedTest> out;
  out.reserve(j.size());
  for (const auto& item : j) {
    out.push_back({test_from_json(item), item.value("weight", 0.0)});
  }
  return out;
}

Test compose_test(int action, int obs, const Test& t, int depth_cap) {
  if (t.depth() + 1 > depth_cap) {
    throw ResourceLimitError("composed test depth exceeds cap " + std::to_string(depth_cap));
  }
  Test out;
  out.actions.reserve(t.actions.size() + 1);
  out.actions.push_back(action);
  out.actions.insert(out.actions.end(), t.actions.begin(), t.actions.end());
  out.event.reserve(t.event.size());
  for (const auto& w : t.event) {
    std::vector<int> seq;
    seq.reserve(w.size() + 1);
    seq.push_back(obs);
    seq.insert(seq.end(), w.begin(), w.end());
    out.event.push_back(std::move(seq));
  }
  out.normalize();
  return out;
}

}  // namespace betlab::goals
