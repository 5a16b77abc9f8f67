#include "betlab/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "betlab/errors.hpp"

namespace betlab::env {

namespace {

bool row_stochastic(const double* row, int n, std::string* msg, const std::string& label) {
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (row[i] < 0.0 || row[i] > 1.0) {
      if (msg) *msg = label + " has an entry outside [0,1]";
      return false;
    }
    sum += row[i];
  }
  if (std::abs(sum - 1.0) > kRowSumTol) {
    if (msg) *msg = label + " sums to " + std::to_string(sum);
    return false;
  }
  return true;
}

bool strongly_connected(const FiniteMDP& mdp) {
  const int n = mdp.n_states;
  // Edge s -> s' iff some action moves there with positive probability.
  auto reaches_all = [&](int start) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      int s = stack.back();
      stack.pop_back();
      for (int s2 = 0; s2 < n; ++s2) {
        if (seen[s2]) continue;
        for (int a = 0; a < mdp.n_actions; ++a) {
          if (mdp.p(s, a, s2) > 0.0) {
            seen[s2] = 1;
            stack.push_back(s2);
            break;
          }
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  for (int s = 0; s < n; ++s) {
    if (!reaches_all(s)) return false;
  }
  return true;
}

}  // namespace

ValidationReport validate(const FiniteMDP& mdp) {
  ValidationReport report;
  std::string msg;
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (!row_stochastic(&mdp.kernel[(s * mdp.n_actions + a) * mdp.n_states], mdp.n_states, &msg,
                          "kernel row (s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")")) {
        report.stochastic_ok = false;
        report.failures.push_back(msg);
      }
    }
  }
  if (!row_stochastic(mdp.initial.data(), mdp.n_states, &msg, "initial distribution")) {
    report.stochastic_ok = false;
    report.failures.push_back(msg);
  }

  report.action_dependent = false;
  for (int s = 0; s < mdp.n_states && !report.action_dependent; ++s) {
    for (int a = 0; a < mdp.n_actions && !report.action_dependent; ++a) {
      for (int a2 = a + 1; a2 < mdp.n_actions && !report.action_dependent; ++a2) {
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          if (mdp.p(s, a, s2) != mdp.p(s, a2, s2)) {
            report.action_dependent = true;
            break;
          }
        }
      }
    }
  }
  if (!report.action_dependent) {
    report.warnings.push_back("no action-dependence witness: kernel identical across actions");
  }
  if (report.stochastic_ok) {
    report.communicating = strongly_connected(mdp);
    if (!*report.communicating) {
      report.warnings.push_back("environment is not communicating");
    }
  }
  return report;
}

ValidationReport validate(const FinitePOMDP& pomdp) {
  ValidationReport report;
  std::string msg;
  for (int x = 0; x < pomdp.n_latent; ++x) {
    for (int a = 0; a < pomdp.n_actions; ++a) {
      if (!row_stochastic(&pomdp.transition[(x * pomdp.n_actions + a) * pomdp.n_latent],
                          pomdp.n_latent, &msg,
                          "transition row (x=" + std::to_string(x) + ",a=" + std::to_string(a) + ")")) {
        report.stochastic_ok = false;
        report.failures.push_back(msg);
      }
    }
    if (!row_stochastic(&pomdp.observation[x * pomdp.n_obs], pomdp.n_obs, &msg,
                        "observation row (x=" + std::to_string(x) + ")")) {
      report.stochastic_ok = false;
      report.failures.push_back(msg);
    }
  }
  if (!row_stochastic(pomdp.initial.data(), pomdp.n_latent, &msg, "initial distribution")) {
    report.stochastic_ok = false;
    report.failures.push_back(msg);
  }

  report.action_dependent = false;
  for (int x = 0; x < pomdp.n_latent && !report.action_dependent; ++x) {
    for (int a = 0; a < pomdp.n_actions && !report.action_dependent; ++a) {
      for (int a2 = a + 1; a2 < pomdp.n_actions && !report.action_dependent; ++a2) {
        for (int x2 = 0; x2 < pomdp.n_latent; ++x2) {
          if (pomdp.t(x, a, x2) != pomdp.t(x, a2, x2)) {
            report.action_dependent = true;
            break;
          }
        }
      }
    }
  }
  if (!report.action_dependent) {
    report.warnings.push_back("no action-dependence witness: dynamics identical across actions");
  }
  return report;
}

namespace {

// Unnormalized forward weights alpha(x) = P(h, X_t = x), with actions
// conditioned on (no reference-rule factor).
std::vector<double> forward_weights(const FinitePOMDP& pomdp, const History& h) {
  if (h.observations.size() != h.actions.size() + 1) {
    throw std::invalid_argument("history must carry one more observation than actions");
  }
  std::vector<double> alpha(pomdp.n_latent);
  for (int x = 0; x < pomdp.n_latent; ++x) {
    alpha[x] = pomdp.initial[x] * pomdp.z(x, h.observations[0]);
  }
  std::vector<double> next(pomdp.n_latent);
  for (size_t i = 0; i < h.actions.size(); ++i) {
    const int a = h.actions[i];
    const int o = h.observations[i + 1];
    std::fill(next.begin(), next.end(), 0.0);
    for (int x = 0; x < pomdp.n_latent; ++x) {
      if (alpha[x] == 0.0) continue;
      for (int x2 = 0; x2 < pomdp.n_latent; ++x2) {
        next[x2] += alpha[x] * pomdp.t(x, a, x2);
      }
    }
    for (int x2 = 0; x2 < pomdp.n_latent; ++x2) next[x2] *= pomdp.z(x2, o);
    alpha.swap(next);
  }
  return alpha;
}

}  // namespace

double history_probability(const FinitePOMDP& pomdp, const History& h) {
  const auto alpha = forward_weights(pomdp, h);
  double mass = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  double action_factor = std::pow(1.0 / pomdp.n_actions, static_cast<double>(h.actions.size()));
  return mass * action_factor;
}

Belief filter_belief(const FinitePOMDP& pomdp, const History& h) {
  auto alpha = forward_weights(pomdp, h);
  double mass = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  if (mass <= 0.0) {
    throw ConditioningError("cannot condition on a zero-probability history");
  }
  for (auto& v : alpha) v /= mass;
  return Belief{std::move(alpha)};
}

std::vector<WeightedHistory> enumerate_histories(const FinitePOMDP& pomdp, int length, int cap) {
  if (length < 0) throw std::invalid_argument("history length must be nonnegative");
  if (length > cap) {
    throw ResourceLimitError("history length " + std::to_string(length) + " exceeds cap " +
                             std::to_string(cap));
  }

  struct Node {
    History h;
    std::vector<double> alpha;  // includes reference-action factors
  };
  std::vector<Node> level;
  for (int o = 0; o < pomdp.n_obs; ++o) {
    std::vector<double> alpha(pomdp.n_latent);
    double mass = 0.0;
    for (int x = 0; x < pomdp.n_latent; ++x) {
      alpha[x] = pomdp.initial[x] * pomdp.z(x, o);
      mass += alpha[x];
    }
    if (mass > 0.0) level.push_back({History{{o}, {}}, std::move(alpha)});
  }

  const double action_weight = 1.0 / pomdp.n_actions;
  for (int step = 0; step < length; ++step) {
    std::vector<Node> next_level;
    for (const auto& node : level) {
      for (int a = 0; a < pomdp.n_actions; ++a) {
        std::vector<double> pushed(pomdp.n_latent, 0.0);
        for (int x = 0; x < pomdp.n_latent; ++x) {
          if (node.alpha[x] == 0.0) continue;
          for (int x2 = 0; x2 < pomdp.n_latent; ++x2) {
            pushed[x2] += node.alpha[x] * pomdp.t(x, a, x2);
          }
        }
        for (int o = 0; o < pomdp.n_obs; ++o) {
          std::vector<double> alpha(pomdp.n_latent);
          double mass = 0.0;
          for (int x2 = 0; x2 < pomdp.n_latent; ++x2) {
            alpha[x2] = pushed[x2] * pomdp.z(x2, o) * action_weight;
            mass += alpha[x2];
          }
          if (mass <= 0.0) continue;
          Node child;
          child.h = node.h;
          child.h.actions.push_back(a);
          child.h.observations.push_back(o);
          child.alpha = std::move(alpha);
          next_level.push_back(std::move(child));
        }
      }
    }
    level.swap(next_level);
  }

  std::vector<WeightedHistory> out;
  out.reserve(level.size());
  for (auto& node : level) {
    double mass = std::accumulate(node.alpha.begin(), node.alpha.end(), 0.0);
    out.push_back({std::move(node.h), mass});
  }
  return out;
}

std::vector<WeightedPair> pairs_same_last_obs(const std::vector<WeightedHistory>& histories) {
  // Class mass per last observation.
  std::vector<double> class_mass;
  for (const auto& wh : histories) {
    int o = wh.history.last_obs();
    if (o >= static_cast<int>(class_mass.size())) class_mass.resize(o + 1, 0.0);
    class_mass[o] += wh.weight;
  }
  std::vector<WeightedPair> pairs;
  for (int i = 0; i < static_cast<int>(histories.size()); ++i) {
    const int o = histories[i].history.last_obs();
    if (class_mass[o] <= 0.0) continue;
    for (int j = 0; j < static_cast<int>(histories.size()); ++j) {
      if (histories[j].history.last_obs() != o) continue;
      double w = histories[i].weight * histories[j].weight / class_mass[o];
      if (w > 0.0) pairs.push_back({i, j, w});
    }
  }
  return pairs;
}

FiniteMDP random_mdp(int n_states, int n_actions, Rng& rng) {
  if (n_states < 1 || n_actions < 2) {
    throw std::invalid_argument("random_mdp requires n_states >= 1 and n_actions >= 2");
  }
  FiniteMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.kernel.resize(static_cast<size_t>(n_states) * n_actions * n_states);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      auto row = rng.dirichlet(n_states);
      for (int s2 = 0; s2 < n_states; ++s2) mdp.p(s, a, s2) = row[s2];
    }
  }
  mdp.initial = rng.dirichlet(n_states);
  return mdp;
}

FinitePOMDP random_pomdp(int n_latent, int n_actions, int n_obs, Rng& rng) {
  if (n_latent < 1 || n_actions < 2 || n_obs < 2) {
    throw std::invalid_argument("random_pomdp requires n_latent >= 1, n_actions >= 2, n_obs >= 2");
  }
  FinitePOMDP pomdp;
  pomdp.n_latent = n_latent;
  pomdp.n_actions = n_actions;
  pomdp.n_obs = n_obs;
  pomdp.transition.resize(static_cast<size_t>(n_latent) * n_actions * n_latent);
  pomdp.observation.resize(static_cast<size_t>(n_latent) * n_obs);
  for (int x = 0; x < n_latent; ++x) {
    for (int a = 0; a < n_actions; ++a) {
      auto row = rng.dirichlet(n_latent);
      for (int x2 = 0; x2 < n_latent; ++x2) pomdp.t(x, a, x2) = row[x2];
    }
    auto obs_row = rng.dirichlet(n_obs);
    for (int o = 0; o < n_obs; ++o) pomdp.z(x, o) = obs_row[o];
  }
  pomdp.initial = rng.dirichlet(n_latent);
  return pomdp;
}

FinitePOMDP prop1_env(double r) {
  if (!(r > 0.5 && r < 1.0)) {
    throw std::invalid_argument("prop1_env requires r in (1/2, 1)");
  }
  // Latent: x0, x1, y0, y1. Observations: u=0, "0"=1, "1"=2.
  FinitePOMDP e;
  e.n_latent = 4;
  e.n_actions = 2;
  e.n_obs = 3;
  e.transition.assign(4 * 2 * 4, 0.0);
  e.observation.assign(4 * 3, 0.0);
  e.initial = {r, 1.0 - r, 0.0, 0.0};
  for (int a = 0; a < 2; ++a) {
    e.t(0, a, 2) = 1.0;  // x0 -> y0
    e.t(1, a, 3) = 1.0;  // x1 -> y1
    e.t(2, a, 2) = 1.0;  // y0 absorbing
    e.t(3, a, 3) = 1.0;  // y1 absorbing
  }
  e.z(0, 0) = 1.0;
  e.z(1, 0) = 1.0;
  e.z(2, 1) = 1.0;
  e.z(3, 2) = 1.0;
  return e;
}

std::pair<FinitePOMDP, FinitePOMDP> build_prop1_pair(double p, double q) {
  if (!(p > 0.5 && p < 1.0 && q > 0.5 && q < 1.0)) {
    throw std::invalid_argument("build_prop1_pair requires p, q in (1/2, 1)");
  }
  if (p == q) {
    throw std::invalid_argument("build_prop1_pair requires p != q");
  }
  return {prop1_env(p), prop1_env(q)};
}

FinitePOMDP mirrored_belief_env(double r) {
  if (!(r > 0.5 && r < 1.0)) {
    throw std::invalid_argument("mirrored_belief_env requires r in (1/2, 1)");
  }
  // Latent: m0, m1, x0, x1, y0, y1. Observations: A=0, B=1, u=2, "0"=3, "1"=4.
  FinitePOMDP e;
  e.n_latent = 6;
  e.n_actions = 2;
  e.n_obs = 5;
  e.transition.assign(6 * 2 * 6, 0.0);
  e.observation.assign(6 * 5, 0.0);
  e.initial = {0.5, 0.5, 0.0, 0.0, 0.0, 0.0};
  for (int a = 0; a < 2; ++a) {
    e.t(0, a, 2) = r;        // m0 -> x0
    e.t(0, a, 3) = 1.0 - r;  // m0 -> x1
    e.t(1, a, 2) = 1.0 - r;  // m1 -> x0
    e.t(1, a, 3) = r;        // m1 -> x1
    e.t(2, a, 4) = 1.0;      // x0 -> y0
    e.t(3, a, 5) = 1.0;      // x1 -> y1
    e.t(4, a, 4) = 1.0;
    e.t(5, a, 5) = 1.0;
  }
  e.z(0, 0) = 1.0;  // m0 shows A
  e.z(1, 1) = 1.0;  // m1 shows B
  e.z(2, 2) = 1.0;  // x0 shows u
  e.z(3, 2) = 1.0;  // x1 shows u
  e.z(4, 3) = 1.0;  // y0 shows "0"
  e.z(5, 4) = 1.0;  // y1 shows "1"
  return e;
}

FinitePOMDP psr_dyadic_env() {
  FinitePOMDP e;
  e.n_latent = 2;
  e.n_actions = 2;
  e.n_obs = 2;
  e.transition.assign(2 * 2 * 2, 0.0);
  e.observation.assign(2 * 2, 0.0);
  e.initial = {0.5, 0.5};
  // Action 0 keeps the latent state, action 1 swaps it.
  e.t(0, 0, 0) = 1.0;
  e.t(1, 0, 1) = 1.0;
  e.t(0, 1, 1) = 1.0;
  e.t(1, 1, 0) = 1.0;
  e.z(0, 0) = 0.875;
  e.z(0, 1) = 0.125;
  e.z(1, 0) = 0.125;
  e.z(1, 1) = 0.875;
  return e;
}

double ScmModel::intervention_kernel(int a, int s) const {
  if (a < 0 || a > 1 || s < 0 || s > 1) {
    throw std::invalid_argument("ScmModel indices must be binary");
  }
  double mass = 0.0;
  for (int u = 0; u < 2; ++u) {
    if (next_state[a][u] == s) mass += 0.5;
  }
  return mass;
}

ScmPair build_l3_pair() {
  ScmPair pair;
  for (int a = 0; a < 2; ++a) {
    for (int u = 0; u < 2; ++u) {
      pair.model_one.next_state[a][u] = u;
      pair.model_two.next_state[a][u] = a ^ u;
    }
  }
  return pair;
}

int counterfactual(const ScmModel& model, int observed_a, int observed_s, int alt_a) {
  if (observed_a < 0 || observed_a > 1 || observed_s < 0 || observed_s > 1 || alt_a < 0 ||
      alt_a > 1) {
    throw std::invalid_argument("counterfactual arguments must be binary");
  }
  int outcome = -1;
  for (int u = 0; u < 2; ++u) {
    if (model.next_state[observed_a][u] != observed_s) continue;
    int candidate = model.next_state[alt_a][u];
    if (outcome == -1) {
      outcome = candidate;
    } else if (outcome != candidate) {
      throw AbductionError("evidence leaves the counterfactual outcome ambiguous");
    }
  }
  if (outcome == -1) {
    throw AbductionError("no exogenous noise value is consistent with the evidence");
  }
  return outcome;
}

namespace {

nlohmann::json nested3(const std::vector<double>& flat, int d0, int d1, int d2) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < d0; ++i) {
    nlohmann::json mid = nlohmann::json::array();
    for (int j = 0; j < d1; ++j) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k < d2; ++k) row.push_back(flat[(i * d1 + j) * d2 + k]);
      mid.push_back(std::move(row));
    }
    out.push_back(std::move(mid));
  }
  return out;
}

std::vector<double> flatten3(const nlohmann::json& j, int d0, int d1, int d2, const char* name) {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(d0) * d1 * d2);
  if (static_cast<int>(j.size()) != d0) throw std::invalid_argument(std::string(name) + ": bad shape");
  for (const auto& mid : j) {
    if (static_cast<int>(mid.size()) != d1) throw std::invalid_argument(std::string(name) + ": bad shape");
    for (const auto& row : mid) {
      if (static_cast<int>(row.size()) != d2) throw std::invalid_argument(std::string(name) + ": bad shape");
      for (const auto& v : row) flat.push_back(v.get<double>());
    }
  }
  return flat;
}

}  // namespace

nlohmann::json to_json(const FiniteMDP& mdp) {
  return {
      {"type", "mdp"},
      {"states", mdp.n_states},
      {"actions", mdp.n_actions},
      {"kernel", nested3(mdp.kernel, mdp.n_states, mdp.n_actions, mdp.n_states)},
      {"initial", mdp.initial},
  };
}

nlohmann::json to_json(const FinitePOMDP& pomdp) {
  nlohmann::json obs = nlohmann::json::array();
  for (int x = 0; x < pomdp.n_latent; ++x) {
    nlohmann::json row = nlohmann::json::array();
    for (int o = 0; o < pomdp.n_obs; ++o) row.push_back(pomdp.z(x, o));
    obs.push_back(std::move(row));
  }
  return {
      {"type", "pomdp"},
      {"latent", pomdp.n_latent},
      {"actions", pomdp.n_actions},
      {"obs", pomdp.n_obs},
      {"transition", nested3(pomdp.transition, pomdp.n_latent, pomdp.n_actions, pomdp.n_latent)},
      {"observation", obs},
      {"initial", pomdp.initial},
  };
}

FiniteMDP mdp_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "mdp") throw std::invalid_argument("expected type \"mdp\"");
  FiniteMDP mdp;
  mdp.n_states = j.at("states").get<int>();
  mdp.n_actions = j.at("actions").get<int>();
  mdp.kernel = flatten3(j.at("kernel"), mdp.n_states, mdp.n_actions, mdp.n_states, "kernel");
  mdp.initial = j.at("initial").get<std::vector<double>>();
  if (static_cast<int>(mdp.initial.size()) != mdp.n_states) {
    throw std::invalid_argument("initial: bad shape");
  }
  return mdp;
}

FinitePOMDP pomdp_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "pomdp") throw std::invalid_argument("expected type \"pomdp\"");
  FinitePOMDP pomdp;
  pomdp.n_latent = j.at("latent").get<int>();
  pomdp.n_actions = j.at("actions").get<int>();
  pomdp.n_obs = j.at("obs").get<int>();
  pomdp.transition =
      flatten3(j.at("transition"), pomdp.n_latent, pomdp.n_actions, pomdp.n_latent, "transition");
  const auto& obs = j.at("observation");
  if (static_cast<int>(obs.size()) != pomdp.n_latent) throw std::invalid_argument("observation: bad shape");
  pomdp.observation.reserve(static_cast<size_t>(pomdp.n_latent) * pomdp.n_obs);
  for (const auto& row : obs) {
    if (static_cast<int>(row.size()) != pomdp.n_obs) throw std::invalid_argument("observation: bad shape");
    for (const auto& v : row) pomdp.observation.push_back(v.get<double>());
  }
  pomdp.initial = j.at("initial").get<std::vector<double>>();
  if (static_cast<int>(pomdp.initial.size()) != pomdp.n_latent) {
    throw std::invalid_argument("initial: bad shape");
  }
  return pomdp;
}

}  // namespace betlab::env
