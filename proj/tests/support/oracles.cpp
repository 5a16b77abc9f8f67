#include "oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace betlab::oracles {

double brute_force_binom_cdf(int n, double p, int k) {
  if (n > 20) throw std::invalid_argument("brute force oracle limited to n <= 20");
  double total = 0.0;
  for (uint32_t mask = 0; mask < (1u << n); ++mask) {
    const int successes = std::popcount(mask);
    if (successes > k) continue;
    double prob = 1.0;
    for (int i = 0; i < n; ++i) prob *= (mask >> i) & 1u ? p : 1.0 - p;
    total += prob;
  }
  return total;
}

int brute_force_binom_median(int n, double p) {
  for (int k = 0; k <= n; ++k) {
    if (brute_force_binom_cdf(n, p, k) >= 0.5 - 1e-12) return k;
  }
  return n;
}

namespace {

// Sum of P(h, X_path) over complete latent paths ending at each state.
std::vector<double> path_sums(const env::FinitePOMDP& pomdp, const env::History& h) {
  const int t = h.length();
  std::vector<double> totals(pomdp.n_latent, 0.0);
  std::vector<int> path(t + 1, 0);
  while (true) {
    double prob = pomdp.initial[path[0]] * pomdp.z(path[0], h.observations[0]);
    for (int i = 0; i < t && prob > 0.0; ++i) {
      prob *= pomdp.t(path[i], h.actions[i], path[i + 1]) * pomdp.z(path[i + 1], h.observations[i + 1]);
    }
    totals[path[t]] += prob;
    int j = t;
    while (j >= 0 && path[j] == pomdp.n_latent - 1) path[j--] = 0;
    if (j < 0) break;
    ++path[j];
  }
  return totals;
}

}  // namespace

std::vector<double> enumerate_posterior(const env::FinitePOMDP& pomdp, const env::History& h) {
  auto totals = path_sums(pomdp, h);
  double mass = 0.0;
  for (double v : totals) mass += v;
  for (auto& v : totals) v /= mass;
  return totals;
}

double joint_test_probability(const env::FinitePOMDP& pomdp, const env::History& h,
                              const goals::Test& t) {
  const auto start = path_sums(pomdp, h);
  double h_mass = 0.0;
  for (double v : start) h_mass += v;

  // Extend every latent path through the prescribed actions for each event
  // member, summing joint mass.
  const int k = t.depth();
  double joint = 0.0;
  for (const auto& w : t.event) {
    std::vector<int> path(k + 1, 0);
    while (true) {
      double prob = start[path[0]];
      for (int i = 0; i < k && prob > 0.0; ++i) {
        prob *= pomdp.t(path[i], t.actions[i], path[i + 1]) * pomdp.z(path[i + 1], w[i]);
      }
      joint += prob;
      int j = k;
      while (j >= 0 && path[j] == pomdp.n_latent - 1) path[j--] = 0;
      if (j < 0) break;
      ++path[j];
    }
  }
  return joint / h_mass;
}

namespace {

int sample_index(const double* probs, int n, Rng& rng) {
  double u = rng.uniform();
  for (int i = 0; i < n; ++i) {
    u -= probs[i];
    if (u < 0.0) return i;
  }
  return n - 1;
}

}  // namespace

McEstimate mc_test_probability(const env::FinitePOMDP& pomdp, const env::History& h,
                               const goals::Test& t, long n_accepted, Rng& rng) {
  const int t_len = h.length();
  long accepted = 0, hits = 0;
  long guard = n_accepted * 10000;
  while (accepted < n_accepted && guard-- > 0) {
    int x = sample_index(pomdp.initial.data(), pomdp.n_latent, rng);
    if (sample_index(&pomdp.observation[x * pomdp.n_obs], pomdp.n_obs, rng) !=
        h.observations[0]) {
      continue;
    }
    bool match = true;
    for (int i = 0; i < t_len && match; ++i) {
      x = sample_index(&pomdp.transition[(x * pomdp.n_actions + h.actions[i]) * pomdp.n_latent],
                       pomdp.n_latent, rng);
      match = sample_index(&pomdp.observation[x * pomdp.n_obs], pomdp.n_obs, rng) ==
              h.observations[i + 1];
    }
    if (!match) continue;
    ++accepted;
    std::vector<int> seen(t.depth());
    for (int i = 0; i < t.depth(); ++i) {
      x = sample_index(&pomdp.transition[(x * pomdp.n_actions + t.actions[i]) * pomdp.n_latent],
                       pomdp.n_latent, rng);
      seen[i] = sample_index(&pomdp.observation[x * pomdp.n_obs], pomdp.n_obs, rng);
    }
    if (std::find(t.event.begin(), t.event.end(), seen) != t.event.end()) ++hits;
  }
  McEstimate est;
  est.samples = accepted;
  est.mean = accepted > 0 ? static_cast<double>(hits) / accepted : 0.0;
  est.std_error = accepted > 0 ? std::sqrt(est.mean * (1.0 - est.mean) / accepted) : 1.0;
  return est;
}

McEstimate mc_composite_branch1(const env::FiniteMDP& mdp, const goals::CompositeGoal& g,
                                long episodes, Rng& rng) {
  long branch1 = 0;
  for (long e = 0; e < episodes; ++e) {
    int s = sample_index(mdp.initial.data(), mdp.n_states, rng);
    int attempts = 0, successes = 0;
    long guard = 1000000;
    while (attempts < g.n && guard-- > 0) {
      const int a = s == g.s ? g.a : rng.uniform_int(0, mdp.n_actions - 1);
      const bool is_attempt = s == g.s && a == g.a;
      const int next = sample_index(&mdp.kernel[(s * mdp.n_actions + a) * mdp.n_states],
                                    mdp.n_states, rng);
      if (is_attempt) {
        ++attempts;
        if (next == g.s_next) ++successes;
      }
      s = next;
    }
    if (successes <= g.k) ++branch1;
  }
  McEstimate est;
  est.samples = episodes;
  est.mean = static_cast<double>(branch1) / episodes;
  est.std_error = std::sqrt(est.mean * (1.0 - est.mean) / episodes);
  return est;
}

McEstimate mc_bet_value(double u1, double u2, double q, long episodes, Rng& rng) {
  long wins = 0;
  for (long e = 0; e < episodes; ++e) {
    const double u = rng.uniform() < q ? u1 : u2;
    if (rng.uniform() < u) ++wins;
  }
  McEstimate est;
  est.samples = episodes;
  est.mean = static_cast<double>(wins) / episodes;
  est.std_error = std::sqrt(est.mean * (1.0 - est.mean) / episodes);
  return est;
}

}  // namespace betlab::oracles
