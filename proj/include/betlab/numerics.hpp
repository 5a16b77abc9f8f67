#pragma once

#include <cmath>

namespace betlab::numerics {

// Margin-dependent constants shared by every bound in the library:
//   c(gamma) = 4*gamma / (1 + 2*gamma)      (regret-per-wrong-mass floor)
//   t(gamma) = sqrt((1 + 2*gamma) / (1 - 2*gamma))
// t is infinite exactly at gamma = 1/2; bounds that use it require gamma < 1/2.
struct MarginConstants {
  double gamma = 0.0;
  double c_gamma = 0.0;
  double t_gamma = 0.0;

  bool t_finite() const { return std::isfinite(t_gamma); }
};

// Requires gamma in (0, 1/2].
MarginConstants margin_constants(double gamma);

// One binary bet: branch L succeeds with probability u_l, branch R with u_r,
// and the policy picks L with probability q.
struct BetOutcome {
  double value_pi = 0.0;    // q*u_l + (1-q)*u_r
  double value_star = 0.0;  // max(u_l, u_r)
  double regret = 0.0;      // 1 - value_pi / value_star
  double wrong_mass = 0.0;  // mass on the suboptimal branch; ties treat L as optimal
  double margin = 0.0;      // |u_l - u_r| / 2
};

// Throws UnsatisfiableGoalError when max(u_l, u_r) == 0.
BetOutcome bet_regret(double u_l, double u_r, double q);

// delta / c(gamma): the wrong-mass ceiling implied by a regret level delta
// on bets whose margin is at least gamma.
double wrong_mass_bound(double delta, double gamma);

double binom_pmf(int n, double p, int k);

// Exact CDF by stable summation; no normal approximation. F(n) == 1.
double binom_cdf(int n, double p, int k);

// Lower median: min{k : F(k) >= 1/2}. Always within 1 of n*p.
int binom_median(int n, double p);

}  // namespace betlab::numerics
