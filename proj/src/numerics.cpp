#include "betlab/numerics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "betlab/errors.hpp"

namespace betlab::numerics {

namespace {

void require_unit(double x, const char* name) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::invalid_argument(std::string(name) + " must lie in [0,1], got " + std::to_string(x));
  }
}

// log C(n,k) via lgamma; exact enough that n+1 summed terms stay well
// below the 1e-12 tolerances used by the bound checks.
double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

MarginConstants margin_constants(double gamma) {
  if (!(gamma > 0.0 && gamma <= 0.5)) {
    throw std::invalid_argument("margin gamma must lie in (0, 1/2], got " + std::to_string(gamma));
  }
  MarginConstants out;
  out.gamma = gamma;
  out.c_gamma = 4.0 * gamma / (1.0 + 2.0 * gamma);
  out.t_gamma = gamma == 0.5 ? std::numeric_limits<double>::infinity()
                             : std::sqrt((1.0 + 2.0 * gamma) / (1.0 - 2.0 * gamma));
  return out;
}

BetOutcome bet_regret(double u_l, double u_r, double q) {
  require_unit(u_l, "u_l");
  require_unit(u_r, "u_r");
  require_unit(q, "q");
  BetOutcome out;
  out.value_star = std::max(u_l, u_r);
  if (out.value_star == 0.0) {
    throw UnsatisfiableGoalError("both branch values are zero: goal cannot be satisfied");
  }
  out.value_pi = q * u_l + (1.0 - q) * u_r;
  out.regret = 1.0 - out.value_pi / out.value_star;
  out.wrong_mass = u_l >= u_r ? 1.0 - q : q;
  out.margin = std::abs(u_l - u_r) / 2.0;
  return out;
}

double wrong_mass_bound(double delta, double gamma) {
  require_unit(delta, "delta");
  return delta / margin_constants(gamma).c_gamma;
}

double binom_pmf(int n, double p, int k) {
  if (n < 0 || k < 0 || k > n) {
    throw std::invalid_argument("binom_pmf requires 0 <= k <= n");
  }
  require_unit(p, "p");
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  return std::exp(log_choose(n, k) + k * std::log(p) + (n - k) * std::log1p(-p));
}

double binom_cdf(int n, double p, int k) {
  if (n < 0 || k < 0 || k > n) {
    throw std::invalid_argument("binom_cdf requires 0 <= k <= n");
  }
  require_unit(p, "p");
  if (k == n) return 1.0;
  double sum = 0.0;
  for (int i = 0; i <= k; ++i) sum += binom_pmf(n, p, i);
  return std::min(sum, 1.0);
}

int binom_median(int n, double p) {
  require_unit(p, "p");
  // Tiny slack so exact half-points (p = 1/2, odd n) resolve to the lower
  // median regardless of last-bit rounding in the CDF.
  constexpr double kTieTol = 1e-12;
  double cdf = 0.0;
  for (int k = 0; k <= n; ++k) {
    cdf += binom_pmf(n, p, k);
    if (cdf >= 0.5 - kTieTol) return k;
  }
  return n;
}

}  // namespace betlab::numerics
