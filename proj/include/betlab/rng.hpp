#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace betlab {

// Seeded generator with platform-independent output. The engine is the
// standard mt19937_64 (bit-exact everywhere); doubles are built directly
// from the high 53 bits so no implementation-defined distribution is used.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(splitmix(seed)) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive bounds. Modulo bias is ~2^-64 per draw, irrelevant here.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  // Flat Dirichlet row via normalized unit-exponential draws.
  std::vector<double> dirichlet(int k) {
    std::vector<double> row(k);
    double total = 0.0;
    for (auto& v : row) {
      v = -std::log(1.0 - uniform());
      total += v;
    }
    for (auto& v : row) v /= total;
    return row;
  }

  // Independent substream; forks of the same (seed, stream) coincide.
  Rng fork(uint64_t stream) const { return Rng(splitmix(seed_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1)))); }

  uint64_t seed() const { return seed_; }

 private:
  static uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace betlab
