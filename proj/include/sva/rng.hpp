#pragma once

#include <cstdint>
#include <random>

namespace sva {

// Seeded random stream used everywhere draws are made. All samplers in this
// project take an Rng& so a run is reproducible from a single 64-bit seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // U(0,1), excludes 0 so log(uniform()) is always finite.
  double uniform() {
    double u;
    do {
      u = unif_(gen_);
    } while (u <= 0.0);
    return u;
  }

  double normal() { return norm_(gen_); }

  double gamma(double shape, double scale = 1.0) {
    return std::gamma_distribution<double>(shape, scale)(gen_);
  }

  double chi_squared(double df) { return gamma(0.5 * df, 2.0); }

  std::uint64_t next_u64() { return gen_(); }

  // integer in [lo, hi] inclusive
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(gen_);
  }

 private:
  std::mt19937_64 gen_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace sva
