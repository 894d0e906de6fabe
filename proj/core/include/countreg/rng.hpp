// Apache License, Version 2.0, refer to LICENSE.txt
#ifndef COUNTREG_RNG_HPP_
#define COUNTREG_RNG_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>

namespace countreg {

// Seedable random stream with deterministic fan-out into substreams.
//
// Every stochastic component owns one RngStream; all streams are derived from
// the single run seed, so a run is reproducible regardless of how many
// components consume randomness or in which order they are created.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  // Independent child stream determined by (this stream's seed, salt) only;
  // unaffected by draws already made from the parent.
  RngStream derive(std::uint64_t salt) const {
    return RngStream(mix(seed_ ^ (0x9e3779b97f4a7c15ULL + salt)));
  }

  std::uint64_t seed() const noexcept { return seed_; }

  // Uniform on [0, 1).
  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  long poisson(double mean) {
    return std::poisson_distribution<long>(mean)(engine_);
  }

  long binomial(long n, double p) {
    return std::binomial_distribution<long>(n, p)(engine_);
  }

  // Failures before first success, support {0, 1, 2, ...}.
  long geometric(double p_success) {
    return std::geometric_distribution<long>(p_success)(engine_);
  }

  // Index draw proportional to non-negative weights (need not be normalized).
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

  // Index draw from unnormalized log-weights.
  std::size_t categorical_from_log(std::span<const double> log_weights) {
    double m = -std::numeric_limits<double>::infinity();
    for (double lw : log_weights) m = std::max(m, lw);
    double total = 0.0;
    for (double lw : log_weights) total += std::exp(lw - m);
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < log_weights.size(); ++i) {
      acc += std::exp(log_weights[i] - m);
      if (u < acc) return i;
    }
    return log_weights.size() - 1;
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  // splitmix64 finalizer; spreads structured seeds over the full state space.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace countreg

#endif  // COUNTREG_RNG_HPP_
