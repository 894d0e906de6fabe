// Apache License, Version 2.0, refer to LICENSE.txt
#include "countreg/compoisson.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "countreg/errors.hpp"

namespace countreg {

namespace {

std::atomic<std::uint64_t> g_normalizer_calls{0};

struct CacheKey {
  double mu, nu, rel_tol;
  std::size_t max_terms;
  bool operator==(const CacheKey&) const = default;
};

struct CacheKeyHash {
  std::size_t operator()(const CacheKey& k) const noexcept {
    auto h = [](double d) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof(bits));
      bits = (bits ^ (bits >> 30)) * 0xbf58476d1ce4e5b9ULL;
      return bits ^ (bits >> 27);
    };
    std::uint64_t v = h(k.mu);
    v = v * 0x100000001b3ULL ^ h(k.nu);
    v = v * 0x100000001b3ULL ^ h(k.rel_tol);
    v = v * 0x100000001b3ULL ^ k.max_terms;
    return static_cast<std::size_t>(v);
  }
};

constexpr std::size_t kCacheCap = 1 << 16;
std::shared_mutex g_cache_mutex;
std::unordered_map<CacheKey, double, CacheKeyHash> g_cache;

double log_poisson_term(long y, double log_mu) {
  return static_cast<double>(y) * log_mu - std::lgamma(static_cast<double>(y) + 1.0);
}

// Streaming sum of exp(t_j - shift) terms with on-the-fly rescaling.
struct LogSumAccumulator {
  double shift = -std::numeric_limits<double>::infinity();
  double sum = 0.0;

  // Returns the term's value relative to the running sum (term / sum).
  double add(double t) {
    if (t > shift) {
      sum = sum * std::exp(shift - t) + 1.0;
      shift = t;
      return 1.0 / sum;
    }
    double e = std::exp(t - shift);
    sum += e;
    return e / sum;
  }

  double value() const { return shift + std::log(sum); }
};

double compute_log_normalizer(const ComPoissonParams& params, const NormalizerConfig& cfg) {
  const double log_mu = std::log(params.mu);
  const long mode = static_cast<long>(std::floor(params.mu));
  LogSumAccumulator acc;
  for (std::size_t j = 0; j < cfg.max_terms; ++j) {
    const long jy = static_cast<long>(j);
    const double t = params.nu * log_poisson_term(jy, log_mu);
    const double rel_term = acc.add(t);
    if (jy > mode) {
      // Past the mode consecutive term ratios r = (mu/(j+1))^nu fall below 1
      // and keep falling, so the remaining tail is at most term * r/(1-r).
      const double r = std::exp(params.nu * (log_mu - std::log(static_cast<double>(jy) + 1.0)));
      if (rel_term < cfg.rel_tol && rel_term * r / (1.0 - r) < cfg.rel_tol) {
        return acc.value();
      }
    }
  }
  std::ostringstream msg;
  msg << "COM-Poisson normalizer did not converge within " << cfg.max_terms
      << " terms (mu=" << params.mu << ", nu=" << params.nu << ")";
  throw NonConvergenceError(msg.str());
}

}  // namespace

void validate(const ComPoissonParams& params) {
  if (!(params.mu > 0.0) || !std::isfinite(params.mu))
    throw std::invalid_argument("ComPoissonParams: mu must be positive and finite");
  if (!(params.nu > 0.0) || !std::isfinite(params.nu))
    throw std::invalid_argument("ComPoissonParams: nu must be positive and finite");
}

void validate(const NormalizerConfig& cfg) {
  if (!(cfg.rel_tol > 0.0) || !(cfg.rel_tol < 1.0))
    throw std::invalid_argument("NormalizerConfig: rel_tol must be in (0, 1)");
  if (cfg.max_terms < 1)
    throw std::invalid_argument("NormalizerConfig: max_terms must be >= 1");
}

double log_unnorm_pmf(long y, const ComPoissonParams& params) {
  return params.nu * log_poisson_term(y, std::log(params.mu));
}

double log_normalizer(const ComPoissonParams& params, const NormalizerConfig& cfg) {
  validate(params);
  validate(cfg);
  g_normalizer_calls.fetch_add(1, std::memory_order_relaxed);

  const CacheKey key{params.mu, params.nu, cfg.rel_tol, cfg.max_terms};
  {
    std::shared_lock lock(g_cache_mutex);
    auto it = g_cache.find(key);
    if (it != g_cache.end()) return it->second;
  }
  const double value = compute_log_normalizer(params, cfg);
  {
    std::unique_lock lock(g_cache_mutex);
    if (g_cache.size() < kCacheCap) g_cache.emplace(key, value);
  }
  return value;
}

double log_pmf(long y, const ComPoissonParams& params, const NormalizerConfig& cfg) {
  if (y < 0) throw std::invalid_argument("log_pmf: y must be non-negative");
  return log_unnorm_pmf(y, params) - log_normalizer(params, cfg);
}

std::pair<double, double> moments_approx(const ComPoissonParams& params) {
  validate(params);
  return {params.mu, params.mu / params.nu};
}

std::pair<double, double> moments_exact(const ComPoissonParams& params,
                                        const NormalizerConfig& cfg) {
  validate(params);
  validate(cfg);
  const double log_z = log_normalizer(params, cfg);
  const double log_mu = std::log(params.mu);
  const long mode = static_cast<long>(std::floor(params.mu));

  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t j = 0; j < cfg.max_terms; ++j) {
    const long y = static_cast<long>(j);
    const double yd = static_cast<double>(y);
    const double p = std::exp(params.nu * log_poisson_term(y, log_mu) - log_z);
    m0 += p;
    m1 += yd * p;
    m2 += yd * yd * p;
    if (y > mode) {
      const double r = std::exp(params.nu * (log_mu - std::log(yd + 1.0)));
      // Closed-form bound on the remaining second-moment mass:
      // sum_k (y+k)^2 r^k = y^2 r/(1-r) + 2y r/(1-r)^2 + r(1+r)/(1-r)^3.
      const double q = 1.0 - r;
      const double tail2 =
          p * (yd * yd * r / q + 2.0 * yd * r / (q * q) + r * (1.0 + r) / (q * q * q));
      if (p * r / q < cfg.rel_tol * m0 && tail2 < cfg.rel_tol * std::max(m2, 1e-300)) {
        const double mean = m1 / m0;
        return {mean, m2 / m0 - mean * mean};
      }
    }
  }
  throw NonConvergenceError("moments_exact: series did not converge within max_terms");
}

double cdf(long y, const ComPoissonParams& params, const NormalizerConfig& cfg) {
  validate(params);
  if (y < 0) return 0.0;
  const double log_z = log_normalizer(params, cfg);
  const double log_mu = std::log(params.mu);
  double acc = 0.0;
  for (long j = 0; j <= y; ++j) {
    acc += std::exp(params.nu * log_poisson_term(j, log_mu) - log_z);
  }
  return std::min(acc, 1.0);
}

long quantile(double p, const ComPoissonParams& params, const NormalizerConfig& cfg) {
  validate(params);
  if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("quantile: p must be in (0, 1)");
  const double log_z = log_normalizer(params, cfg);
  const double log_mu = std::log(params.mu);
  double acc = 0.0;
  for (std::size_t j = 0; j < cfg.max_terms; ++j) {
    const long y = static_cast<long>(j);
    acc += std::exp(params.nu * log_poisson_term(y, log_mu) - log_z);
    if (acc >= p) return y;
  }
  throw NonConvergenceError("quantile: cumulative mass did not reach p within max_terms");
}

long sample(const ComPoissonParams& params, RngStream& rng) {
  validate(params);
  constexpr std::size_t kMaxAttempts = 1000000;
  const double log_mu = std::log(params.mu);
  const long mode = static_cast<long>(std::floor(params.mu));

  if (params.nu >= 1.0) {
    // Poisson(mu) proposals; the ratio q(y)/poisson-term(y) = exp((nu-1) l(y))
    // is maximized at the Poisson mode, giving the analytic bound.
    const double l_mode = log_poisson_term(mode, log_mu);
    for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const long y = rng.poisson(params.mu);
      const double log_accept = (params.nu - 1.0) * (log_poisson_term(y, log_mu) - l_mode);
      if (std::log(rng.uniform()) < log_accept) return y;
    }
  } else {
    // Piecewise envelope for the overdispersed case.  Body {0..s}: the
    // unnormalized terms are enumerated and drawn exactly (categorical on a
    // finite partial sum — no normalizer involved), so body proposals always
    // accept.  Tail y > s: geometric envelope with ratio r = (mu/(s+1))^nu,
    // which dominates because consecutive target ratios (mu/y)^nu only fall
    // below r from there on.  Switch point sits past the mode, offset by the
    // dispersion-scaled spread so the tail carries little envelope mass.
    const long s = mode + 1 + static_cast<long>(std::ceil(std::sqrt(params.mu / params.nu)));
    std::vector<double> log_q(static_cast<std::size_t>(s) + 1);
    LogSumAccumulator body;
    for (long y = 0; y <= s; ++y) {
      log_q[static_cast<std::size_t>(y)] = params.nu * log_poisson_term(y, log_mu);
      body.add(log_q[static_cast<std::size_t>(y)]);
    }
    const double log_body_mass = body.value();

    const double log_r = params.nu * (log_mu - std::log(static_cast<double>(s) + 1.0));  // < 0
    const double r = std::exp(log_r);
    const double log_q_s = log_q.back();
    const double log_tail_mass = log_q_s + log_r - std::log1p(-r);  // q(s) * r/(1-r), y >= s+1

    const double m = std::max(log_body_mass, log_tail_mass);
    const double p_body = std::exp(log_body_mass - m) /
                          (std::exp(log_body_mass - m) + std::exp(log_tail_mass - m));

    for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
      if (rng.uniform() < p_body) {
        return static_cast<long>(rng.categorical_from_log(log_q));
      }
      const long y = s + 1 + rng.geometric(1.0 - r);
      const double log_envelope = log_q_s + static_cast<double>(y - s) * log_r;
      const double log_q_y = params.nu * log_poisson_term(y, log_mu);
      if (std::log(rng.uniform()) < log_q_y - log_envelope) return y;
    }
  }
  throw NonConvergenceError("COM-Poisson rejection sampler exceeded its attempt guard");
}

std::uint64_t normalizer_call_count() noexcept {
  return g_normalizer_calls.load(std::memory_order_relaxed);
}

}  // namespace countreg
