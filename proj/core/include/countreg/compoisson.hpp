// Apache License, Version 2.0, refer to LICENSE.txt
#ifndef COUNTREG_COMPOISSON_HPP_
#define COUNTREG_COMPOISSON_HPP_

#include <cstdint>
#include <utility>

#include "countreg/rng.hpp"

namespace countreg {

// COM-Poisson distribution in the mean-like parameterization:
//
//   P(Y = y) = (mu^y / y!)^nu / Z(mu, nu),   Z(mu, nu) = sum_j (mu^j / j!)^nu
//
// mu is a centering parameter (floor(mu) is a mode, E[Y] is close to mu) and
// nu controls dispersion: nu = 1 is Poisson(mu), nu > 1 underdispersed,
// nu < 1 overdispersed. Z has no closed form and is evaluated by truncated
// summation in log space.
struct ComPoissonParams {
  double mu = 1.0;  // centering parameter, > 0
  double nu = 1.0;  // shape parameter, > 0 (the nu = 0 geometric boundary is rejected)
};

// Truncation control for the normalizing-constant series and derived sums.
struct NormalizerConfig {
  double rel_tol = 1e-12;          // relative stopping tolerance, in (0, 1)
  std::size_t max_terms = 1000000; // hard cap before NonConvergenceError
};

// Throws std::invalid_argument unless mu > 0 and nu > 0 and both finite.
void validate(const ComPoissonParams& params);
void validate(const NormalizerConfig& cfg);

// nu * (y log mu - log y!), the log of the unnormalized pmf. This is the only
// density quantity the exchange-algorithm paths are allowed to touch.
double log_unnorm_pmf(long y, const ComPoissonParams& params);

// log Z(mu, nu) by log-space summation past the mode, stopping once both the
// current term and a geometric tail bound drop below rel_tol relative to the
// running sum. Results are memoized in a process-wide cache safe for
// concurrent readers.
double log_normalizer(const ComPoissonParams& params, const NormalizerConfig& cfg = {});

double log_pmf(long y, const ComPoissonParams& params, const NormalizerConfig& cfg = {});

// (mu, mu / nu): the closed-form moment approximations. Exact moments are
// available from moments_exact.
std::pair<double, double> moments_approx(const ComPoissonParams& params);

// Exact (mean, variance) by truncated summation with tail bounds.
std::pair<double, double> moments_exact(const ComPoissonParams& params,
                                        const NormalizerConfig& cfg = {});

double cdf(long y, const ComPoissonParams& params, const NormalizerConfig& cfg = {});

// Smallest integer y with cdf(y) >= p; p in (0, 1).
long quantile(double p, const ComPoissonParams& params, const NormalizerConfig& cfg = {});

// Exact draw by rejection against analytic envelopes of the unnormalized
// density; Z is never evaluated, as the exchange algorithm requires. For
// nu >= 1 the envelope is Poisson(mu) with the density ratio bounded at the
// mode; for nu < 1 the body {0..s} is drawn exactly (finite categorical) and
// a dominating geometric tail takes over past the switch point s.
long sample(const ComPoissonParams& params, RngStream& rng);

// Number of log_normalizer calls made by this process so far (cache hits
// included). Lets tests prove a code path is normalizer-free.
std::uint64_t normalizer_call_count() noexcept;

}  // namespace countreg

#endif  // COUNTREG_COMPOISSON_HPP_
