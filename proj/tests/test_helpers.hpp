// Apache License, Version 2.0, refer to LICENSE.txt
//
// Shared statistical machinery for the test suites: goodness-of-fit,
// batch-means Monte Carlo standard errors, and partition scoring.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace testutil {

struct GofResult {
  double stat = 0.0;
  int df = 0;
  double critical = 0.0;
  bool pass = false;
};

// Pearson chi-square of observed counts against expected counts, pooling
// adjacent cells until every pooled expectation reaches 5. Cells must be in
// support order for the pooling to make sense.
inline GofResult chi_square_gof(const std::vector<double>& observed,
                                const std::vector<double>& expected,
                                double level = 0.01) {
  std::vector<double> obs_p, exp_p;
  double o_acc = 0.0, e_acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o_acc += observed[i];
    e_acc += expected[i];
    if (e_acc >= 5.0) {
      obs_p.push_back(o_acc);
      exp_p.push_back(e_acc);
      o_acc = e_acc = 0.0;
    }
  }
  if (e_acc > 0.0 && !exp_p.empty()) {  // fold the short tail into the last cell
    obs_p.back() += o_acc;
    exp_p.back() += e_acc;
  }
  GofResult r;
  r.df = static_cast<int>(obs_p.size()) - 1;
  if (r.df < 1) {
    r.pass = true;  // everything pooled into one cell; nothing to test
    return r;
  }
  for (std::size_t i = 0; i < obs_p.size(); ++i) {
    const double d = obs_p[i] - exp_p[i];
    r.stat += d * d / exp_p[i];
  }
  boost::math::chi_squared dist(r.df);
  r.critical = boost::math::quantile(dist, 1.0 - level);
  r.pass = r.stat < r.critical;
  return r;
}

// Batch-means summary of an MCMC scalar trace: mean and sd with Monte Carlo
// standard errors that honor autocorrelation (sqrt(n) batches).
struct ChainSummary {
  double mean = 0.0;
  double sd = 0.0;
  double mcse_mean = 0.0;
  double mcse_sd = 0.0;
};

inline ChainSummary summarize_chain(std::span<const double> x) {
  const std::size_t n = x.size();
  ChainSummary s;
  for (double v : x) s.mean += v;
  s.mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - s.mean) * (v - s.mean);
  var /= static_cast<double>(n);
  s.sd = std::sqrt(var);

  const std::size_t nb = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  const std::size_t bl = n / nb;
  std::vector<double> bmean(nb), bvar(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    double m = 0.0;
    for (std::size_t i = 0; i < bl; ++i) m += x[b * bl + i];
    m /= static_cast<double>(bl);
    double v = 0.0;
    for (std::size_t i = 0; i < bl; ++i) v += (x[b * bl + i] - m) * (x[b * bl + i] - m);
    bmean[b] = m;
    bvar[b] = v / static_cast<double>(bl);
  }
  auto spread = [&](const std::vector<double>& z) {
    double m = 0.0;
    for (double v : z) m += v;
    m /= static_cast<double>(nb);
    double vv = 0.0;
    for (double v : z) vv += (v - m) * (v - m);
    return vv / static_cast<double>(nb - 1);
  };
  s.mcse_mean = std::sqrt(spread(bmean) / static_cast<double>(nb));
  // Delta method from the variance's batch spread to the sd scale.
  const double mcse_var = std::sqrt(spread(bvar) / static_cast<double>(nb));
  s.mcse_sd = s.sd > 0.0 ? mcse_var / (2.0 * s.sd) : mcse_var;
  return s;
}

// Rand index: fraction of subject pairs on which two partitions agree.
inline double rand_index(std::span<const int> a, std::span<const int> b) {
  const std::size_t n = a.size();
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      ++total;
      if ((a[i] == a[j]) == (b[i] == b[j])) ++agree;
    }
  return total == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(total);
}

// Modal partition estimate: the sampled allocation vector minimizing Binder
// loss against the posterior mean co-clustering matrix.
inline std::vector<int> best_binder_partition(
    const std::vector<std::vector<int>>& draws) {
  const std::size_t n = draws.at(0).size();
  std::vector<double> p(n * n, 0.0);
  for (const std::vector<int>& s : draws)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (s[i] == s[j]) p[i * n + j] += 1.0;
  for (double& v : p) v /= static_cast<double>(draws.size());

  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < draws.size(); ++d) {
    const std::vector<int>& s = draws[d];
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double delta = s[i] == s[j] ? 1.0 : 0.0;
        loss += std::abs(delta - p[i * n + j]);
      }
    if (loss < best_loss) {
      best_loss = loss;
      best = d;
    }
  }
  return draws[best];
}

}  // namespace testutil
