// Apache License, Version 2.0, refer to LICENSE.txt
#include "countreg/exchange.hpp"

#include <stdexcept>
#include <vector>

namespace countreg {

double exchange_log_ratio(std::span<const long> y,
                          std::span<const ComPoissonParams> cur,
                          std::span<const ComPoissonParams> prop,
                          std::span<const long> y_aux) {
  const std::size_t n = y.size();
  if (cur.size() != n || prop.size() != n || y_aux.size() != n)
    throw std::invalid_argument("exchange_log_ratio: sequence lengths differ");
  if (n == 0) throw std::invalid_argument("exchange_log_ratio: empty sequences");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += log_unnorm_pmf(y_aux[i], cur[i]) + log_unnorm_pmf(y[i], prop[i]) -
           log_unnorm_pmf(y[i], cur[i]) - log_unnorm_pmf(y_aux[i], prop[i]);
  }
  return acc;
}

namespace {

enum class Block { kCentering, kShape };

// Proposes one coefficient block, runs the exchange acceptance over the
// cluster members, and commits to `atom` on acceptance.
bool update_block(Block which,
                  RegressionAtom& atom,
                  const Dataset& data,
                  std::span<const int> members,
                  const GaussianCoefPrior& prior,
                  double scale,
                  RngStream& rng) {
  const int d = atom.dim();
  const std::size_t m = members.size();
  const double step = scale / std::sqrt(static_cast<double>(m));

  RegressionAtom proposed = atom;
  Eigen::VectorXd& proposed_block = (which == Block::kCentering) ? proposed.b : proposed.c;
  for (int j = 0; j < d; ++j) proposed_block[j] += step * rng.normal();

  std::vector<long> yv(m), y_aux(m);
  std::vector<ComPoissonParams> cur(m), prop(m);
  for (std::size_t idx = 0; idx < m; ++idx) {
    const int i = members[idx];
    yv[idx] = data.y[i];
    cur[idx] = eval_links(atom, data.X.row(i));
    prop[idx] = eval_links(proposed, data.X.row(i));
    y_aux[idx] = sample(prop[idx], rng);
  }

  const double log_alpha = exchange_log_ratio(yv, cur, prop, y_aux) +
                           prior.log_density(proposed) - prior.log_density(atom);
  if (std::log(rng.uniform()) < log_alpha) {
    atom = proposed;
    return true;
  }
  return false;
}

}  // namespace

AtomUpdateStats exchange_update_atom(RegressionAtom& atom,
                                     const Dataset& data,
                                     std::span<const int> members,
                                     const GaussianCoefPrior& prior,
                                     AdaptiveScale& scale_b,
                                     AdaptiveScale& scale_c,
                                     RngStream& rng) {
  if (members.empty())
    throw std::invalid_argument("exchange_update_atom: cluster has no members");
  for (int i : members)
    if (i < 0 || i >= data.n())
      throw std::invalid_argument("exchange_update_atom: member index out of range");
  if (atom.dim() != data.dim())
    throw std::invalid_argument("exchange_update_atom: atom dimension mismatch");

  AtomUpdateStats stats;
  stats.accepted_b =
      update_block(Block::kCentering, atom, data, members, prior, scale_b.value(), rng);
  scale_b.observe(stats.accepted_b);
  stats.accepted_c =
      update_block(Block::kShape, atom, data, members, prior, scale_c.value(), rng);
  scale_c.observe(stats.accepted_c);
  return stats;
}

}  // namespace countreg
