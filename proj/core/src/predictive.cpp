// Apache License, Version 2.0, refer to LICENSE.txt

#include "countreg/predictive.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "countreg/compoisson.hpp"
#include "countreg/errors.hpp"
#include "countreg/regression.hpp"

namespace countreg {

namespace {

// Urn weights for a hypothetical extra subject: nothing is removed from the
// fitted state, so cluster sizes enter at full strength.  Slot 0 is the
// fresh-cluster mass; slot h+1 follows state.atoms[h].  Sums to one exactly.
std::vector<double> predictive_weights(const DpmState& state,
                                       const Eigen::VectorXd& b_row) {
  const int n = static_cast<int>(state.S.size());
  const int k = state.k();
  std::vector<int> size(k, 0);
  for (int l = 0; l < n; ++l) size[state.S[l]] += 1;
  std::vector<int> cnt(n, 0);
  for (int l = 0; l < n; ++l) cnt[state.C[state.S[l]]] += 1;

  std::vector<double> w(k + 1, 0.0);
  double w0 = 0.0;
  for (int j = 0; j < n; ++j) w0 += b_row[j] / (state.a + cnt[j]);
  w[0] = state.a * w0;
  for (int h = 0; h < k; ++h) {
    const int j = state.C[h];
    w[h + 1] = b_row[j] * size[h] / (state.a + cnt[j]);
  }
  const double tot = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= tot;
  return w;
}

struct ParamKey {
  std::uint64_t mu_bits;
  std::uint64_t nu_bits;
  bool operator==(const ParamKey& o) const {
    return mu_bits == o.mu_bits && nu_bits == o.nu_bits;
  }
};

struct ParamKeyHash {
  std::size_t operator()(const ParamKey& k) const {
    std::uint64_t h = k.mu_bits * 0x9e3779b97f4a7c15ULL;
    h ^= k.nu_bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

ParamKey make_key(const ComPoissonParams& p) {
  ParamKey k{};
  std::memcpy(&k.mu_bits, &p.mu, sizeof(double));
  std::memcpy(&k.nu_bits, &p.nu, sizeof(double));
  return k;
}

}  // namespace

double ConditionalPmf::mass() const {
  return std::accumulate(probs.begin(), probs.end(), 0.0);
}

ConditionalPmf conditional_pmf(const Eigen::RowVectorXd& x_raw,
                               const PosteriorDraws& draws,
                               const Dataset& data,
                               const Hyperparams& hyper,
                               RngStream& rng,
                               double tail_eps) {
  if (draws.snapshots.empty())
    throw ConfigError("conditional_pmf: no retained posterior draws");
  if (x_raw.size() != data.X.cols())
    throw DataError("conditional_pmf: covariate dimension mismatch");
  if (!(tail_eps > 0.0 && tail_eps < 1.0))
    throw ConfigError("conditional_pmf: tail_eps must be in (0,1)");

  const int n = data.n();
  const Eigen::MatrixXd Xk = draws.kernel.apply_all(data.X);
  const Eigen::RowVectorXd xk = draws.kernel.apply(x_raw);

  // Local weights of the new subject against the n observed basis locations.
  if (hyper.gamma.size() > 0 && hyper.gamma.size() != n)
    throw ConfigError("conditional_pmf: gamma length must equal the subject count");
  Eigen::VectorXd b_row(n);
  {
    Eigen::VectorXd logw(n);
    for (int j = 0; j < n; ++j) {
      const double lg = hyper.gamma.size() > 0 ? std::log(hyper.gamma[j]) : 0.0;
      const double d2 = (xk - Xk.row(j)).squaredNorm();
      logw[j] = lg - hyper.psi * d2;
    }
    const double m = logw.maxCoeff();
    if (!std::isfinite(m))
      throw ConfigError("conditional_pmf: local weights underflowed");
    double tot = 0.0;
    for (int j = 0; j < n; ++j) {
      b_row[j] = std::exp(logw[j] - m);
      tot += b_row[j];
    }
    b_row /= tot;
  }

  // Mixture components pooled over draws, merged by (mu, nu) so repeated
  // atoms across consecutive draws are costed once in the support scan.
  std::unordered_map<ParamKey, double, ParamKeyHash> pooled;
  const double draw_wt = 1.0 / static_cast<double>(draws.snapshots.size());
  const GaussianCoefPrior prior{hyper.prior_sd_b, hyper.prior_sd_c};
  const int dim = static_cast<int>(data.dim());
  for (const Snapshot& snap : draws.snapshots) {
    DpmState state;
    state.S = snap.S;
    state.C = snap.C;
    state.atoms = snap.atoms;
    state.a = hyper.a;
    state.psi = hyper.psi;
    const std::vector<double> w = predictive_weights(state, b_row);
    const RegressionAtom fresh = prior.draw(dim, rng);
    const ComPoissonParams p0 = eval_links(fresh, x_raw);
    pooled[make_key(p0)] += draw_wt * w[0];
    for (int h = 0; h < state.k(); ++h) {
      const ComPoissonParams ph = eval_links(state.atoms[h], x_raw);
      pooled[make_key(ph)] += draw_wt * w[h + 1];
    }
  }

  struct Comp {
    double log_mu;
    double nu;
    double log_z;
    double wt;
  };
  std::vector<Comp> comps;
  comps.reserve(pooled.size());
  for (const auto& [key, wt] : pooled) {
    ComPoissonParams p{};
    std::memcpy(&p.mu, &key.mu_bits, sizeof(double));
    std::memcpy(&p.nu, &key.nu_bits, sizeof(double));
    comps.push_back(Comp{std::log(p.mu), p.nu, log_normalizer(p), wt});
  }

  ConditionalPmf out;
  out.tail_eps = tail_eps;
  double cum = 0.0;
  double log_fact = 0.0;  // log y!
  constexpr int kMaxSupport = 1000000;
  for (int y = 0; y <= kMaxSupport; ++y) {
    if (y > 0) log_fact += std::log(static_cast<double>(y));
    double py = 0.0;
    for (const Comp& c : comps)
      py += c.wt * std::exp(c.nu * (y * c.log_mu - log_fact) - c.log_z);
    out.probs.push_back(py);
    cum += py;
    if (cum >= 1.0 - tail_eps) return out;
  }
  throw NonConvergenceError("conditional_pmf: support scan exceeded cap");
}

int conditional_quantile(double p, const ConditionalPmf& pmf) {
  if (!(p > 0.0 && p < 1.0))
    throw ConfigError("conditional_quantile: p must be in (0,1)");
  double cum = 0.0;
  for (int y = 0; y <= pmf.support_max(); ++y) {
    cum += pmf.probs[static_cast<std::size_t>(y)];
    if (cum >= p) return y;
  }
  // p falls inside the truncated tail mass; the scan stopped at the first y
  // with cdf >= 1 - tail_eps, which is the best available answer.
  return pmf.support_max();
}

QuantileCurves quantile_curves(const Eigen::MatrixXd& x_grid,
                               const std::vector<double>& p_list,
                               const PosteriorDraws& draws,
                               const Dataset& data,
                               const Hyperparams& hyper,
                               std::uint64_t seed,
                               double tail_eps) {
  if (p_list.empty())
    throw ConfigError("quantile_curves: empty probability list");
  QuantileCurves out;
  out.x_grid = x_grid;
  out.p_list = p_list;
  out.q.resize(x_grid.rows(), static_cast<Eigen::Index>(p_list.size()));
  RngStream root(seed);
  for (Eigen::Index i = 0; i < x_grid.rows(); ++i) {
    RngStream local = root.derive(0x9d5bu + static_cast<std::uint64_t>(i));
    const ConditionalPmf pmf = conditional_pmf(x_grid.row(i), draws, data,
                                               hyper, local, tail_eps);
    for (std::size_t j = 0; j < p_list.size(); ++j)
      out.q(i, static_cast<Eigen::Index>(j)) =
          conditional_quantile(p_list[j], pmf);
  }
  return out;
}

}  // namespace countreg
