// Apache License, Version 2.0, refer to LICENSE.txt
#include "countreg/dpm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "countreg/compoisson.hpp"
#include "countreg/errors.hpp"

namespace countreg {

void Hyperparams::validate() const {
  if (!(prior_sd_b > 0.0) || !(prior_sd_c > 0.0))
    throw ConfigError("Hyperparams: prior scales must be positive");
  if (!(a > 0.0)) throw ConfigError("Hyperparams: concentration a must be positive");
  if (!(psi >= 0.0)) throw ConfigError("Hyperparams: psi must be non-negative");
  if (burn_in < 0 || n_iter <= burn_in)
    throw ConfigError("Hyperparams: need n_iter > burn_in >= 0");
  if (thin < 1) throw ConfigError("Hyperparams: thin must be >= 1");
  if (warmup_atom_updates < 0)
    throw ConfigError("Hyperparams: warmup_atom_updates must be >= 0");
  if (gamma.size() > 0) {
    if (!gamma.array().isFinite().all() || (gamma.array() < 0.0).any())
      throw ConfigError("Hyperparams: gamma entries must be finite and >= 0");
    if (!(gamma.sum() > 0.0))
      throw ConfigError("Hyperparams: gamma must have positive total mass");
  }
}

void DpmState::check_consistency(int n) const {
  const int kk = k();
  if (static_cast<int>(S.size()) != n)
    throw std::invalid_argument("DpmState: S length mismatch");
  if (static_cast<int>(C.size()) != kk)
    throw std::invalid_argument("DpmState: C length must equal cluster count");
  if (kk < 1 || kk > n) throw std::invalid_argument("DpmState: cluster count out of range");
  std::vector<int> size(kk, 0);
  for (int s : S) {
    if (s < 0 || s >= kk) throw std::invalid_argument("DpmState: label out of range");
    ++size[s];
  }
  for (int h = 0; h < kk; ++h)
    if (size[h] == 0) throw std::invalid_argument("DpmState: empty cluster retained");
  for (int c : C)
    if (c < 0 || c >= n) throw std::invalid_argument("DpmState: basis index out of range");
  if (gamma.size() != n) throw std::invalid_argument("DpmState: gamma length mismatch");
}

Eigen::RowVectorXd KernelTransform::apply(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  Eigen::RowVectorXd out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j)
    out[j] = scale[j] > 0.0 ? (x[j] - center[j]) / scale[j] : 0.0;
  return out;
}

Eigen::MatrixXd KernelTransform::apply_all(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.row(i) = apply(X.row(i));
  return out;
}

KernelTransform fit_kernel_transform(const Eigen::MatrixXd& X) {
  const auto n = static_cast<double>(X.rows());
  KernelTransform t;
  t.center = X.colwise().mean();
  t.scale.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt((X.col(j).array() - t.center[j]).square().sum() / n);
    t.scale[j] = sd > 1e-12 ? sd : 0.0;  // constant columns drop out of the distance
  }
  return t;
}

Eigen::VectorXd anchor_gamma(const Eigen::MatrixXd& X, int m) {
  const int n = static_cast<int>(X.rows());
  if (m < 1 || m > n) throw ConfigError("anchor_gamma: need 1 <= m <= n");
  const Eigen::MatrixXd Xk = fit_kernel_transform(X).apply_all(X);

  // Medoid start, then repeatedly take the point farthest from the chosen set.
  std::vector<double> dist_min(n, std::numeric_limits<double>::infinity());
  int cur = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double tot = 0.0;
    for (int j = 0; j < n; ++j) tot += (Xk.row(i) - Xk.row(j)).norm();
    if (tot < best) {
      best = tot;
      cur = i;
    }
  }
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(n);
  for (int picked = 0;;) {
    gamma[cur] = 1.0;
    if (++picked == m) break;
    int far = -1;
    double far_d = -1.0;
    for (int i = 0; i < n; ++i) {
      dist_min[i] = std::min(dist_min[i], (Xk.row(i) - Xk.row(cur)).norm());
      if (gamma[i] == 0.0 && dist_min[i] > far_d) {
        far_d = dist_min[i];
        far = i;
      }
    }
    cur = far;
  }
  return gamma;
}

Eigen::VectorXd local_weights(const Eigen::MatrixXd& X, int i, double psi,
                              const Eigen::VectorXd& gamma) {
  const Eigen::Index n = X.rows();
  if (i < 0 || i >= n) throw std::invalid_argument("local_weights: subject index out of range");
  if (gamma.size() != n) throw std::invalid_argument("local_weights: gamma length mismatch");
  Eigen::VectorXd w(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d2 = (X.row(i) - X.row(j)).squaredNorm();
    w[j] = gamma[j] * std::exp(-psi * d2);
  }
  const double total = w.sum();
  if (!(total > 0.0)) throw ConfigError("local_weights: all weights underflowed");
  return w / total;
}

LocalWeightsMatrices local_weight_matrices(const Eigen::MatrixXd& X, double psi,
                                           const Eigen::VectorXd& gamma) {
  const Eigen::Index n = X.rows();
  if (gamma.size() != n)
    throw std::invalid_argument("local_weight_matrices: gamma length mismatch");
  LocalWeightsMatrices m;
  m.logB.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d2 = (X.row(i) - X.row(j)).squaredNorm();
      m.logB(i, j) = std::log(gamma[j]) - psi * d2;
    }
    // log-space row normalization
    const double mx = m.logB.row(i).maxCoeff();
    if (!std::isfinite(mx))
      throw ConfigError("local_weight_matrices: all weights underflowed");
    const double lse = mx + std::log((m.logB.row(i).array() - mx).exp().sum());
    m.logB.row(i).array() -= lse;
  }
  m.B = m.logB.array().exp();
  return m;
}

AllocationWeights allocation_prior_weights(const DpmState& state,
                                           const Eigen::Ref<const Eigen::VectorXd>& b_row,
                                           int i) {
  const int n = static_cast<int>(state.S.size());
  const int k = state.k();
  if (i < 0 || i >= n)
    throw std::invalid_argument("allocation_prior_weights: subject index out of range");
  if (b_row.size() != n)
    throw std::invalid_argument("allocation_prior_weights: weight row length mismatch");

  // Cluster sizes and per-location subject counts with subject i removed.
  std::vector<int> size(k, 0);
  for (int s : state.S) ++size[s];
  --size[state.S[i]];
  std::vector<int> cnt(n, 0);
  for (int l = 0; l < n; ++l) {
    if (l == i) continue;
    ++cnt[state.C[state.S[l]]];
  }

  AllocationWeights out;
  double w_new = 0.0;
  for (int j = 0; j < n; ++j) w_new += b_row[j] / (state.a + cnt[j]);
  out.w_new = state.a * w_new;
  for (int h = 0; h < k; ++h) {
    if (size[h] == 0) continue;  // subject i's own singleton drops out
    out.existing.push_back(h);
    out.w_existing.push_back(b_row[state.C[h]] * size[h] / (state.a + cnt[state.C[h]]));
  }
  return out;
}

AllocationWeights allocation_prior_weights(const DpmState& state, const Dataset& data,
                                           int i) {
  return allocation_prior_weights(state, local_weights(data.X, i, state.psi, state.gamma),
                                  i);
}

void canonicalize(DpmState& state) {
  const int k = state.k();
  std::vector<int> relabel(k, -1);
  int next = 0;
  for (int s : state.S)
    if (relabel[s] == -1) relabel[s] = next++;
  if (next != k) throw std::invalid_argument("canonicalize: state has an empty cluster");
  bool identity = true;
  for (int h = 0; h < k; ++h)
    if (relabel[h] != h) identity = false;
  if (identity) return;

  std::vector<int> new_C(k);
  std::vector<RegressionAtom> new_atoms(k);
  for (int h = 0; h < k; ++h) {
    new_C[relabel[h]] = state.C[h];
    new_atoms[relabel[h]] = std::move(state.atoms[h]);
  }
  state.C = std::move(new_C);
  state.atoms = std::move(new_atoms);
  for (int& s : state.S) s = relabel[s];
}

bool update_allocation(DpmState& state, const Dataset& data, const Eigen::MatrixXd& B,
                       const GaussianCoefPrior& prior, int i, RngStream& rng) {
  const int n = data.n();
  const int h_cur = state.S[i];
  const AllocationWeights w = allocation_prior_weights(state, B.row(i).transpose(), i);

  // Destination slot 0 = new cluster, slots 1.. = clusters in w.existing.
  std::vector<double> weights;
  weights.reserve(w.w_existing.size() + 1);
  weights.push_back(w.w_new);
  for (double v : w.w_existing) weights.push_back(v);
  const std::size_t slot = rng.categorical(weights);
  const bool to_new = slot == 0;
  const int dest = to_new ? -1 : w.existing[slot - 1];

  const ComPoissonParams theta_cur = eval_links(state.atoms[h_cur], data.X.row(i));
  RegressionAtom fresh;
  if (to_new) fresh = prior.draw(data.dim(), rng);
  const RegressionAtom& proposed_atom = to_new ? fresh : state.atoms[dest];
  const ComPoissonParams theta_prop = eval_links(proposed_atom, data.X.row(i));

  const long y_i = data.y[i];
  const long y_star = sample(theta_prop, rng);
  const double log_alpha =
      log_unnorm_pmf(y_star, theta_cur) + log_unnorm_pmf(y_i, theta_prop) -
      log_unnorm_pmf(y_i, theta_cur) - log_unnorm_pmf(y_star, theta_prop);
  if (!(std::log(rng.uniform()) < log_alpha)) return false;

  if (to_new) {
    state.S[i] = state.k();
    state.atoms.push_back(std::move(fresh));
    Eigen::VectorXd b_row = B.row(i).transpose();
    state.C.push_back(static_cast<int>(rng.categorical(
        std::span<const double>(b_row.data(), static_cast<std::size_t>(n)))));
  } else {
    state.S[i] = dest;
  }

  // Garbage-collect the old cluster if subject i was its last member.
  bool old_empty = true;
  for (int s : state.S)
    if (s == h_cur) {
      old_empty = false;
      break;
    }
  if (old_empty) {
    state.atoms.erase(state.atoms.begin() + h_cur);
    state.C.erase(state.C.begin() + h_cur);
    for (int& s : state.S)
      if (s > h_cur) --s;
  }
  canonicalize(state);
  return true;
}

AtomSweepStats update_atoms(DpmState& state, const Dataset& data,
                            const GaussianCoefPrior& prior, AdaptiveScale& scale_b,
                            AdaptiveScale& scale_c, RngStream& rng) {
  const int k = state.k();
  std::vector<std::vector<int>> members(k);
  for (int i = 0; i < data.n(); ++i) members[state.S[i]].push_back(i);

  AtomSweepStats stats;
  stats.clusters = k;
  for (int h = 0; h < k; ++h) {
    const AtomUpdateStats s = exchange_update_atom(state.atoms[h], data, members[h], prior,
                                                   scale_b, scale_c, rng);
    stats.accepted_b += s.accepted_b ? 1 : 0;
    stats.accepted_c += s.accepted_c ? 1 : 0;
  }
  return stats;
}

Eigen::VectorXd basis_index_log_weights(const Eigen::MatrixXd& logB,
                                        const std::vector<int>& members) {
  if (members.empty())
    throw std::invalid_argument("basis_index_log_weights: empty cluster");
  Eigen::VectorXd logw = Eigen::VectorXd::Zero(logB.cols());
  for (int i : members) logw += logB.row(i).transpose();
  return logw;
}

void update_basis_indices(DpmState& state, const Eigen::MatrixXd& logB, RngStream& rng,
                          GammaScheme scheme) {
  const int n = static_cast<int>(state.S.size());
  const int k = state.k();
  std::vector<std::vector<int>> members(k);
  for (int i = 0; i < n; ++i) members[state.S[i]].push_back(i);
  for (int h = 0; h < k; ++h) {
    const Eigen::VectorXd logw = basis_index_log_weights(logB, members[h]);
    state.C[h] = static_cast<int>(rng.categorical_from_log(
        std::span<const double>(logw.data(), static_cast<std::size_t>(n))));
  }
  // gamma refresh: the fixed uniform scheme leaves gamma untouched.
  (void)scheme;
}

PosteriorDraws run_chain(const Dataset& data, const Hyperparams& hyper) {
  data.validate();
  hyper.validate();
  const int n = data.n();

  RngStream rng = RngStream(hyper.seed).derive(0xD1A7);
  const GaussianCoefPrior prior{hyper.prior_sd_b, hyper.prior_sd_c};

  PosteriorDraws draws;
  draws.kernel = fit_kernel_transform(data.X);
  const Eigen::MatrixXd Xk = draws.kernel.apply_all(data.X);

  DpmState state;
  state.a = hyper.a;
  state.psi = hyper.psi;
  if (hyper.gamma.size() > 0 && hyper.gamma.size() != n)
    throw ConfigError("run_chain: gamma length must equal the subject count");
  state.gamma = hyper.gamma.size() > 0 ? hyper.gamma : Eigen::VectorXd::Ones(n);
  const LocalWeightsMatrices W = local_weight_matrices(Xk, hyper.psi, state.gamma);

  // Single-cluster start: one atom from G0, moved by warm-up exchange updates.
  state.S.assign(n, 0);
  state.atoms = {prior.draw(data.dim(), rng)};
  state.C = {0};
  AdaptiveScale scale_b(hyper.proposal.step_b, hyper.proposal.target_accept);
  AdaptiveScale scale_c(hyper.proposal.step_c, hyper.proposal.target_accept);
  std::vector<int> everyone(n);
  for (int i = 0; i < n; ++i) everyone[i] = i;
  for (int t = 0; t < hyper.warmup_atom_updates; ++t)
    exchange_update_atom(state.atoms[0], data, everyone, prior, scale_b, scale_c, rng);
  update_basis_indices(state, W.logB, rng, hyper.gamma_scheme);
  if (hyper.burn_in == 0) {
    scale_b.freeze();
    scale_c.freeze();
  }

  long long alloc_accepted = 0, alloc_total = 0;
  long long atom_accepted_b = 0, atom_accepted_c = 0, atom_total = 0;

  for (int iter = 1; iter <= hyper.n_iter; ++iter) {
    for (int i = 0; i < n; ++i) {
      alloc_accepted += update_allocation(state, data, W.B, prior, i, rng) ? 1 : 0;
      ++alloc_total;
    }
    const AtomSweepStats s = update_atoms(state, data, prior, scale_b, scale_c, rng);
    atom_accepted_b += s.accepted_b;
    atom_accepted_c += s.accepted_c;
    atom_total += s.clusters;
    update_basis_indices(state, W.logB, rng, hyper.gamma_scheme);

    if (iter == hyper.burn_in) {
      scale_b.freeze();
      scale_c.freeze();
    }
    draws.diagnostics.cluster_count_trace.push_back(state.k());
    if (iter > hyper.burn_in && (iter - hyper.burn_in) % hyper.thin == 0) {
      draws.snapshots.push_back(Snapshot{iter, state.S, state.C, state.atoms});
    }
  }

  draws.diagnostics.accept_rate_alloc =
      alloc_total > 0 ? static_cast<double>(alloc_accepted) / alloc_total : 0.0;
  draws.diagnostics.accept_rate_b =
      atom_total > 0 ? static_cast<double>(atom_accepted_b) / atom_total : 0.0;
  draws.diagnostics.accept_rate_c =
      atom_total > 0 ? static_cast<double>(atom_accepted_c) / atom_total : 0.0;
  draws.diagnostics.final_scale_b = scale_b.value();
  draws.diagnostics.final_scale_c = scale_c.value();
  return draws;
}

}  // namespace countreg
