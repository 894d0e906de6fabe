// Apache License, Version 2.0, refer to LICENSE.txt
#ifndef COUNTREG_DPM_HPP_
#define COUNTREG_DPM_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "countreg/data.hpp"
#include "countreg/exchange.hpp"
#include "countreg/regression.hpp"
#include "countreg/rng.hpp"

namespace countreg {

// Covariate-dependent Dirichlet process mixture of COM-Poisson regressions.
//
// Subjects are allocated to clusters sharing a RegressionAtom; each cluster
// carries a basis index naming the subject whose location anchors it. The
// sampler alternates allocation moves proposed from the conditional prior and
// accepted by the exchange ratio, exchange-MH atom updates, and multinomial
// basis-index updates. No step ever evaluates the COM-Poisson normalizer.

// Location-weight refresh schemes for gamma; only the fixed uniform scheme is
// implemented, the enum is the extension hook.
enum class GammaScheme { kFixedUniform };

struct Hyperparams {
  double prior_sd_b = 2.0;  // G0 scale on centering-link coefficients
  double prior_sd_c = 2.0;  // G0 scale on shape-link coefficients
  double a = 1.0;           // DP concentration, held fixed
  double psi = 1.0;         // covariate-kernel bandwidth
  int burn_in = 1000;
  int n_iter = 2000;        // total sweeps, including burn-in
  int thin = 1;
  std::uint64_t seed = 0;
  ExchangeProposalConfig proposal;
  int warmup_atom_updates = 50;  // exchange moves on the initial single-cluster atom
  GammaScheme gamma_scheme = GammaScheme::kFixedUniform;
  // Fixed location weights; empty means uniform. Length-n when set. Entries
  // need not be normalized. Concentrating the mass on one location makes every
  // basis index collapse to it and the allocation prior becomes the classic
  // single-urn Polya scheme, which is the useful non-uniform configuration
  // until a gamma-updating scheme lands.
  Eigen::VectorXd gamma;

  void validate() const;
};

struct DpmState {
  std::vector<int> S;                 // subject -> cluster label (0-based, compact)
  std::vector<int> C;                 // cluster -> basis subject index
  std::vector<RegressionAtom> atoms;  // cluster -> coefficients
  double a = 1.0;
  double psi = 1.0;
  Eigen::VectorXd gamma;              // location weights, uniform by default

  int k() const { return static_cast<int>(atoms.size()); }
  // Throws std::invalid_argument on any violated structural invariant:
  // compact labels all used, C/atoms lengths equal k, C entries valid.
  void check_consistency(int n) const;
};

struct Snapshot {
  int iteration = 0;
  std::vector<int> S;
  std::vector<int> C;
  std::vector<RegressionAtom> atoms;
};

struct ChainDiagnostics {
  std::vector<int> cluster_count_trace;  // one entry per sweep
  double accept_rate_b = 0.0;
  double accept_rate_c = 0.0;
  double accept_rate_alloc = 0.0;
  double final_scale_b = 0.0;
  double final_scale_c = 0.0;
};

// Standardization applied to covariates when computing kernel distances.
// Columns with (near) zero spread, such as the intercept, get scale = 0 and
// drop out of the distance.
struct KernelTransform {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;

  Eigen::RowVectorXd apply(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Eigen::MatrixXd apply_all(const Eigen::MatrixXd& X) const;
};

KernelTransform fit_kernel_transform(const Eigen::MatrixXd& X);

struct PosteriorDraws {
  std::vector<Snapshot> snapshots;
  ChainDiagnostics diagnostics;
  KernelTransform kernel;  // transform under which the chain computed b_ij
};

// Indicator gamma concentrated on m anchor subjects spread over covariate
// space: farthest-point traversal on the kernel-standardized rows, seeded at
// the medoid. With every anchor location kept occupied the allocation prior
// behaves like m coupled Polya urns instead of leaking mass to the n - k
// unoccupied locations, while clusters stay covariate-local.
Eigen::VectorXd anchor_gamma(const Eigen::MatrixXd& X, int m);

// Normalized location weights b_ij over j for subject i:
// b_ij proportional to gamma_j * exp(-psi * ||x_i - x_j||^2), distances taken
// on the rows of X exactly as given.
Eigen::VectorXd local_weights(const Eigen::MatrixXd& X, int i, double psi,
                              const Eigen::VectorXd& gamma);

// All rows at once, plus the same weights in log space (log B has -inf where
// the kernel underflows).
struct LocalWeightsMatrices {
  Eigen::MatrixXd B;
  Eigen::MatrixXd logB;
};
LocalWeightsMatrices local_weight_matrices(const Eigen::MatrixXd& X, double psi,
                                           const Eigen::VectorXd& gamma);

// Conditional-prior allocation weights for subject i with i removed from the
// state: w_new for opening a fresh cluster, and one weight per surviving
// cluster (labels listed in `existing`). The weights sum to one.
struct AllocationWeights {
  double w_new = 0.0;
  std::vector<int> existing;
  std::vector<double> w_existing;
};
AllocationWeights allocation_prior_weights(const DpmState& state,
                                           const Eigen::Ref<const Eigen::VectorXd>& b_row,
                                           int i);
// Convenience overload computing the weight row from the dataset covariates.
AllocationWeights allocation_prior_weights(const DpmState& state, const Dataset& data,
                                           int i);

// One allocation move for subject i: propose a destination from the
// conditional prior, draw an auxiliary count from the proposed component at
// x_i, accept by the exchange ratio. Returns whether the proposal was
// accepted. B is the row-normalized local-weight matrix the chain runs under.
bool update_allocation(DpmState& state, const Dataset& data, const Eigen::MatrixXd& B,
                       const GaussianCoefPrior& prior, int i, RngStream& rng);

// Exchange-MH sweep over every cluster's atom.
struct AtomSweepStats {
  int accepted_b = 0;
  int accepted_c = 0;
  int clusters = 0;
};
AtomSweepStats update_atoms(DpmState& state, const Dataset& data,
                            const GaussianCoefPrior& prior, AdaptiveScale& scale_b,
                            AdaptiveScale& scale_c, RngStream& rng);

// Unnormalized log multinomial weights for one cluster's basis index:
// sum over members of log b_ij, j = 0..n-1.
Eigen::VectorXd basis_index_log_weights(const Eigen::MatrixXd& logB,
                                        const std::vector<int>& members);

// Redraws every cluster's basis index from its multinomial conditional, then
// refreshes gamma (a no-op under the fixed uniform scheme).
void update_basis_indices(DpmState& state, const Eigen::MatrixXd& logB, RngStream& rng,
                          GammaScheme scheme = GammaScheme::kFixedUniform);

// Relabels clusters into order of first appearance in S, permuting C and
// atoms to match.
void canonicalize(DpmState& state);

// Full MCMC: initialize, alternate allocation / atom / basis-index steps for
// n_iter sweeps, record thinned post-burn-in snapshots. Deterministic given
// hyper.seed.
PosteriorDraws run_chain(const Dataset& data, const Hyperparams& hyper);

}  // namespace countreg

#endif  // COUNTREG_DPM_HPP_
