// Apache License, Version 2.0, refer to LICENSE.txt
//
// Posterior predictive distribution of the count response at a new covariate
// value, averaged over retained MCMC draws.  Quantiles are read off one shared
// per-x pmf, so curves for increasing p never cross by construction.

#pragma once

#include <vector>

#include <Eigen/Dense>

#include "countreg/data.hpp"
#include "countreg/dpm.hpp"
#include "countreg/rng.hpp"

namespace countreg {

// Monte Carlo average of the conditional pmf p(y | x) over posterior draws.
// probs[y] for y = 0..support_max(); the support is extended until the mass
// left in the tail is below tail_eps.
struct ConditionalPmf {
  std::vector<double> probs;
  double tail_eps = 1e-6;

  int support_max() const { return static_cast<int>(probs.size()) - 1; }
  double mass() const;
};

// Averages, over the retained draws, the mixture implied for a hypothetical
// (n+1)-th subject at covariate row x_raw: existing clusters keep their fitted
// atoms, and the "new cluster" slot gets a fresh draw from the coefficient
// prior per retained draw.  x_raw is on the same scale as data.X.
ConditionalPmf conditional_pmf(const Eigen::RowVectorXd& x_raw,
                               const PosteriorDraws& draws,
                               const Dataset& data,
                               const Hyperparams& hyper,
                               RngStream& rng,
                               double tail_eps = 1e-6);

// Smallest y with CDF(y) >= p.  Multiple p against the same pmf share the
// support scan, which is what rules out quantile crossing.
int conditional_quantile(double p, const ConditionalPmf& pmf);

// Quantile curves over a grid of covariate rows (one row per evaluation
// point).  q(i, j) is the p_list[j] quantile at x_grid.row(i).  Each grid
// point gets its own derived RNG stream, so evaluations are order-independent.
struct QuantileCurves {
  Eigen::MatrixXd x_grid;
  std::vector<double> p_list;
  Eigen::MatrixXi q;
};

QuantileCurves quantile_curves(const Eigen::MatrixXd& x_grid,
                               const std::vector<double>& p_list,
                               const PosteriorDraws& draws,
                               const Dataset& data,
                               const Hyperparams& hyper,
                               std::uint64_t seed,
                               double tail_eps = 1e-6);

}  // namespace countreg
