// Apache License, Version 2.0, refer to LICENSE.txt
#ifndef COUNTREG_REGRESSION_HPP_
#define COUNTREG_REGRESSION_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "countreg/compoisson.hpp"
#include "countreg/rng.hpp"

namespace countreg {

// One mixture component: coefficients of the dual-link COM-Poisson regression
//   log mu_i = x_i' b   (centering link)
//   log nu_i = x_i' c   (shape link)
struct RegressionAtom {
  Eigen::VectorXd b;  // centering-link coefficients
  Eigen::VectorXd c;  // shape-link coefficients

  int dim() const { return static_cast<int>(b.size()); }
};

// Guards on the link scale. The nu floor blocks the divergent nu -> 0 series;
// the mu cap keeps normalizer series and envelope setup at a workable length
// when a proposal wanders into negligible-posterior territory.
inline constexpr double kNuMin = 1e-3;
inline constexpr double kNuMax = 1e3;
inline constexpr double kEtaMuMin = -30.0;
inline constexpr double kEtaMuMax = 11.512925464970229;  // log(1e5)

// COM-Poisson parameters induced by an atom at one covariate row, with the
// link-scale clamps applied.
inline ComPoissonParams eval_links(const RegressionAtom& atom,
                                   const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const double eta_mu = std::clamp(x.dot(atom.b), kEtaMuMin, kEtaMuMax);
  const double nu = std::clamp(std::exp(x.dot(atom.c)), kNuMin, kNuMax);
  return ComPoissonParams{std::exp(eta_mu), nu};
}

// Base measure G0: independent zero-mean normals on every coefficient of b
// and c, with separate scales for the two links.
struct GaussianCoefPrior {
  double sd_b = 2.0;
  double sd_c = 2.0;

  double log_density(const RegressionAtom& atom) const {
    const double qb = atom.b.squaredNorm() / (sd_b * sd_b);
    const double qc = atom.c.squaredNorm() / (sd_c * sd_c);
    const double d = static_cast<double>(atom.dim());
    return -0.5 * (qb + qc) - d * (std::log(sd_b) + std::log(sd_c)) -
           d * std::log(2.0 * M_PI);
  }

  RegressionAtom draw(int dim, RngStream& rng) const {
    RegressionAtom atom{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
    for (int j = 0; j < dim; ++j) atom.b[j] = sd_b * rng.normal();
    for (int j = 0; j < dim; ++j) atom.c[j] = sd_c * rng.normal();
    return atom;
  }
};

}  // namespace countreg

#endif  // COUNTREG_REGRESSION_HPP_
