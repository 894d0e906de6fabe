// Apache License, Version 2.0, refer to LICENSE.txt
//
// Jittered quantile regression for counts: add Uniform[0,1) noise, regress a
// log transform of the jittered response with check-loss minimization, and
// read count quantiles back off with a ceiling correction.  Serves as the
// classical baseline the mixture model is compared against.

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "countreg/data.hpp"
#include "countreg/rng.hpp"

namespace countreg {

// rho_p(r): p*r for r >= 0, (p-1)*r otherwise.
double check_loss(double r, double p);

// z_i = y_i + u_i with u_i ~ Uniform[0,1), independent across i.
std::vector<double> jitter(std::span<const long> y, RngStream& rng);

// log(z - p) above the quantile level, log(varsigma) at or below it.
double transform(double z, double p, double varsigma = 1e-5);

// Minimizes sum_i rho_p(t_i - m_i' beta) exactly via a bounded-variable
// simplex on the dual program (d constraint rows, n box variables).  The
// level is nudged down by ~1e-9 internally so tied optima resolve to the
// lower sample quantile; the returned vertex is exact for the stated p.
// Throws DataError on rank-deficient design.
Eigen::VectorXd fit_quantile_regression(const Eigen::VectorXd& t,
                                        const Eigen::MatrixXd& M, double p);

// Cubic B-spline basis on one covariate; clamped knot vector, evaluation
// clamps to the boundary knots.  Functions sum to one, so the basis spans
// constants and is used without a separate intercept.
class SplineBasis {
 public:
  SplineBasis() = default;

  // Boundary knots at min/max of x, interior knots at the given quantile
  // levels of x (linear-interpolation sample quantiles).
  static SplineBasis cubic_from_quantiles(
      std::span<const double> x,
      std::span<const double> levels = kDefaultKnotLevels);

  int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  Eigen::RowVectorXd row(double x) const;
  const std::vector<double>& knots() const { return knots_; }

  static constexpr double kDefaultKnotLevels[] = {0.25, 0.5, 0.75};

 private:
  std::vector<double> knots_;  // clamped: boundary knots repeated degree+1 times
  int degree_ = 3;
};

enum class BasisKind { kLinear, kSpline };

// Maps a raw design row (intercept first, as in Dataset) to the regression
// basis row.  Linear passes the row through; spline expands the single
// non-intercept covariate and drops the explicit intercept.
struct CovariateBasis {
  BasisKind kind = BasisKind::kLinear;
  SplineBasis spline;

  static CovariateBasis linear();
  static CovariateBasis cubic_spline(const Eigen::MatrixXd& X);

  Eigen::RowVectorXd row(const Eigen::RowVectorXd& x_raw) const;
  Eigen::MatrixXd design(const Eigen::MatrixXd& X) const;
};

struct QuantileFit {
  double p = 0.5;
  Eigen::VectorXd beta;  // averaged over jitter replications
  CovariateBasis basis;
  int m_jitter = 100;
};

// Repeats jitter -> transform -> check-loss fit m_jitter times and averages
// the coefficient vectors, which tames the noise sensitivity of a single
// jitter pass.
QuantileFit fit_jittered(const Dataset& data, double p,
                         const CovariateBasis& basis, int m_jitter,
                         RngStream& rng, double varsigma = 1e-5);

// Q_Z = p + exp(basis_row(x)' beta); returns max(0, ceil(Q_Z - 1)).
long estimate_count_quantile(const Eigen::RowVectorXd& x_raw,
                             const QuantileFit& fit);

struct CrossingViolation {
  Eigen::Index grid_row;
  double p_low;
  double p_high;
};

// All (grid point, level pair) combinations where the fitted count quantile
// at the lower level exceeds the one at the higher level.
std::vector<CrossingViolation> detect_crossing(
    const std::vector<QuantileFit>& fits, const Eigen::MatrixXd& x_grid);

}  // namespace countreg
