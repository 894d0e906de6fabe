// Apache License, Version 2.0, refer to LICENSE.txt

#include "countreg/jitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "countreg/errors.hpp"

namespace countreg {

double check_loss(double r, double p) {
  return r >= 0.0 ? p * r : (p - 1.0) * r;
}

std::vector<double> jitter(std::span<const long> y, RngStream& rng) {
  std::vector<double> z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    z[i] = static_cast<double>(y[i]) + rng.uniform();
  return z;
}

double transform(double z, double p, double varsigma) {
  if (!(varsigma > 0.0)) throw ConfigError("transform: varsigma must be > 0");
  return z > p ? std::log(z - p) : std::log(varsigma);
}

namespace {

// Bounded-variable simplex for the dual of the check-loss problem:
//
//   max t'd   s.t.  M'd = (1 - p) M'1,   0 <= d_i <= 1.
//
// Only d constraint rows, so a basis is d x d regardless of n.  At an optimal
// basis the d basic observations are interpolated exactly, and beta solves
// M_B beta = t_B.  The level is perturbed down by eps so that when (1-p)n
// lands on an integer (tied primal optima) the basic observation is forced to
// the lower tied sample quantile; beta recovery does not involve eps, so the
// returned vertex is exact.
class CheckLossLp {
 public:
  CheckLossLp(const Eigen::VectorXd& t, const Eigen::MatrixXd& M, double p)
      : t_(t), M_(M), n_(static_cast<int>(M.rows())),
        d_(static_cast<int>(M.cols())) {
    const double eps = std::min(1e-9, p / 2.0);
    b_ = (1.0 - (p - eps)) * (M_.transpose() * Eigen::VectorXd::Ones(n_));
  }

  Eigen::VectorXd solve() {
    init();
    run_phase(/*phase1=*/true);
    if (artificial_mass() > 1e-7)
      throw NonConvergenceError("check-loss LP: phase 1 failed");
    expel_artificials();
    run_phase(/*phase1=*/false);
    return recover_beta();
  }

 private:
  enum class Status { kLower, kUpper, kBasic };

  Eigen::VectorXd column(int j) const {
    if (j < n_) return M_.row(j).transpose();
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d_);
    e[j - n_] = art_sign_[j - n_];
    return e;
  }

  double cost(int j, bool phase1) const {
    if (phase1) return j < n_ ? 0.0 : 1.0;
    return j < n_ ? -t_[j] : 0.0;
  }

  double upper(int j, bool phase1) const {
    if (j < n_) return 1.0;
    return phase1 ? std::numeric_limits<double>::infinity() : 0.0;
  }

  void init() {
    status_.assign(n_ + d_, Status::kLower);
    art_sign_.resize(d_);
    basis_.resize(d_);
    for (int r = 0; r < d_; ++r) {
      art_sign_[r] = b_[r] >= 0.0 ? 1.0 : -1.0;
      basis_[r] = n_ + r;
      status_[n_ + r] = Status::kBasic;
    }
  }

  // Basic values from scratch each iteration; avoids incremental drift.
  void refresh(Eigen::PartialPivLU<Eigen::MatrixXd>& lu,
               Eigen::VectorXd& x_basic) {
    Eigen::MatrixXd B(d_, d_);
    for (int r = 0; r < d_; ++r) B.col(r) = column(basis_[r]);
    lu.compute(B);
    Eigen::VectorXd rhs = b_;
    for (int j = 0; j < n_; ++j)
      if (status_[j] == Status::kUpper) rhs -= M_.row(j).transpose();
    x_basic = lu.solve(rhs);
  }

  double artificial_mass() {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::VectorXd x_basic;
    refresh(lu, x_basic);
    double mass = 0.0;
    for (int r = 0; r < d_; ++r)
      if (basis_[r] >= n_) mass += std::abs(x_basic[r]);
    return mass;
  }

  // Degenerate pivots replacing any artificial still in the basis with a real
  // column; possible whenever M has full column rank.
  void expel_artificials() {
    for (int r = 0; r < d_; ++r) {
      if (basis_[r] < n_) continue;
      Eigen::MatrixXd B(d_, d_);
      for (int s = 0; s < d_; ++s) B.col(s) = column(basis_[s]);
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
      bool replaced = false;
      for (int j = 0; j < n_ && !replaced; ++j) {
        if (status_[j] == Status::kBasic) continue;
        Eigen::VectorXd w = lu.solve(column(j));
        if (std::abs(w[r]) > 1e-7) {
          status_[basis_[r]] = Status::kLower;
          basis_[r] = j;
          status_[j] = Status::kBasic;
          replaced = true;
        }
      }
      if (!replaced)
        throw NonConvergenceError("check-loss LP: singular working basis");
    }
  }

  void run_phase(bool phase1) {
    const int max_iter = 200 * (n_ + d_ + 10);
    constexpr double kRcTol = 1e-9;
    constexpr double kPivTol = 1e-11;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::VectorXd x_basic;
    bool bland = false;
    double last_obj = std::numeric_limits<double>::infinity();
    int stall = 0;

    for (int iter = 0; iter < max_iter; ++iter) {
      refresh(lu, x_basic);

      Eigen::VectorXd c_basic(d_);
      for (int r = 0; r < d_; ++r) c_basic[r] = cost(basis_[r], phase1);
      const double obj_now = c_basic.dot(x_basic);
      if (obj_now < last_obj - 1e-12) {
        stall = 0;
      } else if (++stall > 50) {
        bland = true;  // anti-cycling fallback
      }
      last_obj = obj_now;

      Eigen::VectorXd y = lu.transpose().solve(c_basic);

      // Entering variable: Dantzig (most attractive reduced cost) until the
      // stall counter trips Bland's rule.  Artificials never re-enter.
      int enter = -1;
      double sigma = 1.0, best = -kRcTol;
      for (int j = 0; j < n_; ++j) {
        if (status_[j] == Status::kBasic) continue;
        const double rc = cost(j, phase1) - y.dot(M_.row(j).transpose());
        const bool at_lower = status_[j] == Status::kLower;
        const double attract = at_lower ? -rc : rc;
        if (attract > kRcTol) {
          if (bland) {
            enter = j;
            sigma = at_lower ? 1.0 : -1.0;
            break;
          }
          if (attract > best) {
            best = attract;
            enter = j;
            sigma = at_lower ? 1.0 : -1.0;
          }
        }
      }
      if (enter < 0) return;  // phase optimal

      Eigen::VectorXd w = sigma * lu.solve(column(enter));

      // Ratio test over basic rows plus the entering variable's own span.
      double step = upper(enter, phase1);  // bound-to-bound flip distance
      int leave_row = -1;
      double leave_bound = 0.0;
      for (int r = 0; r < d_; ++r) {
        const int jb = basis_[r];
        double limit;
        double bound;
        if (w[r] > kPivTol) {
          limit = x_basic[r] / w[r];
          bound = 0.0;  // leaves at lower
        } else if (w[r] < -kPivTol) {
          const double ub = upper(jb, phase1);
          if (!std::isfinite(ub)) continue;
          limit = (ub - x_basic[r]) / (-w[r]);
          bound = ub;
        } else {
          continue;
        }
        if (limit < -1e-9) limit = 0.0;
        limit = std::max(limit, 0.0);
        // Prefer leaving over flipping on ties so artificials exit; break
        // remaining ties toward artificials, then lowest variable index.
        const bool better =
            limit < step - 1e-12 ||
            (limit < step + 1e-12 &&
             (leave_row < 0 ||
              (basis_[r] >= n_ && basis_[leave_row] < n_) ||
              ((basis_[r] >= n_) == (basis_[leave_row] >= n_) &&
               basis_[r] < basis_[leave_row])));
        if (better) {
          step = std::min(step, limit);
          leave_row = r;
          leave_bound = bound;
        }
      }

      if (leave_row < 0) {
        if (!std::isfinite(step))
          throw NonConvergenceError("check-loss LP: unbounded direction");
        // Bound flip: entering variable crosses to its other bound.
        status_[enter] = status_[enter] == Status::kLower ? Status::kUpper
                                                         : Status::kLower;
        continue;
      }

      const int old = basis_[leave_row];
      status_[old] = leave_bound == 0.0 ? Status::kLower : Status::kUpper;
      basis_[leave_row] = enter;
      status_[enter] = Status::kBasic;
    }
    throw NonConvergenceError("check-loss LP: iteration cap reached");
  }

  Eigen::VectorXd recover_beta() const {
    Eigen::MatrixXd Mb(d_, d_);
    Eigen::VectorXd tb(d_);
    for (int r = 0; r < d_; ++r) {
      if (basis_[r] >= n_)
        throw NonConvergenceError("check-loss LP: artificial in final basis");
      Mb.row(r) = M_.row(basis_[r]);
      tb[r] = t_[basis_[r]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Mb);
    if (!lu.isInvertible())
      throw NonConvergenceError("check-loss LP: singular interpolation set");
    return lu.solve(tb);
  }

  const Eigen::VectorXd& t_;
  const Eigen::MatrixXd& M_;
  int n_, d_;
  Eigen::VectorXd b_;
  std::vector<double> art_sign_;
  std::vector<int> basis_;
  std::vector<Status> status_;
};

double sample_quantile_type7(std::vector<double> x, double level) {
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

}  // namespace

Eigen::VectorXd fit_quantile_regression(const Eigen::VectorXd& t,
                                        const Eigen::MatrixXd& M, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ConfigError("fit_quantile_regression: p must be in (0,1)");
  if (t.size() != M.rows())
    throw DataError("fit_quantile_regression: target/design length mismatch");
  if (M.rows() < M.cols())
    throw DataError("fit_quantile_regression: fewer rows than coefficients");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  qr.setThreshold(1e-10);
  if (qr.rank() < M.cols())
    throw DataError("fit_quantile_regression: design matrix is rank deficient");
  return CheckLossLp(t, M, p).solve();
}

SplineBasis SplineBasis::cubic_from_quantiles(std::span<const double> x,
                                              std::span<const double> levels) {
  if (x.size() < 2) throw DataError("spline basis: need at least two points");
  const auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
  const double mn = *mn_it, mx = *mx_it;
  if (!(mx > mn)) throw DataError("spline basis: constant covariate");
  SplineBasis out;
  out.degree_ = 3;
  for (int r = 0; r <= out.degree_; ++r) out.knots_.push_back(mn);
  std::vector<double> xs(x.begin(), x.end());
  for (double lv : levels) {
    const double q = sample_quantile_type7(xs, lv);
    if (q > mn && q < mx) out.knots_.push_back(q);
  }
  std::sort(out.knots_.begin() + out.degree_ + 1, out.knots_.end());
  for (int r = 0; r <= out.degree_; ++r) out.knots_.push_back(mx);
  return out;
}

Eigen::RowVectorXd SplineBasis::row(double x) const {
  const auto& U = knots_;
  const int p = degree_;
  const int nb = size();
  const double lo = U.front(), hi = U.back();
  double u = std::clamp(x, lo, hi);

  // Knot span index: largest i with U[i] <= u < U[i+1], right-closed at hi.
  int span;
  if (u >= hi) {
    span = nb - 1;
  } else {
    span = static_cast<int>(std::upper_bound(U.begin(), U.end(), u) -
                            U.begin()) -
           1;
    span = std::clamp(span, p, nb - 1);
  }

  // Cox-de Boor over the p+1 functions alive on the span.
  std::vector<double> N(p + 1, 0.0), left(p + 1, 0.0), right(p + 1, 0.0);
  N[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - U[span + 1 - j];
    right[j] = U[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = N[r] / (right[r + 1] + left[j - r]);
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }

  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(nb);
  for (int r = 0; r <= p; ++r) out[span - p + r] = N[r];
  return out;
}

CovariateBasis CovariateBasis::linear() {
  CovariateBasis b;
  b.kind = BasisKind::kLinear;
  return b;
}

CovariateBasis CovariateBasis::cubic_spline(const Eigen::MatrixXd& X) {
  if (X.cols() != 2)
    throw ConfigError(
        "spline basis expects one covariate beside the intercept");
  CovariateBasis b;
  b.kind = BasisKind::kSpline;
  std::vector<double> x(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) x[i] = X(i, 1);
  b.spline = SplineBasis::cubic_from_quantiles(x);
  return b;
}

Eigen::RowVectorXd CovariateBasis::row(const Eigen::RowVectorXd& x_raw) const {
  if (kind == BasisKind::kLinear) return x_raw;
  if (x_raw.size() != 2)
    throw DataError("spline basis row: expected (intercept, x)");
  return spline.row(x_raw[1]);
}

Eigen::MatrixXd CovariateBasis::design(const Eigen::MatrixXd& X) const {
  if (kind == BasisKind::kLinear) return X;
  Eigen::MatrixXd out(X.rows(), spline.size());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.row(i) = row(X.row(i));
  return out;
}

QuantileFit fit_jittered(const Dataset& data, double p,
                         const CovariateBasis& basis, int m_jitter,
                         RngStream& rng, double varsigma) {
  if (!(p > 0.0 && p < 1.0))
    throw ConfigError("fit_jittered: p must be in (0,1)");
  if (m_jitter < 1) throw ConfigError("fit_jittered: m_jitter must be >= 1");
  data.validate();

  const Eigen::MatrixXd design = basis.design(data.X);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(design.cols());
  Eigen::VectorXd t(data.n());
  for (int rep = 0; rep < m_jitter; ++rep) {
    const std::vector<double> z = jitter(data.y, rng);
    for (int i = 0; i < data.n(); ++i) t[i] = transform(z[i], p, varsigma);
    acc += fit_quantile_regression(t, design, p);
  }

  QuantileFit fit;
  fit.p = p;
  fit.beta = acc / static_cast<double>(m_jitter);
  fit.basis = basis;
  fit.m_jitter = m_jitter;
  return fit;
}

long estimate_count_quantile(const Eigen::RowVectorXd& x_raw,
                             const QuantileFit& fit) {
  // Linear predictor capped so extrapolation blow-ups stay representable.
  const double eta = std::min(fit.basis.row(x_raw).dot(fit.beta), 34.5);
  const double qz = fit.p + std::exp(eta);
  const double q = std::ceil(qz - 1.0);
  return q <= 0.0 ? 0L : static_cast<long>(q);
}

std::vector<CrossingViolation> detect_crossing(
    const std::vector<QuantileFit>& fits, const Eigen::MatrixXd& x_grid) {
  std::vector<int> order(fits.size());
  for (std::size_t i = 0; i < fits.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return fits[a].p < fits[b].p; });

  Eigen::MatrixXi q(x_grid.rows(), static_cast<Eigen::Index>(fits.size()));
  for (Eigen::Index g = 0; g < x_grid.rows(); ++g)
    for (std::size_t f = 0; f < fits.size(); ++f)
      q(g, static_cast<Eigen::Index>(f)) = static_cast<int>(
          estimate_count_quantile(x_grid.row(g), fits[order[f]]));

  std::vector<CrossingViolation> out;
  for (Eigen::Index g = 0; g < x_grid.rows(); ++g)
    for (std::size_t lo = 0; lo < fits.size(); ++lo)
      for (std::size_t hi = lo + 1; hi < fits.size(); ++hi)
        if (q(g, static_cast<Eigen::Index>(lo)) >
            q(g, static_cast<Eigen::Index>(hi)))
          out.push_back(CrossingViolation{g, fits[order[lo]].p,
                                          fits[order[hi]].p});
  return out;
}

}  // namespace countreg
