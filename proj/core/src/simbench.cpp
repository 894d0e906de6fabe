// Apache License, Version 2.0, refer to LICENSE.txt

#include "countreg/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "countreg/errors.hpp"
#include "countreg/io.hpp"
#include "countreg/jitter.hpp"
#include "countreg/predictive.hpp"

namespace countreg {

namespace {

double binomial_pmf(long y, long m, double q) {
  if (y < 0 || y > m) return 0.0;
  if (q <= 0.0) return y == 0 ? 1.0 : 0.0;
  if (q >= 1.0) return y == m ? 1.0 : 0.0;
  const double lc = std::lgamma(m + 1.0) - std::lgamma(y + 1.0) -
                    std::lgamma(m - y + 1.0);
  return std::exp(lc + y * std::log(q) + (m - y) * std::log1p(-q));
}

double binomial_cdf(long y, long m, double q) {
  if (y < 0) return 0.0;
  double c = 0.0;
  for (long j = 0; j <= std::min(y, m); ++j) c += binomial_pmf(j, m, q);
  return std::min(c, 1.0);
}

double poisson_cdf(long y, double lambda) {
  if (y < 0) return 0.0;
  double c = 0.0;
  for (long j = 0; j <= y; ++j)
    c += std::exp(-lambda + j * std::log(lambda) - std::lgamma(j + 1.0));
  return std::min(c, 1.0);
}

double geometric_cdf(long y, double p_success) {
  if (y < 0) return 0.0;
  return 1.0 - std::pow(1.0 - p_success, static_cast<double>(y) + 1.0);
}

void check_x(double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw DataError("scenario covariate must lie in [0,1]");
}

int count_crossings(const Eigen::MatrixXi& q) {
  int bad = 0;
  for (Eigen::Index g = 0; g < q.rows(); ++g)
    for (Eigen::Index a = 0; a < q.cols(); ++a)
      for (Eigen::Index b = a + 1; b < q.cols(); ++b)
        if (q(g, a) > q(g, b)) ++bad;
  return bad;
}

}  // namespace

std::string scenario_name(ScenarioKind kind) {
  return kind == ScenarioKind::kBinomial ? "binomial" : "mixture";
}

Hyperparams benchmark_hyper_defaults() {
  Hyperparams h;
  h.prior_sd_c = 0.8;
  h.a = 0.3;
  h.psi = 4.0;
  h.n_iter = 4000;
  h.burn_in = 2000;
  h.thin = 2;
  return h;
}

Dataset generate(const Scenario& scenario, RngStream& rng) {
  if (scenario.n <= 0) throw ConfigError("generate: n must be positive");
  Dataset data;
  data.y.resize(scenario.n);
  data.X.resize(scenario.n, 2);
  for (int i = 0; i < scenario.n; ++i) {
    const double x = rng.uniform();
    data.X(i, 0) = 1.0;
    data.X(i, 1) = x;
    if (scenario.kind == ScenarioKind::kBinomial) {
      data.y[i] = rng.binomial(10, 0.3 * x);
    } else {
      const double u = rng.uniform();
      if (u < 0.4) {
        data.y[i] = rng.poisson(std::exp(1.0 + x));
      } else if (u < 0.6) {
        data.y[i] = rng.binomial(10, 1.0 - x);
      } else {
        data.y[i] = rng.geometric(0.2);
      }
    }
  }
  return data;
}

double scenario_cdf(ScenarioKind kind, long y, double x) {
  check_x(x);
  if (kind == ScenarioKind::kBinomial) return binomial_cdf(y, 10, 0.3 * x);
  return 0.4 * poisson_cdf(y, std::exp(1.0 + x)) +
         0.2 * binomial_cdf(y, 10, 1.0 - x) + 0.4 * geometric_cdf(y, 0.2);
}

long true_quantile(ScenarioKind kind, double p, double x) {
  if (!(p > 0.0 && p < 1.0))
    throw ConfigError("true_quantile: p must be in (0,1)");
  check_x(x);
  constexpr long kCap = 10000000;
  for (long y = 0; y < kCap; ++y)
    if (scenario_cdf(kind, y, x) >= p) return y;
  throw NonConvergenceError("true_quantile: scan cap reached");
}

double mae(std::span<const long> estimates, std::span<const long> truths) {
  if (estimates.size() != truths.size() || estimates.empty())
    throw DataError("mae: length mismatch or empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i)
    acc += std::abs(static_cast<double>(estimates[i] - truths[i]));
  return acc / static_cast<double>(estimates.size());
}

namespace {

constexpr double kLevels[] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
constexpr int kNumLevels = 9;
constexpr int kGridLevelIdx[] = {0, 4, 8};  // p = 0.1, 0.5, 0.9

struct CellMetrics {
  double mae_xp = 0.0;
  double mae_grid[3] = {0.0, 0.0, 0.0};
  int crossings = 0;
};

// Shared evaluation design: the 9 level-matched points x = p first, then the
// secondary x grid.
Eigen::MatrixXd eval_grid(int grid_points) {
  Eigen::MatrixXd g(kNumLevels + grid_points, 2);
  for (int j = 0; j < kNumLevels; ++j) {
    g(j, 0) = 1.0;
    g(j, 1) = kLevels[j];
  }
  for (int i = 0; i < grid_points; ++i) {
    g(kNumLevels + i, 0) = 1.0;
    g(kNumLevels + i, 1) = (i + 0.5) / static_cast<double>(grid_points);
  }
  return g;
}

CellMetrics metrics_from_quantiles(const Eigen::MatrixXi& q,
                                   const Eigen::MatrixXd& grid,
                                   ScenarioKind kind) {
  CellMetrics m;
  std::vector<long> est, truth;
  for (int j = 0; j < kNumLevels; ++j) {
    est.push_back(q(j, j));
    truth.push_back(true_quantile(kind, kLevels[j], kLevels[j]));
  }
  m.mae_xp = mae(est, truth);
  for (int t = 0; t < 3; ++t) {
    const int lj = kGridLevelIdx[t];
    est.clear();
    truth.clear();
    for (Eigen::Index g = kNumLevels; g < grid.rows(); ++g) {
      est.push_back(q(g, lj));
      truth.push_back(true_quantile(kind, kLevels[lj], grid(g, 1)));
    }
    m.mae_grid[t] = mae(est, truth);
  }
  m.crossings = count_crossings(q);
  return m;
}

void emit(std::vector<BenchmarkRow>& rows, const std::string& scen, int n,
          const std::string& method, std::uint64_t seed,
          const CellMetrics& m) {
  rows.push_back({scen, n, method, "mae_xp", m.mae_xp, seed});
  rows.push_back({scen, n, method, "mae_grid_p0.1", m.mae_grid[0], seed});
  rows.push_back({scen, n, method, "mae_grid_p0.5", m.mae_grid[1], seed});
  rows.push_back({scen, n, method, "mae_grid_p0.9", m.mae_grid[2], seed});
  rows.push_back({scen, n, method, "crossing_count",
                  static_cast<double>(m.crossings), seed});
}

}  // namespace

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config,
                                        std::ostream* progress) {
  if (config.replications < 1)
    throw ConfigError("run_benchmark: replications must be >= 1");
  config.hyper.validate();

  const Eigen::MatrixXd grid = eval_grid(config.grid_points);
  const std::vector<double> levels(kLevels, kLevels + kNumLevels);
  std::vector<BenchmarkRow> rows;
  RngStream master(config.master_seed);

  for (std::size_t si = 0; si < config.scenarios.size(); ++si) {
    for (std::size_t ni = 0; ni < config.sizes.size(); ++ni) {
      for (int rep = 0; rep < config.replications; ++rep) {
        const std::uint64_t cell_index =
            (si * 64 + ni) * 1024 + static_cast<std::uint64_t>(rep);
        RngStream cell = master.derive(cell_index);
        const std::uint64_t cell_seed = cell.seed();
        const Scenario scen{config.scenarios[si], config.sizes[ni]};
        const std::string name = scenario_name(scen.kind);
        if (progress)
          *progress << "[bench] " << name << " n=" << scen.n
                    << " rep=" << rep << std::endl;

        RngStream data_rng = cell.derive(1);
        const Dataset data = generate(scen, data_rng);

        if (config.run_bdr) {
          Hyperparams hyper = config.hyper;
          hyper.seed = cell.derive(2).seed();
          if (config.gamma_anchors > 0)
            hyper.gamma =
                anchor_gamma(data.X, std::min(config.gamma_anchors, data.n()));
          const PosteriorDraws draws = run_chain(data, hyper);
          const QuantileCurves curves =
              quantile_curves(grid, levels, draws, data, hyper,
                              cell.derive(3).seed());
          emit(rows, name, scen.n, "bdr", cell_seed,
               metrics_from_quantiles(curves.q, grid, scen.kind));
        }

        for (int variant = 0; variant < 2; ++variant) {
          const bool spline = variant == 1;
          if (spline ? !config.run_jitter_spline : !config.run_jitter_linear)
            continue;
          RngStream jr = cell.derive(4 + variant);
          const CovariateBasis basis = spline
                                           ? CovariateBasis::cubic_spline(data.X)
                                           : CovariateBasis::linear();
          std::vector<QuantileFit> fits;
          for (int j = 0; j < kNumLevels; ++j)
            fits.push_back(fit_jittered(data, kLevels[j], basis,
                                        config.m_jitter, jr));
          Eigen::MatrixXi q(grid.rows(), kNumLevels);
          for (Eigen::Index g = 0; g < grid.rows(); ++g)
            for (int j = 0; j < kNumLevels; ++j)
              q(g, j) = static_cast<int>(
                  estimate_count_quantile(grid.row(g), fits[j]));
          emit(rows, name, scen.n, spline ? "jitter_spline" : "jitter_linear",
               cell_seed, metrics_from_quantiles(q, grid, scen.kind));
        }
      }
    }
  }
  return rows;
}

void write_benchmark_csv(std::ostream& os,
                         std::span<const BenchmarkRow> rows) {
  os << "scenario,n,method,metric,value,seed\n";
  for (const BenchmarkRow& r : rows)
    os << r.scenario << ',' << r.n << ',' << r.method << ',' << r.metric
       << ',' << format_double(r.value) << ',' << r.seed << '\n';
}

}  // namespace countreg
