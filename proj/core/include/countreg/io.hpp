// Apache License, Version 2.0, refer to LICENSE.txt
//
// CSV/JSON ingestion and emission: datasets, fitted-model bundles, quantile
// curves, chain summaries, and the reproducibility manifest.  All output is
// deterministic — no timestamps, fixed float formatting — so identical runs
// produce identical bytes.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "countreg/data.hpp"
#include "countreg/dpm.hpp"

namespace countreg {

inline constexpr char kVersion[] = "0.1.0";

// Shortest representation that round-trips a double exactly.
std::string format_double(double v);

// Affine per-covariate map (x - center) / scale fitted on the non-intercept
// columns; constant columns keep scale 1 so they pass through unchanged.
struct Standardizer {
  Eigen::VectorXd center;  // one entry per covariate column (intercept excluded)
  Eigen::VectorXd scale;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
  Eigen::RowVectorXd apply_row(const Eigen::RowVectorXd& x) const;
  bool identity() const;
};

Standardizer fit_standardizer(const Eigen::MatrixXd& X);
Standardizer identity_standardizer(Eigen::Index covariates);

struct CsvSpec {
  std::string count_column = "count";
  // Empty means every non-count column, in header order.
  std::vector<std::string> covariate_columns;
};

struct LoadedData {
  Dataset raw;  // intercept column prepended, covariates on their input scale
  Standardizer standardizer;  // fitted on raw; apply to get the model scale
  std::vector<std::string> covariate_names;

  Dataset standardized() const;
};

// Parses a headed CSV of one count column plus real covariates.  Errors carry
// the 1-based file line number.  No quoting support: fields are split on ','.
LoadedData load_csv(const std::string& path, const CsvSpec& spec);
LoadedData load_csv_stream(std::istream& is, const CsvSpec& spec,
                           const std::string& origin);

void write_dataset_csv(std::ostream& os, const Dataset& raw,
                       const std::vector<std::string>& covariate_names,
                       const std::string& count_column = "count");

// Everything needed to predict later without refitting.
struct FitBundle {
  Hyperparams hyper;
  Dataset data;  // covariates on the scale the chain saw (post-standardizer)
  PosteriorDraws draws;
  Standardizer standardizer;
  std::vector<std::string> covariate_names;
  std::string count_column = "count";
};

void save_fit_json(const std::string& path, const FitBundle& bundle);
FitBundle load_fit_json(const std::string& path);

// One row per (grid point, level): raw-scale covariates, p, quantile.
void write_quantile_curves_csv(std::ostream& os,
                               const Eigen::MatrixXd& x_raw,
                               const std::vector<std::string>& covariate_names,
                               const std::vector<double>& p_list,
                               const Eigen::MatrixXi& q);

// Long-format series: cluster-count trace and acceptance rates.
void write_posterior_summary_csv(std::ostream& os,
                                 const ChainDiagnostics& diag);

struct GridSpec {
  std::string column;  // empty: first covariate
  int points = 50;
  // NaN bounds mean "use the observed range".
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
};

struct RunConfig {
  std::string mode;  // fit | predict | benchmark | simulate
  std::string data_path;
  CsvSpec csv;
  Hyperparams hyper;
  std::vector<double> quantile_levels{0.1, 0.5, 0.9};
  GridSpec grid;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool standardize = true;
  // Location-weight anchors (fit and benchmark modes): place gamma on this
  // many covariate-spread subjects. -1 keeps the mode's default behavior
  // (uniform gamma in fit, the benchmark harness default otherwise); 0
  // disables anchoring explicitly.
  int gamma_anchors = -1;
  bool hyper_from_config = false;  // config file carried a "hyper" object

  // simulate mode
  std::string scenario = "binomial";
  int simulate_n = 100;

  // benchmark mode
  std::vector<std::string> bench_scenarios{"binomial", "mixture"};
  std::vector<int> bench_sizes{100, 500};
  int bench_replications = 5;
  int m_jitter = 100;

  void validate() const;
};

RunConfig load_config_json(const std::string& path);
// Flag overrides applied on top of a config file (empty/absent means keep).
void write_manifest_json(const std::string& path, const RunConfig& config,
                         const std::vector<std::string>& outputs);

// Opens for writing, throwing IoError with the path on failure.
void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

}  // namespace countreg
