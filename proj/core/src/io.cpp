// Apache License, Version 2.0, refer to LICENSE.txt

#include "countreg/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "countreg/errors.hpp"

namespace countreg {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest form that still round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof probe, "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  return buf;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& X) const {
  if (X.cols() != center.size() + 1)
    throw DataError("standardizer: column-count mismatch");
  Eigen::MatrixXd out = X;
  for (Eigen::Index c = 0; c < center.size(); ++c)
    out.col(c + 1) = (X.col(c + 1).array() - center[c]) / scale[c];
  return out;
}

Eigen::RowVectorXd Standardizer::apply_row(const Eigen::RowVectorXd& x) const {
  if (x.size() != center.size() + 1)
    throw DataError("standardizer: row-length mismatch");
  Eigen::RowVectorXd out = x;
  for (Eigen::Index c = 0; c < center.size(); ++c)
    out[c + 1] = (x[c + 1] - center[c]) / scale[c];
  return out;
}

bool Standardizer::identity() const {
  return center.isZero(0.0) && (scale.array() == 1.0).all();
}

Standardizer fit_standardizer(const Eigen::MatrixXd& X) {
  const Eigen::Index d = X.cols() - 1;
  Standardizer s;
  s.center.resize(d);
  s.scale.resize(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    const auto col = X.col(c + 1);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    s.center[c] = mean;
    s.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Standardizer identity_standardizer(Eigen::Index covariates) {
  Standardizer s;
  s.center = Eigen::VectorXd::Zero(covariates);
  s.scale = Eigen::VectorXd::Ones(covariates);
  return s;
}

Dataset LoadedData::standardized() const {
  Dataset out = raw;
  out.X = standardizer.apply(raw.X);
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

long parse_count(const std::string& fld, const std::string& origin, int line) {
  const std::string s = trim(fld);
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end == nullptr || *end != '\0' || errno == ERANGE)
    throw DataError(origin + ":" + std::to_string(line) +
                    ": count is not an integer: '" + s + "'");
  if (v < 0)
    throw DataError(origin + ":" + std::to_string(line) +
                    ": negative count: " + s);
  return v;
}

double parse_real(const std::string& fld, const std::string& origin,
                  int line) {
  const std::string s = trim(fld);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end == nullptr || *end != '\0' || errno == ERANGE)
    throw DataError(origin + ":" + std::to_string(line) +
                    ": covariate is not a number: '" + s + "'");
  return v;
}

json eigen_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd eigen_from_json(const json& j) {
  const auto nr = static_cast<Eigen::Index>(j.size());
  const auto nc =
      nr == 0 ? 0 : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(nr, nc);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index c = 0; c < nc; ++c)
      m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json hyper_to_json(const Hyperparams& h) {
  json j{{"prior_sd_b", h.prior_sd_b},
         {"prior_sd_c", h.prior_sd_c},
         {"a", h.a},
         {"psi", h.psi},
         {"burn_in", h.burn_in},
         {"n_iter", h.n_iter},
         {"thin", h.thin},
         {"seed", h.seed},
         {"warmup_atom_updates", h.warmup_atom_updates},
         {"step_b", h.proposal.step_b},
         {"step_c", h.proposal.step_c},
         {"target_accept", h.proposal.target_accept}};
  if (h.gamma.size() > 0) j["gamma"] = vec_to_json(h.gamma);
  return j;
}

Hyperparams hyper_from_json(const json& j) {
  Hyperparams h;
  h.prior_sd_b = j.value("prior_sd_b", h.prior_sd_b);
  h.prior_sd_c = j.value("prior_sd_c", h.prior_sd_c);
  h.a = j.value("a", h.a);
  h.psi = j.value("psi", h.psi);
  h.burn_in = j.value("burn_in", h.burn_in);
  h.n_iter = j.value("n_iter", h.n_iter);
  h.thin = j.value("thin", h.thin);
  h.seed = j.value("seed", h.seed);
  h.warmup_atom_updates =
      j.value("warmup_atom_updates", h.warmup_atom_updates);
  h.proposal.step_b = j.value("step_b", h.proposal.step_b);
  h.proposal.step_c = j.value("step_c", h.proposal.step_c);
  h.proposal.target_accept = j.value("target_accept", h.proposal.target_accept);
  if (j.contains("gamma")) h.gamma = vec_from_json(j.at("gamma"));
  return h;
}

json config_to_json(const RunConfig& c) {
  json j{{"mode", c.mode},
         {"data", c.data_path},
         {"count_column", c.csv.count_column},
         {"covariate_columns", c.csv.covariate_columns},
         {"hyper", hyper_to_json(c.hyper)},
         {"quantile_levels", c.quantile_levels},
         {"grid",
          {{"column", c.grid.column},
           {"points", c.grid.points}}},
         {"out", c.out_dir},
         {"seed", c.seed},
         {"standardize", c.standardize},
         {"gamma_anchors", c.gamma_anchors},
         {"scenario", c.scenario},
         {"simulate_n", c.simulate_n},
         {"bench_scenarios", c.bench_scenarios},
         {"bench_sizes", c.bench_sizes},
         {"bench_replications", c.bench_replications},
         {"m_jitter", c.m_jitter}};
  if (std::isfinite(c.grid.min)) j["grid"]["min"] = c.grid.min;
  if (std::isfinite(c.grid.max)) j["grid"]["max"] = c.grid.max;
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.mode = j.value("mode", c.mode);
  c.data_path = j.value("data", c.data_path);
  c.csv.count_column = j.value("count_column", c.csv.count_column);
  c.csv.covariate_columns =
      j.value("covariate_columns", c.csv.covariate_columns);
  if (j.contains("hyper")) c.hyper = hyper_from_json(j.at("hyper"));
  c.quantile_levels = j.value("quantile_levels", c.quantile_levels);
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    c.grid.column = g.value("column", c.grid.column);
    c.grid.points = g.value("points", c.grid.points);
    c.grid.min = g.value("min", c.grid.min);
    c.grid.max = g.value("max", c.grid.max);
  }
  c.out_dir = j.value("out", c.out_dir);
  c.seed = j.value("seed", c.seed);
  c.standardize = j.value("standardize", c.standardize);
  c.gamma_anchors = j.value("gamma_anchors", c.gamma_anchors);
  c.hyper_from_config = j.contains("hyper");
  c.scenario = j.value("scenario", c.scenario);
  c.simulate_n = j.value("simulate_n", c.simulate_n);
  c.bench_scenarios = j.value("bench_scenarios", c.bench_scenarios);
  c.bench_sizes = j.value("bench_sizes", c.bench_sizes);
  c.bench_replications = j.value("bench_replications", c.bench_replications);
  c.m_jitter = j.value("m_jitter", c.m_jitter);
  return c;
}

}  // namespace

LoadedData load_csv_stream(std::istream& is, const CsvSpec& spec,
                           const std::string& origin) {
  std::string line;
  if (!std::getline(is, line))
    throw DataError(origin + ": empty file, expected a header row");
  const std::vector<std::string> header = split_csv_line(line);
  std::vector<std::string> names;
  for (const std::string& h : header) names.push_back(trim(h));

  auto find_col = [&](const std::string& want) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == want) return static_cast<int>(i);
    throw DataError(origin + ": missing column '" + want + "'");
  };

  const int count_idx = find_col(spec.count_column);
  std::vector<int> cov_idx;
  std::vector<std::string> cov_names;
  if (spec.covariate_columns.empty()) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (static_cast<int>(i) != count_idx) {
        cov_idx.push_back(static_cast<int>(i));
        cov_names.push_back(names[i]);
      }
  } else {
    for (const std::string& want : spec.covariate_columns) {
      cov_idx.push_back(find_col(want));
      cov_names.push_back(want);
    }
  }
  if (cov_idx.empty())
    throw DataError(origin + ": no covariate columns");

  std::vector<long> y;
  std::vector<std::vector<double>> xrows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != names.size())
      throw DataError(origin + ":" + std::to_string(lineno) +
                      ": expected " + std::to_string(names.size()) +
                      " fields, got " + std::to_string(fields.size()));
    y.push_back(parse_count(fields[count_idx], origin, lineno));
    std::vector<double> row;
    for (int ci : cov_idx) row.push_back(parse_real(fields[ci], origin, lineno));
    xrows.push_back(std::move(row));
  }
  if (y.empty()) throw DataError(origin + ": no data rows");

  LoadedData out;
  out.raw.y = std::move(y);
  out.raw.X.resize(static_cast<Eigen::Index>(out.raw.y.size()),
                   static_cast<Eigen::Index>(cov_idx.size()) + 1);
  for (Eigen::Index i = 0; i < out.raw.X.rows(); ++i) {
    out.raw.X(i, 0) = 1.0;
    for (std::size_t c = 0; c < cov_idx.size(); ++c)
      out.raw.X(i, static_cast<Eigen::Index>(c) + 1) =
          xrows[static_cast<std::size_t>(i)][c];
  }
  out.raw.validate();
  out.standardizer = fit_standardizer(out.raw.X);
  out.covariate_names = std::move(cov_names);
  return out;
}

LoadedData load_csv(const std::string& path, const CsvSpec& spec) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open data file: " + path);
  return load_csv_stream(is, spec, path);
}

void write_dataset_csv(std::ostream& os, const Dataset& raw,
                       const std::vector<std::string>& covariate_names,
                       const std::string& count_column) {
  if (static_cast<Eigen::Index>(covariate_names.size()) + 1 != raw.X.cols())
    throw DataError("write_dataset_csv: name/column mismatch");
  os << count_column;
  for (const std::string& n : covariate_names) os << ',' << n;
  os << '\n';
  for (int i = 0; i < raw.n(); ++i) {
    os << raw.y[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 1; c < raw.X.cols(); ++c)
      os << ',' << format_double(raw.X(i, c));
    os << '\n';
  }
}

void save_fit_json(const std::string& path, const FitBundle& bundle) {
  json snaps = json::array();
  for (const Snapshot& s : bundle.draws.snapshots) {
    json atoms = json::array();
    for (const RegressionAtom& a : s.atoms)
      atoms.push_back(json{{"b", vec_to_json(a.b)}, {"c", vec_to_json(a.c)}});
    snaps.push_back(json{{"iteration", s.iteration},
                         {"S", s.S},
                         {"C", s.C},
                         {"atoms", std::move(atoms)}});
  }
  const ChainDiagnostics& d = bundle.draws.diagnostics;
  json j{{"version", kVersion},
         {"hyper", hyper_to_json(bundle.hyper)},
         {"count_column", bundle.count_column},
         {"covariate_names", bundle.covariate_names},
         {"y", bundle.data.y},
         {"X", eigen_to_json(bundle.data.X)},
         {"kernel",
          {{"center", vec_to_json(bundle.draws.kernel.center)},
           {"scale", vec_to_json(bundle.draws.kernel.scale)}}},
         {"standardizer",
          {{"center", vec_to_json(bundle.standardizer.center)},
           {"scale", vec_to_json(bundle.standardizer.scale)}}},
         {"snapshots", std::move(snaps)},
         {"diagnostics",
          {{"cluster_count_trace", d.cluster_count_trace},
           {"accept_rate_b", d.accept_rate_b},
           {"accept_rate_c", d.accept_rate_c},
           {"accept_rate_alloc", d.accept_rate_alloc},
           {"final_scale_b", d.final_scale_b},
           {"final_scale_c", d.final_scale_c}}}};
  write_text_file(path, j.dump(1) + "\n");
}

FitBundle load_fit_json(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("fit file " + path + ": " + e.what());
  }
  FitBundle b;
  try {
    b.hyper = hyper_from_json(j.at("hyper"));
    b.count_column = j.value("count_column", std::string("count"));
    b.covariate_names =
        j.at("covariate_names").get<std::vector<std::string>>();
    b.data.y = j.at("y").get<std::vector<long>>();
    b.data.X = eigen_from_json(j.at("X"));
    b.draws.kernel.center = vec_from_json(j.at("kernel").at("center"));
    b.draws.kernel.scale = vec_from_json(j.at("kernel").at("scale"));
    b.standardizer.center = vec_from_json(j.at("standardizer").at("center"));
    b.standardizer.scale = vec_from_json(j.at("standardizer").at("scale"));
    for (const json& js : j.at("snapshots")) {
      Snapshot s;
      s.iteration = js.at("iteration").get<int>();
      s.S = js.at("S").get<std::vector<int>>();
      s.C = js.at("C").get<std::vector<int>>();
      for (const json& ja : js.at("atoms")) {
        RegressionAtom a;
        a.b = vec_from_json(ja.at("b"));
        a.c = vec_from_json(ja.at("c"));
        s.atoms.push_back(std::move(a));
      }
      b.draws.snapshots.push_back(std::move(s));
    }
    const json& jd = j.at("diagnostics");
    ChainDiagnostics& d = b.draws.diagnostics;
    d.cluster_count_trace = jd.at("cluster_count_trace").get<std::vector<int>>();
    d.accept_rate_b = jd.at("accept_rate_b").get<double>();
    d.accept_rate_c = jd.at("accept_rate_c").get<double>();
    d.accept_rate_alloc = jd.at("accept_rate_alloc").get<double>();
    d.final_scale_b = jd.at("final_scale_b").get<double>();
    d.final_scale_c = jd.at("final_scale_c").get<double>();
  } catch (const json::exception& e) {
    throw DataError("fit file " + path + ": " + e.what());
  }
  b.data.validate();
  return b;
}

void write_quantile_curves_csv(std::ostream& os,
                               const Eigen::MatrixXd& x_raw,
                               const std::vector<std::string>& covariate_names,
                               const std::vector<double>& p_list,
                               const Eigen::MatrixXi& q) {
  if (x_raw.cols() != static_cast<Eigen::Index>(covariate_names.size()))
    throw DataError("write_quantile_curves_csv: name/column mismatch");
  if (q.rows() != x_raw.rows() ||
      q.cols() != static_cast<Eigen::Index>(p_list.size()))
    throw DataError("write_quantile_curves_csv: shape mismatch");
  for (const std::string& n : covariate_names) os << n << ',';
  os << "p,quantile\n";
  for (Eigen::Index g = 0; g < x_raw.rows(); ++g)
    for (std::size_t j = 0; j < p_list.size(); ++j) {
      for (Eigen::Index c = 0; c < x_raw.cols(); ++c)
        os << format_double(x_raw(g, c)) << ',';
      os << format_double(p_list[j]) << ','
         << q(g, static_cast<Eigen::Index>(j)) << '\n';
    }
}

void write_posterior_summary_csv(std::ostream& os,
                                 const ChainDiagnostics& diag) {
  os << "series,index,value\n";
  for (std::size_t i = 0; i < diag.cluster_count_trace.size(); ++i)
    os << "cluster_count," << i << ',' << diag.cluster_count_trace[i] << '\n';
  os << "accept_rate_b,0," << format_double(diag.accept_rate_b) << '\n';
  os << "accept_rate_c,0," << format_double(diag.accept_rate_c) << '\n';
  os << "accept_rate_alloc,0," << format_double(diag.accept_rate_alloc)
     << '\n';
  os << "final_scale_b,0," << format_double(diag.final_scale_b) << '\n';
  os << "final_scale_c,0," << format_double(diag.final_scale_c) << '\n';
}

void RunConfig::validate() const {
  if (mode != "fit" && mode != "predict" && mode != "benchmark" &&
      mode != "simulate")
    throw ConfigError("mode must be one of fit|predict|benchmark|simulate");
  if (quantile_levels.empty() && mode == "predict")
    throw ConfigError("predict mode needs at least one quantile level");
  for (std::size_t i = 0; i < quantile_levels.size(); ++i) {
    if (!(quantile_levels[i] > 0.0 && quantile_levels[i] < 1.0))
      throw ConfigError("quantile levels must lie in (0,1)");
    if (i > 0 && !(quantile_levels[i] > quantile_levels[i - 1]))
      throw ConfigError("quantile levels must be strictly increasing");
  }
  if (grid.points < 1) throw ConfigError("grid points must be >= 1");
  if (std::isfinite(grid.min) && std::isfinite(grid.max) &&
      !(grid.min < grid.max))
    throw ConfigError("grid min must be below grid max");
  if (simulate_n < 1) throw ConfigError("simulate_n must be >= 1");
  if (bench_replications < 1)
    throw ConfigError("bench_replications must be >= 1");
  if (m_jitter < 1) throw ConfigError("m_jitter must be >= 1");
  if (gamma_anchors < -1)
    throw ConfigError("gamma_anchors must be -1 (default), 0, or positive");
}

RunConfig load_config_json(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

void write_manifest_json(const std::string& path, const RunConfig& config,
                         const std::vector<std::string>& outputs) {
  json j{{"version", kVersion},
         {"config", config_to_json(config)},
         {"outputs", outputs}};
  write_text_file(path, j.dump(1) + "\n");
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << contents;
  os.flush();
  if (!os) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace countreg
