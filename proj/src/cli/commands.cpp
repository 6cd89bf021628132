#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "clusterguard/cli.hpp"
#include "clusterguard/momenttest.hpp"
#include "clusterguard/parallel.hpp"
#include "clusterguard/simulation.hpp"
#include "clusterguard/taildiag.hpp"

namespace clusterguard::cli {

namespace {

using json = nlohmann::ordered_json;
using regression::Method;

std::string num(double v) { return fmt::format("{:.17g}", v); }

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw Error(ErrorKind::FileError, "cannot write " + path);
  file << content;
  if (!file) throw Error(ErrorKind::FileError, "failed writing " + path);
}

void emit_json(const std::string& path, const json& doc, std::ostream& out) {
  emit(path, doc.dump(2) + "\n", out);
}

struct SchemaFlags {
  std::string data;
  CsvSchema schema;
  bool no_intercept = false;

  void add(CLI::App* cmd, bool regressors_required) {
    cmd->add_option("--data", data, "Input CSV (header required)")->required();
    cmd->add_option("--cluster", schema.cluster_col, "Cluster label column")->required();
    cmd->add_option("--outcome", schema.outcome_col, "Outcome column")->required();
    auto* reg = cmd->add_option("--regressors", schema.regressor_cols,
                                "Regressor columns, comma separated")
                    ->delimiter(',');
    if (regressors_required) reg->required();
    cmd->add_flag("--no-intercept", no_intercept, "Do not prepend a constant column");
  }

  regression::ClusterDataset load() {
    schema.add_intercept = !no_intercept;
    return build_dataset(read_csv(data), schema);
  }
};

regression::WcrResiduals parse_residuals(const std::string& name) {
  if (name == "ols") return regression::WcrResiduals::Ols;
  if (name == "wcr") return regression::WcrResiduals::Wcr;
  throw Error(ErrorKind::ConfigError, "wcr residuals must be 'ols' or 'wcr'");
}

json size_summary(const regression::ClusterDataset& data) {
  const auto sizes = data.cluster_sizes();
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  return json{{"min", *lo},
              {"max", *hi},
              {"max_over_min", static_cast<double>(*hi) / static_cast<double>(*lo)},
              {"max_share", static_cast<double>(*hi) / static_cast<double>(data.num_obs())}};
}

json fit_block(const regression::RegressionFit& fit, const std::vector<std::string>& names) {
  json coefs = json::array();
  for (Eigen::Index j = 0; j < fit.theta_hat.size(); ++j) {
    const auto u = static_cast<std::size_t>(j);
    coefs.push_back({{"name", names[u]},
                     {"estimate", fit.theta_hat[j]},
                     {"se", fit.se[j]},
                     {"ci_lo", fit.ci[u].lo},
                     {"ci_hi", fit.ci[u].hi}});
  }
  json vcov = json::array();
  for (Eigen::Index i = 0; i < fit.vcov.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < fit.vcov.cols(); ++j) row.push_back(fit.vcov(i, j));
    vcov.push_back(std::move(row));
  }
  return json{{"a_n", fit.a_n}, {"coefficients", std::move(coefs)}, {"vcov", std::move(vcov)}};
}

// fit ------------------------------------------------------------------------

struct FitArgs {
  SchemaFlags in;
  std::string method = "both";
  double level = 0.95;
  std::string residuals = "ols";
  std::string out;
};

int cmd_fit(FitArgs& a, std::ostream& out) {
  if (a.method != "cr" && a.method != "wcr" && a.method != "both") {
    throw Error(ErrorKind::ConfigError, "method must be cr, wcr or both");
  }
  const auto residuals = parse_residuals(a.residuals);
  const auto data = a.in.load();
  const auto names = coefficient_names(a.in.schema);

  json doc{{"command", "fit"},
           {"G", data.num_clusters()},
           {"N", data.num_obs()},
           {"p", data.num_regressors()},
           {"level", a.level},
           {"cluster_sizes", size_summary(data)}};
  if (a.method != "wcr") doc["CR"] = fit_block(regression::cr_fit(data, a.level), names);
  if (a.method != "cr") {
    doc["WCR"] = fit_block(regression::wcr_fit(data, a.level, residuals), names);
    doc["WCR"]["residuals"] = regression::to_string(residuals);
  }
  emit_json(a.out, doc, out);
  return kExitOk;
}

// diagnose -------------------------------------------------------------------

struct DiagnoseArgs {
  std::string data;
  std::string cluster_col;
  std::string sizes;
  double fraction = 0.5;
  std::size_t k_max = 0;
  double level = 0.95;
  std::string hill_csv;
  std::string rank_csv;
  std::string out;
};

std::vector<double> sizes_from_csv(const std::string& path, const std::string& cluster_col) {
  const auto table = read_csv(path);
  std::size_t j = table.header.size();
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c] == cluster_col) j = c;
  }
  if (j == table.header.size()) {
    throw Error(ErrorKind::SchemaError, fmt::format("column '{}' not found in header", cluster_col));
  }
  std::vector<std::string> order;
  std::map<std::string, std::size_t> counts;
  std::vector<std::size_t> missing;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& label = table.rows[r][j];
    if (is_missing(label)) {
      missing.push_back(table.row_lines[r]);
      continue;
    }
    if (counts[label]++ == 0) order.push_back(label);
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::SchemaError,
                fmt::format("missing cluster label at line(s) {}", fmt::join(missing, ", ")));
  }
  std::vector<double> sizes;
  for (const auto& label : order) sizes.push_back(static_cast<double>(counts[label]));
  return sizes;
}

int cmd_diagnose(DiagnoseArgs& a, std::ostream& out, std::ostream& err) {
  if (a.data.empty() == a.sizes.empty()) {
    throw Error(ErrorKind::ConfigError, "give exactly one of --data (with --cluster) or --sizes");
  }
  if (!a.data.empty() && a.cluster_col.empty()) {
    throw Error(ErrorKind::ConfigError, "--data needs --cluster");
  }
  const auto sizes = a.sizes.empty() ? sizes_from_csv(a.data, a.cluster_col) : read_sizes(a.sizes);
  const std::optional<std::size_t> k_max =
      a.k_max > 0 ? std::optional<std::size_t>(a.k_max) : std::nullopt;
  const auto hill = taildiag::hill_series(sizes, k_max, a.level);

  std::string hill_text = "k,beta_hat,ci_lo,ci_hi,degenerate\n";
  bool below_two = false;
  double min_ci_lo = std::numeric_limits<double>::infinity();
  std::size_t degenerate = 0;
  for (std::size_t i = 0; i < hill.k_values.size(); ++i) {
    hill_text += fmt::format("{},{},{},{},{}\n", hill.k_values[i], num(hill.beta_hat[i]),
                             num(hill.ci_lo[i]), num(hill.ci_hi[i]), hill.degenerate[i] ? 1 : 0);
    if (hill.degenerate[i]) {
      ++degenerate;
      continue;
    }
    min_ci_lo = std::min(min_ci_lo, hill.ci_lo[i]);
    below_two = below_two || hill.ci_lo[i] < 2.0;
  }
  if (!a.hill_csv.empty()) emit(a.hill_csv, hill_text, out);

  json rank = nullptr;
  try {
    const auto fit = taildiag::rank_size_fit(sizes, a.fraction);
    std::string rank_text = "log_size,log_rank\n";
    for (const auto& pt : fit.points) {
      rank_text += fmt::format("{},{}\n", num(pt.log_size), num(pt.log_rank));
    }
    if (!a.rank_csv.empty()) emit(a.rank_csv, rank_text, out);
    rank = json{{"slope", fit.slope},
                {"intercept", fit.intercept},
                {"n_used", fit.points.size()},
                {"fraction", fit.fraction_used}};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Degenerate && e.kind() != ErrorKind::InsufficientData) throw;
    err << "warning: rank-size fit: " << e.what() << "\n";
  }

  const bool inconclusive = hill.all_degenerate();
  json flags = json::array();
  if (below_two) flags.push_back("cannot rule out beta < 2");
  if (inconclusive) flags.push_back("diagnostics inconclusive");

  json doc{{"command", "diagnose"},
           {"n", sizes.size()},
           {"hill",
            {{"k_min", hill.k_values.empty() ? 0 : hill.k_values.front()},
             {"k_max", hill.k_values.empty() ? 0 : hill.k_values.back()},
             {"level", hill.level},
             {"degenerate_k", degenerate},
             {"min_ci_lo", inconclusive ? json(nullptr) : json(min_ci_lo)}}},
           {"rank_size", rank},
           {"cannot_rule_out_beta_below_2", below_two},
           {"inconclusive", inconclusive},
           {"flags", flags}};
  emit_json(a.out, doc, out);
  return kExitOk;
}

// moment-test ----------------------------------------------------------------

struct MomentArgs {
  SchemaFlags in;
  int r = 2;
  std::size_t k = 0;
  double size = momenttest::kDefaultSizeTarget;
  std::string calib_dir;
  std::string out;
};

std::filesystem::path store_file(const std::string& dir) {
  const std::filesystem::path base =
      dir.empty() ? momenttest::CalibrationStore::default_directory() : std::filesystem::path(dir);
  return base / momenttest::CalibrationStore::kFileName;
}

int cmd_moment_test(MomentArgs& a, std::ostream& out) {
  if (a.r != 1 && a.r != 2) throw Error(ErrorKind::SchemaError, "r must be 1 or 2");
  const auto data = a.in.load();
  const std::size_t k = a.k > 0 ? a.k : momenttest::default_k(data.num_clusters());
  if (k < 3) {
    throw Error(ErrorKind::InsufficientData,
                fmt::format("G = {} clusters is too few for the moment test (k >= 3 needed)",
                            data.num_clusters()));
  }
  const auto file = store_file(a.calib_dir);
  const auto store = momenttest::CalibrationStore::load(file);
  const auto lambda = store.find(k, a.size);
  if (!lambda) {
    throw Error(ErrorKind::CalibrationMissing,
                fmt::format("no calibrated Lambda for k = {} at size {} in {}; run "
                            "`clusterguard calibrate --k {} --size {}` first",
                            k, a.size, file.string(), k, a.size));
  }
  const auto theta = regression::ols_fit(data);
  const auto scores = regression::cluster_scores(data, theta, regression::Weighting::Unweighted);
  const auto res = momenttest::moment_test(scores, a.r, k, *lambda);
  json doc{{"command", "moment-test"},
           {"G", data.num_clusters()},
           {"r", res.r},
           {"k", res.k},
           {"statistic", res.statistic},
           {"reject", res.reject},
           {"log_numerator", res.log_numerator},
           {"log_denominator", res.log_denominator},
           {"numerator", res.numerator},
           {"denominator", res.denominator},
           {"lambda_id", res.lambda_id},
           {"lambda_scale", lambda->scale},
           {"size_target", lambda->size_target},
           {"v_star", res.v_star}};
  emit_json(a.out, doc, out);
  return kExitOk;
}

// simulate -------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::vector<std::size_t> clusters{25, 50};
  std::vector<double> rho{0.25, 0.5, 0.75};
  std::vector<double> beta{2.0, 1.75, 1.5, 1.25};
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  int scale = 10;
  double level = 0.95;
  std::string residuals = "ols";
  unsigned threads = 0;
  std::string csv;
  std::string out;
};

template <class T>
void from_config(const json& cfg, const char* key, const CLI::App* cmd, const char* flag, T& dst) {
  if (!cfg.contains(key) || cmd->count(flag) > 0) return;
  try {
    dst = cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, fmt::format("config key '{}': {}", key, e.what()));
  }
}

void apply_config(SimulateArgs& a, const CLI::App* cmd) {
  if (a.config.empty()) return;
  std::ifstream in(a.config);
  if (!in) throw Error(ErrorKind::FileError, "cannot open " + a.config);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, fmt::format("{}: {}", a.config, e.what()));
  }
  if (!cfg.is_object()) throw Error(ErrorKind::ConfigError, a.config + ": expected a JSON object");
  static const char* known[] = {"clusters", "rho",   "beta",          "reps",   "seed",
                                "scale",    "level", "wcr_residuals", "threads"};
  for (const auto& item : cfg.items()) {
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return item.key() == k; }) == std::end(known)) {
      throw Error(ErrorKind::ConfigError, fmt::format("{}: unknown key '{}'", a.config, item.key()));
    }
  }
  from_config(cfg, "clusters", cmd, "--clusters", a.clusters);
  from_config(cfg, "rho", cmd, "--rho", a.rho);
  from_config(cfg, "beta", cmd, "--beta", a.beta);
  from_config(cfg, "reps", cmd, "--reps", a.reps);
  from_config(cfg, "seed", cmd, "--seed", a.seed);
  from_config(cfg, "scale", cmd, "--scale", a.scale);
  from_config(cfg, "level", cmd, "--level", a.level);
  from_config(cfg, "wcr_residuals", cmd, "--wcr-residuals", a.residuals);
  from_config(cfg, "threads", cmd, "--threads", a.threads);
}

int cmd_simulate(SimulateArgs& a, const CLI::App* cmd, std::ostream& out, std::ostream& err) {
  apply_config(a, cmd);
  const auto residuals = parse_residuals(a.residuals);
  std::vector<simulation::SimConfig> grid;
  for (std::size_t g : a.clusters) {
    for (double rho : a.rho) {
      for (double beta : a.beta) {
        simulation::SimConfig cfg;
        cfg.num_clusters = g;
        cfg.rho = rho;
        cfg.beta = beta;
        cfg.n_reps = a.reps;
        cfg.seed = a.seed;
        cfg.scale = a.scale;
        cfg.level = a.level;
        cfg.wcr_residuals = residuals;
        grid.push_back(cfg);
      }
    }
  }
  try {
    for (const auto& cfg : grid) cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  const auto table = simulation::run_coverage_study(grid, a.threads);

  std::string csv = "G,rho,beta,method,coverage,n_reps,mc_stderr\n";
  json rows = json::array();
  std::size_t excluded = 0;
  for (const auto& row : table.rows) {
    csv += fmt::format("{},{},{},{},{},{},{}\n", row.num_clusters, num(row.rho), num(row.beta),
                       regression::to_string(row.method), num(row.coverage), row.n_reps,
                       num(row.mc_stderr));
    rows.push_back({{"G", row.num_clusters},
                    {"rho", row.rho},
                    {"beta", row.beta},
                    {"method", regression::to_string(row.method)},
                    {"coverage", row.coverage},
                    {"n_reps", row.n_reps},
                    {"mc_stderr", row.mc_stderr},
                    {"excluded", row.excluded}});
    if (row.method == Method::CR) excluded += row.excluded;
  }
  if (excluded > 0) err << "warning: " << excluded << " singular replication(s) excluded\n";
  if (!a.csv.empty()) emit(a.csv, csv, out);
  json doc{{"command", "simulate"},
           {"metadata",
            {{"seed", a.seed},
             {"reps", a.reps},
             {"scale", a.scale},
             {"level", a.level},
             {"wcr_residuals", regression::to_string(residuals)},
             {"excluded_reps", excluded},
             {"excluded_policy", "singular replications dropped and counted"}}},
           {"rows", rows}};
  emit_json(a.out, doc, out);
  return kExitOk;
}

// calibrate ------------------------------------------------------------------

struct CalibrateArgs {
  std::vector<std::size_t> k;
  std::size_t k_min = 0;
  std::size_t k_max = 0;
  double size = momenttest::kDefaultSizeTarget;
  std::size_t reps = 5000;
  std::uint64_t seed = 1;
  std::vector<double> null_grid = momenttest::default_null_grid();
  unsigned threads = 0;
  std::string calib_dir;
  std::string out;
};

int cmd_calibrate(CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<std::size_t> ks = a.k;
  if (a.k_min > 0 || a.k_max > 0) {
    if (a.k_min == 0 || a.k_max < a.k_min) {
      throw Error(ErrorKind::ConfigError, "--k-min and --k-max must form a range");
    }
    for (std::size_t k = a.k_min; k <= a.k_max; ++k) ks.push_back(k);
  }
  if (ks.empty()) throw Error(ErrorKind::ConfigError, "give --k or --k-min/--k-max");

  const auto file = store_file(a.calib_dir);
  auto store = momenttest::CalibrationStore::load(file);
  json done = json::array();
  for (std::size_t k : ks) {
    const auto m = momenttest::calibrate_lambda(k, a.size, a.null_grid, a.reps, a.seed, a.threads);
    store.upsert(m);
    store.save(file);  // keep finished work if a long run is interrupted
    err << fmt::format("calibrated k={} scale={} ({})\n", k, num(m.scale), m.lambda_id);
    done.push_back({{"k", m.k},
                    {"size_target", m.size_target},
                    {"reps", m.reps},
                    {"seed", m.seed},
                    {"null_grid", m.null_grid},
                    {"scale", m.scale},
                    {"lambda_id", m.lambda_id}});
  }
  emit_json(a.out, json{{"command", "calibrate"}, {"store", file.string()}, {"records", done}},
            out);
  return kExitOk;
}

// tailsim --------------------------------------------------------------------

struct TailArgs {
  double alpha = 3.0;
  double beta = 1.5;
  std::size_t clusters = 100000;
  std::string weighting = "both";
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_tailsim(TailArgs& a, std::ostream& out) {
  std::vector<regression::Weighting> which;
  if (a.weighting == "unweighted" || a.weighting == "both") {
    which.push_back(regression::Weighting::Unweighted);
  }
  if (a.weighting == "inverse_size" || a.weighting == "both") {
    which.push_back(regression::Weighting::InverseSize);
  }
  if (which.empty()) {
    throw Error(ErrorKind::ConfigError, "weighting must be unweighted, inverse_size or both");
  }
  json results = json::array();
  for (auto w : which) {
    const auto r = simulation::tail_index_experiment(a.alpha, a.beta, a.clusters, w, a.seed);
    // Unweighted sums inherit the size index when beta < alpha; weighted sums
    // keep the score index.
    json predicted = a.alpha;
    if (w == regression::Weighting::Unweighted) {
      predicted = a.beta < a.alpha ? json(a.beta) : json(nullptr);
    }
    results.push_back({{"weighting", regression::to_string(w)},
                       {"k", r.k},
                       {"hill_beta_hat", r.hill_beta_hat},
                       {"ci_lo", r.hill_ci_lo},
                       {"ci_hi", r.hill_ci_hi},
                       {"predicted_index", predicted}});
  }
  emit_json(a.out,
            json{{"command", "tailsim"},
                 {"alpha", a.alpha},
                 {"beta", a.beta},
                 {"G", a.clusters},
                 {"seed", a.seed},
                 {"results", results}},
            out);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cluster-robust inference with heavy-tailed cluster sizes", "clusterguard"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "CR and WCR estimates with cluster-robust intervals");
  fit.in.add(fit_cmd, false);
  fit_cmd->add_option("--method", fit.method, "cr, wcr or both")->capture_default_str();
  fit_cmd->add_option("--level", fit.level, "Confidence level")->capture_default_str();
  fit_cmd->add_option("--wcr-residuals", fit.residuals, "Residuals in the WCR meat: ols or wcr")
      ->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "JSON output path (default stdout)");

  DiagnoseArgs diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "Hill and rank-size diagnostics of cluster sizes");
  diag_cmd->add_option("--data", diag.data, "CSV whose cluster column defines the sizes");
  diag_cmd->add_option("--cluster", diag.cluster_col, "Cluster label column");
  diag_cmd->add_option("--sizes", diag.sizes, "Plain list of cluster sizes, one per line");
  diag_cmd->add_option("--fraction", diag.fraction, "Share of largest sizes in the rank-size fit")
      ->capture_default_str();
  diag_cmd->add_option("--k-max", diag.k_max, "Largest Hill k (default n/2)");
  diag_cmd->add_option("--level", diag.level, "Confidence level")->capture_default_str();
  diag_cmd->add_option("--hill-csv", diag.hill_csv, "Write the Hill series here");
  diag_cmd->add_option("--rank-csv", diag.rank_csv, "Write the rank-size points here");
  diag_cmd->add_option("--out", diag.out, "JSON summary path (default stdout)");

  MomentArgs mt;
  auto* mt_cmd = app.add_subcommand("moment-test", "Test for a finite r-th moment of cluster scores");
  mt.in.add(mt_cmd, false);
  mt_cmd->add_option("--r", mt.r, "Moment order (1 or 2)")->capture_default_str();
  mt_cmd->add_option("--k", mt.k, "Number of top order statistics (default min(G/2, 50))");
  mt_cmd->add_option("--size", mt.size, "Size target of the calibrated Lambda")->capture_default_str();
  mt_cmd->add_option("--calib-dir", mt.calib_dir, "Calibration store directory");
  mt_cmd->add_option("--out", mt.out, "JSON output path (default stdout)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo coverage of CR and WCR intervals");
  sim_cmd->add_option("--config", sim.config, "JSON file with grid settings (flags win)");
  sim_cmd->add_option("--clusters", sim.clusters, "Values of G")->delimiter(',');
  sim_cmd->add_option("--rho", sim.rho, "Within-cluster correlations")->delimiter(',');
  sim_cmd->add_option("--beta", sim.beta, "Pareto indices of cluster sizes")->delimiter(',');
  sim_cmd->add_option("--reps", sim.reps, "Replications per cell")->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  sim_cmd->add_option("--scale", sim.scale, "Size multiplier in ceil(scale * Pareto)")
      ->capture_default_str();
  sim_cmd->add_option("--level", sim.level, "Confidence level")->capture_default_str();
  sim_cmd->add_option("--wcr-residuals", sim.residuals, "Residuals in the WCR meat: ols or wcr")
      ->capture_default_str();
  sim_cmd->add_option("--threads", sim.threads, "Worker threads (0 = automatic)");
  sim_cmd->add_option("--csv", sim.csv, "Write the coverage table as CSV here");
  sim_cmd->add_option("--out", sim.out, "JSON output path (default stdout)");

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Calibrate Lambda for the moment test");
  cal_cmd->add_option("--k", cal.k, "Values of k")->delimiter(',');
  cal_cmd->add_option("--k-min", cal.k_min, "First k of a range");
  cal_cmd->add_option("--k-max", cal.k_max, "Last k of a range");
  cal_cmd->add_option("--size", cal.size, "Size target")->capture_default_str();
  cal_cmd->add_option("--reps", cal.reps, "Null replications per grid point")->capture_default_str();
  cal_cmd->add_option("--seed", cal.seed, "Random seed")->capture_default_str();
  cal_cmd->add_option("--null-grid", cal.null_grid, "Null tail shapes xi0 in (0, 1]")
      ->delimiter(',');
  cal_cmd->add_option("--threads", cal.threads, "Worker threads (0 = automatic)");
  cal_cmd->add_option("--calib-dir", cal.calib_dir, "Calibration store directory");
  cal_cmd->add_option("--out", cal.out, "JSON output path (default stdout)");

  TailArgs tail;
  auto* tail_cmd = app.add_subcommand("tailsim", "Tail index of simulated cluster score sums");
  tail_cmd->add_option("--alpha", tail.alpha, "Pareto index of scores")->capture_default_str();
  tail_cmd->add_option("--beta", tail.beta, "Pareto index of cluster sizes")->capture_default_str();
  tail_cmd->add_option("--clusters", tail.clusters, "Number of clusters G")->capture_default_str();
  tail_cmd->add_option("--weighting", tail.weighting, "unweighted, inverse_size or both")
      ->capture_default_str();
  tail_cmd->add_option("--seed", tail.seed, "Random seed")->capture_default_str();
  tail_cmd->add_option("--out", tail.out, "JSON output path (default stdout)");

  std::vector<const char*> argv{"clusterguard"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, out);
    if (diag_cmd->parsed()) return cmd_diagnose(diag, out, err);
    if (mt_cmd->parsed()) return cmd_moment_test(mt, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, sim_cmd, out, err);
    if (cal_cmd->parsed()) return cmd_calibrate(cal, out, err);
    if (tail_cmd->parsed()) return cmd_tailsim(tail, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace clusterguard::cli
