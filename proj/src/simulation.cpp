#include "clusterguard/simulation.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "clusterguard/error.hpp"
#include "clusterguard/parallel.hpp"
#include "clusterguard/taildiag.hpp"

namespace clusterguard::simulation {

namespace {

using regression::Method;

struct RepOutcome {
  bool fitted = false;
  bool cr_covers = false;
  bool wcr_covers = false;
};

bool covers(const regression::RegressionFit& fit, double truth) {
  const auto& ci = fit.ci[1];
  return ci.lo <= truth && truth <= ci.hi;
}

}  // namespace

void SimConfig::validate() const {
  if (num_clusters < 2) throw Error(ErrorKind::InvalidArgument, "G must be at least 2");
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw Error(ErrorKind::InvalidArgument, "rho must lie in [0, 1)");
  if (scale < 1) throw Error(ErrorKind::InvalidArgument, "scale must be at least 1");
  if (n_reps < 1) throw Error(ErrorKind::InvalidArgument, "n_reps must be at least 1");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
}

std::size_t cluster_size_from_uniform(double u, double beta, int scale) {
  const double pareto = std::pow(1.0 - u, -1.0 / beta);
  return static_cast<std::size_t>(std::ceil(static_cast<double>(scale) * pareto));
}

std::vector<std::size_t> draw_cluster_sizes(std::size_t num_clusters, double beta, int scale,
                                            std::uint64_t seed, std::uint32_t rep) {
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be positive");
  std::vector<std::size_t> sizes(num_clusters);
  for (std::size_t g = 0; g < num_clusters; ++g) {
    rng::Stream stream(seed, rep, static_cast<std::uint32_t>(g), rng::Role::ClusterSize);
    sizes[g] = cluster_size_from_uniform(stream.uniform(), beta, scale);
  }
  return sizes;
}

Eigen::VectorXd draw_equicorrelated_normal(std::size_t n, double rho, rng::Stream& stream) {
  if (!(rho >= 0.0 && rho < 1.0)) throw Error(ErrorKind::InvalidArgument, "rho must lie in [0, 1)");
  const double common = std::sqrt(rho) * stream.normal();
  const double idio = std::sqrt(1.0 - rho);
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (auto& v : out) v = common + idio * stream.normal();
  return out;
}

regression::ClusterDataset generate_dataset(const SimConfig& cfg, std::uint32_t rep) {
  cfg.validate();
  const auto sizes = draw_cluster_sizes(cfg.num_clusters, cfg.beta, cfg.scale, cfg.seed, rep);
  std::vector<regression::Cluster> clusters;
  clusters.reserve(sizes.size());
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    const auto cluster = static_cast<std::uint32_t>(g);
    rng::Stream x_stream(cfg.seed, rep, cluster, rng::Role::Regressor);
    rng::Stream u_stream(cfg.seed, rep, cluster, rng::Role::Error);
    const Eigen::VectorXd x = draw_equicorrelated_normal(sizes[g], cfg.rho, x_stream);
    const Eigen::VectorXd u = draw_equicorrelated_normal(sizes[g], cfg.rho, u_stream);
    regression::Cluster c;
    c.id = std::to_string(g);
    c.X.resize(x.size(), 2);
    c.X.col(0).setOnes();
    c.X.col(1) = x;
    c.y = (cfg.theta0 + cfg.theta1 * x.array() + u.array()).matrix();
    clusters.push_back(std::move(c));
  }
  return regression::ClusterDataset(std::move(clusters), true);
}

std::vector<SimConfig> default_coverage_grid(std::size_t n_reps, std::uint64_t seed) {
  std::vector<SimConfig> grid;
  for (std::size_t g : {25u, 50u}) {
    for (double rho : {0.25, 0.5, 0.75}) {
      for (double beta : {2.0, 1.75, 1.5, 1.25}) {
        SimConfig cfg;
        cfg.num_clusters = g;
        cfg.rho = rho;
        cfg.beta = beta;
        cfg.n_reps = n_reps;
        cfg.seed = seed;
        grid.push_back(cfg);
      }
    }
  }
  return grid;
}

CoverageTable run_coverage_study(std::span<const SimConfig> grid, unsigned threads) {
  if (grid.empty()) throw Error(ErrorKind::InvalidArgument, "coverage grid is empty");
  for (const auto& cfg : grid) cfg.validate();
  if (threads == 0) threads = default_threads();

  std::vector<std::size_t> offsets{0};
  for (const auto& cfg : grid) offsets.push_back(offsets.back() + cfg.n_reps);
  std::vector<RepOutcome> outcomes(offsets.back());

  parallel_for(outcomes.size(), threads, [&](std::size_t idx) {
    const auto cell = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), idx) - offsets.begin() - 1);
    const auto& cfg = grid[cell];
    const auto rep = static_cast<std::uint32_t>(idx - offsets[cell]);
    const auto data = generate_dataset(cfg, rep);
    try {
      const auto cr = regression::cr_fit(data, cfg.level);
      const auto wcr = regression::wcr_fit(data, cfg.level, cfg.wcr_residuals);
      outcomes[idx] = {true, covers(cr, cfg.theta1), covers(wcr, cfg.theta1)};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularDesign) throw;
      outcomes[idx] = {};
    }
  });

  // Reduction in replication order.
  CoverageTable table;
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    std::size_t fitted = 0;
    std::size_t cr_hits = 0;
    std::size_t wcr_hits = 0;
    for (std::size_t idx = offsets[cell]; idx < offsets[cell + 1]; ++idx) {
      const auto& o = outcomes[idx];
      if (!o.fitted) continue;
      ++fitted;
      cr_hits += o.cr_covers;
      wcr_hits += o.wcr_covers;
    }
    const auto& cfg = grid[cell];
    for (Method method : {Method::CR, Method::WCR}) {
      CoverageRow row;
      row.num_clusters = cfg.num_clusters;
      row.rho = cfg.rho;
      row.beta = cfg.beta;
      row.method = method;
      row.n_reps = fitted;
      row.excluded = cfg.n_reps - fitted;
      if (fitted > 0) {
        const auto hits = method == Method::CR ? cr_hits : wcr_hits;
        row.coverage = static_cast<double>(hits) / static_cast<double>(fitted);
        row.mc_stderr = std::sqrt(row.coverage * (1.0 - row.coverage) / static_cast<double>(fitted));
      }
      table.rows.push_back(row);
    }
  }
  return table;
}

std::size_t tail_experiment_k(std::size_t num_clusters) {
  const auto one_percent = static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(num_clusters)));
  return std::max<std::size_t>(one_percent, 50);
}

TailExperimentResult tail_index_experiment(double alpha, double beta, std::size_t num_clusters,
                                           regression::Weighting weighting,
                                           std::uint64_t seed) {
  if (!(alpha > 1.0 && beta > 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "tail experiment needs alpha, beta > 1");
  }
  const std::size_t k = tail_experiment_k(num_clusters);
  if (num_clusters <= k) {
    throw Error(ErrorKind::InsufficientData, "tail experiment needs G > k");
  }
  const auto sizes = draw_cluster_sizes(num_clusters, beta, 1, seed, 0);
  std::vector<double> sums(num_clusters);
  for (std::size_t g = 0; g < num_clusters; ++g) {
    rng::Stream stream(seed, 0, static_cast<std::uint32_t>(g), rng::Role::Score);
    double acc = 0.0;
    for (std::size_t i = 0; i < sizes[g]; ++i) acc += stream.pareto(alpha);
    sums[g] = weighting == regression::Weighting::InverseSize
                  ? acc / static_cast<double>(sizes[g])
                  : acc;
  }
  const auto est = taildiag::hill_estimate(sums, k);
  TailExperimentResult result;
  result.alpha = alpha;
  result.beta = beta;
  result.weighting = weighting;
  result.hill_beta_hat = est.beta_hat;
  result.hill_ci_lo = est.ci_lo;
  result.hill_ci_hi = est.ci_hi;
  result.num_clusters = num_clusters;
  result.k = k;
  return result;
}

}  // namespace clusterguard::simulation
