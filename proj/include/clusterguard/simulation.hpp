#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clusterguard/regression.hpp"
#include "clusterguard/rng.hpp"

namespace clusterguard::simulation {

// Coverage design: N_g = ceil(scale * Pareto(1, beta)); X and U are
// equicorrelated Gaussian within a cluster; Y = theta0 + theta1 X + U.
struct SimConfig {
  std::size_t num_clusters = 25;
  double beta = 2.0;
  double rho = 0.25;
  double theta0 = 1.0;
  double theta1 = 1.0;
  int scale = 10;
  std::size_t n_reps = 1000;
  std::uint64_t seed = 1;
  double level = 0.95;
  regression::WcrResiduals wcr_residuals = regression::WcrResiduals::Ols;

  void validate() const;
};

struct CoverageRow {
  std::size_t num_clusters = 0;
  double rho = 0.0;
  double beta = 0.0;
  regression::Method method = regression::Method::CR;
  double coverage = 0.0;
  std::size_t n_reps = 0;   // replications that produced a fit
  std::size_t excluded = 0; // replications dropped as SingularDesign
  double mc_stderr = 0.0;
};

struct CoverageTable {
  std::vector<CoverageRow> rows;
};

struct TailExperimentResult {
  double alpha = 0.0;
  double beta = 0.0;
  regression::Weighting weighting = regression::Weighting::Unweighted;
  double hill_beta_hat = 0.0;
  double hill_ci_lo = 0.0;
  double hill_ci_hi = 0.0;
  std::size_t num_clusters = 0;
  std::size_t k = 0;
};

// ceil(scale * (1 - u)^(-1 / beta)).
std::size_t cluster_size_from_uniform(double u, double beta, int scale);

std::vector<std::size_t> draw_cluster_sizes(std::size_t num_clusters, double beta, int scale,
                                            std::uint64_t seed, std::uint32_t rep);

// sqrt(rho) W 1 + sqrt(1 - rho) eps: unit variances, pairwise correlation rho.
Eigen::VectorXd draw_equicorrelated_normal(std::size_t n, double rho, rng::Stream& stream);

// Deterministic in (cfg, rep). The regressor and error draws use separate
// substreams per cluster.
regression::ClusterDataset generate_dataset(const SimConfig& cfg, std::uint32_t rep);

// The 12 cells G x rho x beta of the published coverage grid.
std::vector<SimConfig> default_coverage_grid(std::size_t n_reps, std::uint64_t seed);

// One CR and one WCR row per config (CR first). Replications run in parallel;
// the result does not depend on `threads`.
CoverageTable run_coverage_study(std::span<const SimConfig> grid, unsigned threads = 0);

// max(ceil(0.01 G), 50).
std::size_t tail_experiment_k(std::size_t num_clusters);

// Cluster sums of N_g i.i.d. Pareto(1, alpha) scores with N_g = ceil(Pareto(1, beta)),
// optionally divided by N_g, and their Hill tail index.
TailExperimentResult tail_index_experiment(double alpha, double beta, std::size_t num_clusters,
                                           regression::Weighting weighting,
                                           std::uint64_t seed);

}  // namespace clusterguard::simulation
