#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace clusterguard::regression {

struct Cluster {
  std::string id;
  Eigen::VectorXd y;  // N_g outcomes
  Eigen::MatrixXd X;  // N_g x p regressors
};

// Grouped regression sample. Construction validates the shape invariants:
// at least two clusters, every cluster nonempty, a common p, N > p, and an
// all-ones first column when `intercept` is set.
class ClusterDataset {
 public:
  explicit ClusterDataset(std::vector<Cluster> clusters, bool intercept = false);

  std::span<const Cluster> clusters() const noexcept { return clusters_; }
  std::size_t num_clusters() const noexcept { return clusters_.size(); }
  std::size_t num_obs() const noexcept { return num_obs_; }
  std::size_t num_regressors() const noexcept { return num_regressors_; }
  bool has_intercept() const noexcept { return intercept_; }
  std::vector<std::size_t> cluster_sizes() const;

 private:
  std::vector<Cluster> clusters_;
  std::size_t num_obs_ = 0;
  std::size_t num_regressors_ = 0;
  bool intercept_ = false;
};

enum class Method { CR, WCR };
enum class Weighting { Unweighted, InverseSize };

// Which fitted coefficients generate the residuals in the WCR meat. Ols reuses
// the pooled-OLS residuals that define S_g for CR; Wcr refits them at the
// weighted estimate.
enum class WcrResiduals { Ols, Wcr };

std::string to_string(Method method);
std::string to_string(Weighting weighting);
std::string to_string(WcrResiduals residuals);

// Row g holds S_g = sum_i X_gi * U_gi, divided by N_g for InverseSize.
struct ScoreMatrix {
  Eigen::MatrixXd rows;
  Weighting weighting = Weighting::Unweighted;
};

struct VarianceEstimate {
  Eigen::MatrixXd vcov;
  double a_n = 1.0;
};

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct RegressionFit {
  Method method = Method::CR;
  Eigen::VectorXd theta_hat;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd se;
  double a_n = 1.0;
  std::size_t num_clusters = 0;
  std::size_t num_obs = 0;
  double level = 0.95;
  std::vector<ConfidenceInterval> ci;
};

// Reciprocal condition number (1-norm estimate) below which the Gram matrix
// is reported as SingularDesign.
inline constexpr double kSingularRcond = 1e-12;

// Stata's finite-sample factor ((N - 1) / (N - p)) * (G / (G - 1)).
double small_sample_adjustment(std::size_t num_obs, std::size_t num_regressors,
                               std::size_t num_clusters);

// Two-sided standard normal critical value for a confidence level in (0, 1).
double normal_critical_value(double level);

// (sum_g X_g'X_g)^{-1} (sum_g X_g'Y_g) via Cholesky. Throws SingularDesign.
Eigen::VectorXd ols_fit(const ClusterDataset& data);

// Same with every cluster weighted by 1 / N_g.
Eigen::VectorXd wcr_estimate(const ClusterDataset& data);

ScoreMatrix cluster_scores(const ClusterDataset& data, const Eigen::VectorXd& theta_hat,
                           Weighting weighting);

// a_n * Q^{-1} (sum_g S_g S_g') Q^{-1} with Q = sum_g X_g'X_g.
VarianceEstimate cr_variance(const ClusterDataset& data, const Eigen::VectorXd& theta_hat);

// a_n * Q_w^{-1} (sum_g N_g^{-2} S_g S_g') Q_w^{-1} with Q_w = sum_g N_g^{-1} X_g'X_g.
// Scores are built from the residuals at `theta_hat`.
VarianceEstimate wcr_variance(const ClusterDataset& data, const Eigen::VectorXd& theta_hat);

RegressionFit cr_fit(const ClusterDataset& data, double level = 0.95);
RegressionFit wcr_fit(const ClusterDataset& data, double level = 0.95,
                      WcrResiduals residuals = WcrResiduals::Ols);

}  // namespace clusterguard::regression
