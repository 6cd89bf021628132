#include "clusterguard/regression.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <string>

#include "clusterguard/error.hpp"

namespace clusterguard::regression {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double cluster_weight(const Cluster& c, Weighting weighting) {
  return weighting == Weighting::InverseSize ? 1.0 / static_cast<double>(c.y.size()) : 1.0;
}

MatrixXd gram(const ClusterDataset& data, Weighting weighting) {
  const auto p = static_cast<Eigen::Index>(data.num_regressors());
  MatrixXd q = MatrixXd::Zero(p, p);
  for (const auto& c : data.clusters()) {
    q.noalias() += cluster_weight(c, weighting) * (c.X.transpose() * c.X);
  }
  return q;
}

Eigen::LLT<MatrixXd> factorize(const MatrixXd& q) {
  Eigen::LLT<MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularDesign,
                "Gram matrix is not positive definite (collinear regressors)");
  }
  const double rcond = llt.rcond();
  if (!(rcond >= kSingularRcond)) {
    throw Error(ErrorKind::SingularDesign,
                "Gram matrix is numerically singular (rcond = " + std::to_string(rcond) + ")");
  }
  return llt;
}

VectorXd weighted_estimate(const ClusterDataset& data, Weighting weighting) {
  const auto p = static_cast<Eigen::Index>(data.num_regressors());
  VectorXd rhs = VectorXd::Zero(p);
  for (const auto& c : data.clusters()) {
    rhs.noalias() += cluster_weight(c, weighting) * (c.X.transpose() * c.y);
  }
  return factorize(gram(data, weighting)).solve(rhs);
}

VarianceEstimate sandwich(const ClusterDataset& data, const VectorXd& theta_hat,
                          Weighting weighting) {
  const auto llt = factorize(gram(data, weighting));
  const ScoreMatrix scores = cluster_scores(data, theta_hat, weighting);
  const MatrixXd meat = scores.rows.transpose() * scores.rows;
  // Q^{-1} M Q^{-1} as two solves; both factors are symmetric.
  const MatrixXd left = llt.solve(meat);
  MatrixXd vcov = llt.solve(left.transpose());
  vcov = 0.5 * (vcov + vcov.transpose()).eval();
  const double a_n = small_sample_adjustment(data.num_obs(), data.num_regressors(),
                                             data.num_clusters());
  vcov *= a_n;
  return {std::move(vcov), a_n};
}

RegressionFit assemble(Method method, const ClusterDataset& data, VectorXd theta_hat,
                       VarianceEstimate variance, double level) {
  RegressionFit fit;
  fit.method = method;
  fit.theta_hat = std::move(theta_hat);
  fit.vcov = std::move(variance.vcov);
  fit.a_n = variance.a_n;
  fit.num_clusters = data.num_clusters();
  fit.num_obs = data.num_obs();
  fit.level = level;
  const double z = normal_critical_value(level);
  const auto p = fit.theta_hat.size();
  fit.se.resize(p);
  fit.ci.resize(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    // Rounding can leave a tiny negative diagonal on an exactly-zero variance.
    fit.se[j] = std::sqrt(std::max(fit.vcov(j, j), 0.0));
    const double half = z * fit.se[j];
    fit.ci[static_cast<std::size_t>(j)] = {fit.theta_hat[j] - half, fit.theta_hat[j] + half};
  }
  return fit;
}

}  // namespace

ClusterDataset::ClusterDataset(std::vector<Cluster> clusters, bool intercept)
    : clusters_(std::move(clusters)), intercept_(intercept) {
  if (clusters_.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "a clustered dataset needs at least two clusters");
  }
  num_regressors_ = static_cast<std::size_t>(clusters_.front().X.cols());
  if (num_regressors_ == 0) {
    throw Error(ErrorKind::InvalidArgument, "regressor matrix has no columns");
  }
  for (const auto& c : clusters_) {
    if (c.y.size() == 0) {
      throw Error(ErrorKind::InvalidArgument, "cluster '" + c.id + "' is empty");
    }
    if (c.X.rows() != c.y.size()) {
      throw Error(ErrorKind::InvalidArgument,
                  "cluster '" + c.id + "': X and y have different row counts");
    }
    if (static_cast<std::size_t>(c.X.cols()) != num_regressors_) {
      throw Error(ErrorKind::InvalidArgument,
                  "cluster '" + c.id + "' has a different number of regressors");
    }
    if (intercept_ && (c.X.col(0).array() != 1.0).any()) {
      throw Error(ErrorKind::InvalidArgument,
                  "cluster '" + c.id + "': intercept column is not all ones");
    }
    num_obs_ += static_cast<std::size_t>(c.y.size());
  }
  if (num_obs_ <= num_regressors_) {
    throw Error(ErrorKind::InvalidArgument, "need more observations than regressors");
  }
}

std::vector<std::size_t> ClusterDataset::cluster_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(clusters_.size());
  for (const auto& c : clusters_) sizes.push_back(static_cast<std::size_t>(c.y.size()));
  return sizes;
}

std::string to_string(Method method) { return method == Method::CR ? "CR" : "WCR"; }

std::string to_string(Weighting weighting) {
  return weighting == Weighting::Unweighted ? "unweighted" : "inverse_size";
}

std::string to_string(WcrResiduals residuals) {
  return residuals == WcrResiduals::Ols ? "ols" : "wcr";
}

double small_sample_adjustment(std::size_t num_obs, std::size_t num_regressors,
                               std::size_t num_clusters) {
  const auto n = static_cast<double>(num_obs);
  const auto p = static_cast<double>(num_regressors);
  const auto g = static_cast<double>(num_clusters);
  return ((n - 1.0) / (n - p)) * (g / (g - 1.0));
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "confidence level must lie in (0, 1)");
  }
  const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 0.5 + 0.5 * level);
}

VectorXd ols_fit(const ClusterDataset& data) {
  return weighted_estimate(data, Weighting::Unweighted);
}

VectorXd wcr_estimate(const ClusterDataset& data) {
  return weighted_estimate(data, Weighting::InverseSize);
}

ScoreMatrix cluster_scores(const ClusterDataset& data, const VectorXd& theta_hat,
                           Weighting weighting) {
  const auto p = static_cast<Eigen::Index>(data.num_regressors());
  if (theta_hat.size() != p) {
    throw Error(ErrorKind::InvalidArgument, "theta_hat length does not match the regressors");
  }
  ScoreMatrix scores;
  scores.weighting = weighting;
  scores.rows.resize(static_cast<Eigen::Index>(data.num_clusters()), p);
  Eigen::Index g = 0;
  for (const auto& c : data.clusters()) {
    const VectorXd residual = c.y - c.X * theta_hat;
    scores.rows.row(g++) = cluster_weight(c, weighting) * (c.X.transpose() * residual).transpose();
  }
  return scores;
}

VarianceEstimate cr_variance(const ClusterDataset& data, const VectorXd& theta_hat) {
  return sandwich(data, theta_hat, Weighting::Unweighted);
}

VarianceEstimate wcr_variance(const ClusterDataset& data, const VectorXd& theta_hat) {
  return sandwich(data, theta_hat, Weighting::InverseSize);
}

RegressionFit cr_fit(const ClusterDataset& data, double level) {
  normal_critical_value(level);
  VectorXd theta = ols_fit(data);
  auto variance = cr_variance(data, theta);
  return assemble(Method::CR, data, std::move(theta), std::move(variance), level);
}

RegressionFit wcr_fit(const ClusterDataset& data, double level, WcrResiduals residuals) {
  normal_critical_value(level);
  VectorXd theta = wcr_estimate(data);
  auto variance = wcr_variance(data, residuals == WcrResiduals::Ols ? ols_fit(data) : theta);
  return assemble(Method::WCR, data, std::move(theta), std::move(variance), level);
}

}  // namespace clusterguard::regression
