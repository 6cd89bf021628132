#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace clusterguard::taildiag {

struct HillEstimate {
  double beta_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

// Hill tail-index estimates over k = 2..k_max. Entries whose top k + 1 order
// statistics are all equal are flagged degenerate and carry NaN estimates.
struct HillSeries {
  std::vector<std::size_t> k_values;
  std::vector<double> beta_hat;
  std::vector<double> ci_lo;
  std::vector<double> ci_hi;
  std::vector<bool> degenerate;
  std::size_t n = 0;
  double level = 0.95;

  bool all_degenerate() const noexcept;
};

struct RankSizePoint {
  double log_size = 0.0;
  double log_rank = 0.0;
};

struct RankSizeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<RankSizePoint> points;  // descending size, rank 1 = largest
  double fraction_used = 1.0;
};

// Stable descending sort; ties keep their input order.
std::vector<double> descending(std::span<const double> values);

// Hill estimator on the descending order statistics X_(1) >= ... >= X_(n):
//   beta_hat = 1 / mean_{i<=k} log(X_(i) / X_(k+1)),
// with the asymptotic band beta_hat -/+ z * beta_hat / sqrt(k).
// Throws InsufficientData (n < 3), InvalidArgument (k outside [2, n-1] or a
// nonpositive value) and Degenerate (X_(1) == X_(k+1)).
HillEstimate hill_estimate(std::span<const double> values, std::size_t k, double level = 0.95);

// k_max defaults to floor(n / 2).
HillSeries hill_series(std::span<const double> values,
                       std::optional<std::size_t> k_max = std::nullopt, double level = 0.95);

// Least squares of log(rank) on log(size) over the largest floor(fraction * n)
// values. Throws InsufficientData when fewer than three points remain.
RankSizeFit rank_size_fit(std::span<const double> values, double fraction = 0.5);

}  // namespace clusterguard::taildiag
