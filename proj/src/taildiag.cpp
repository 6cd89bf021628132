#include "clusterguard/taildiag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "clusterguard/error.hpp"
#include "clusterguard/kernels.hpp"
#include "clusterguard/regression.hpp"

namespace clusterguard::taildiag {

namespace {

void require_positive(std::span<const double> values) {
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::InvalidArgument, "tail diagnostics need positive finite values");
    }
  }
}

// `sorted` is already in descending order.
HillEstimate hill_on_sorted(std::span<const double> sorted, std::size_t k, double z) {
  const double threshold = sorted[k];
  if (sorted.front() == threshold) {
    throw Error(ErrorKind::Degenerate,
                "top " + std::to_string(k + 1) + " order statistics are all equal");
  }
  const double mean_spacing = kernels::sum_log_ratio(sorted.first(k), threshold) /
                              static_cast<double>(k);
  HillEstimate est;
  est.beta_hat = 1.0 / mean_spacing;
  const double half = z * est.beta_hat / std::sqrt(static_cast<double>(k));
  est.ci_lo = est.beta_hat - half;
  est.ci_hi = est.beta_hat + half;
  return est;
}

}  // namespace

bool HillSeries::all_degenerate() const noexcept {
  return std::all_of(degenerate.begin(), degenerate.end(), [](bool d) { return d; });
}

std::vector<double> descending(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::stable_sort(sorted.begin(), sorted.end(), std::greater<>());
  return sorted;
}

HillEstimate hill_estimate(std::span<const double> values, std::size_t k, double level) {
  const std::size_t n = values.size();
  if (n < 3) throw Error(ErrorKind::InsufficientData, "Hill estimator needs at least 3 values");
  if (k < 2 || k > n - 1) {
    throw Error(ErrorKind::InvalidArgument,
                "Hill k must lie in [2, n - 1]; got k = " + std::to_string(k));
  }
  require_positive(values);
  const auto sorted = descending(values);
  return hill_on_sorted(sorted, k, regression::normal_critical_value(level));
}

HillSeries hill_series(std::span<const double> values, std::optional<std::size_t> k_max,
                       double level) {
  const std::size_t n = values.size();
  if (n < 3) throw Error(ErrorKind::InsufficientData, "Hill estimator needs at least 3 values");
  require_positive(values);
  const std::size_t kmax = k_max.value_or(n / 2);
  if (kmax > n - 1) {
    throw Error(ErrorKind::InvalidArgument, "k_max must not exceed n - 1");
  }
  if (kmax < 2) throw Error(ErrorKind::InsufficientData, "k_max must be at least 2");

  const auto sorted = descending(values);
  const double z = regression::normal_critical_value(level);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  HillSeries series;
  series.n = n;
  series.level = level;
  for (std::size_t k = 2; k <= kmax; ++k) {
    series.k_values.push_back(k);
    if (sorted.front() == sorted[k]) {
      series.beta_hat.push_back(nan);
      series.ci_lo.push_back(nan);
      series.ci_hi.push_back(nan);
      series.degenerate.push_back(true);
      continue;
    }
    const auto est = hill_on_sorted(sorted, k, z);
    series.beta_hat.push_back(est.beta_hat);
    series.ci_lo.push_back(est.ci_lo);
    series.ci_hi.push_back(est.ci_hi);
    series.degenerate.push_back(false);
  }
  return series;
}

RankSizeFit rank_size_fit(std::span<const double> values, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "fraction must lie in (0, 1]");
  }
  require_positive(values);
  const std::size_t n = values.size();
  // The slack keeps products such as 0.29 * 100 from rounding down a whole point.
  const auto used =
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) * (1.0 + 1e-12)));
  if (used < 3) {
    throw Error(ErrorKind::InsufficientData, "rank-size fit needs at least 3 retained points");
  }
  const auto sorted = descending(values);
  if (sorted.front() == sorted[used - 1]) {
    throw Error(ErrorKind::Degenerate, "rank-size fit: retained sizes are all equal");
  }

  RankSizeFit fit;
  fit.fraction_used = static_cast<double>(used) / static_cast<double>(n);
  fit.points.reserve(used);
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = 0; i < used; ++i) {
    const RankSizePoint pt{std::log(sorted[i]), std::log(static_cast<double>(i + 1))};
    mean_x += pt.log_size;
    mean_y += pt.log_rank;
    fit.points.push_back(pt);
  }
  mean_x /= static_cast<double>(used);
  mean_y /= static_cast<double>(used);
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& pt : fit.points) {
    const double dx = pt.log_size - mean_x;
    sxx += dx * dx;
    sxy += dx * (pt.log_rank - mean_y);
  }
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  return fit;
}

}  // namespace clusterguard::taildiag
