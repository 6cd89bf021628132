#include "clusterguard/momenttest.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "clusterguard/error.hpp"
#include "clusterguard/kernels.hpp"

namespace clusterguard::momenttest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kXiZeroCutoff = 1e-9;
constexpr std::size_t kMaxPanels = 4096;

template <std::size_t N>
struct SymmetricRule {
  std::array<double, N> nodes{};    // on [-1, 1]
  std::array<double, N> weights{};
  std::array<double, N> log_weights{};

  SymmetricRule() {
    using Gauss = boost::math::quadrature::gauss<double, N>;
    const auto& x = Gauss::abscissa();
    const auto& w = Gauss::weights();
    static_assert(N % 2 == 0);
    for (std::size_t i = 0; i < N / 2; ++i) {
      nodes[i] = -x[N / 2 - 1 - i];
      weights[i] = w[N / 2 - 1 - i];
      nodes[N / 2 + i] = x[i];
      weights[N / 2 + i] = w[i];
    }
    for (std::size_t i = 0; i < N; ++i) log_weights[i] = std::log(weights[i]);
  }
};

const SymmetricRule<16>& panel_rule() {
  static const SymmetricRule<16> rule;
  return rule;
}

const SymmetricRule<64>& xi_rule() {
  static const SymmetricRule<64> rule;
  return rule;
}

double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == kNegInf) return kNegInf;
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

template <class Range>
double log_sum_exp(const Range& values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

// log |e^a - e^b|
double log_abs_diff(double a, double b) {
  if (a == b) return kNegInf;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  if (lo == kNegInf) return hi;
  return hi + std::log(-std::expm1(lo - hi));
}

void validate_v_star(std::span<const double> v) {
  if (v.size() < 3) throw Error(ErrorKind::InvalidArgument, "v_star needs k >= 3 entries");
  if (v.front() != 1.0 || v.back() != 0.0) {
    throw Error(ErrorKind::InvalidArgument, "v_star must start at 1 and end at 0");
  }
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] <= v[i - 1]) || !(v[i] >= 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "v_star must be nonincreasing within [0, 1]");
    }
  }
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

class DensityIntegrand {
 public:
  DensityIntegrand(std::span<const double> v, double xi)
      : a_(v.begin(), v.end() - 1),
        xi_(xi),
        power_(static_cast<double>(v.size()) - 2.0),
        coef_(1.0 + 1.0 / xi) {
    for (double ai : a_) {
      if (ai > 0.0) log_scales_.push_back(std::log(xi * ai));
    }
  }

  // The s^(k-2) growth must be beaten by the decay of the product.
  bool integrable() const {
    return power_ - coef_ * static_cast<double>(log_scales_.size()) < -1.0;
  }

  // Mode and curvature scale of the integrand in t = log s, where it is
  // log-concave: h(t) = (k-1) t - coef * sum_i log1p(xi a_i e^t).
  std::pair<double, double> mode_in_log_s() const {
    auto slope = [&](double t) {
      double acc = 0.0;
      for (double ls : log_scales_) acc += sigmoid(t + ls);
      return (power_ + 1.0) - coef_ * acc;
    };
    double lo = -40.0;
    double hi = 40.0;
    for (int i = 0; i < 32 && slope(lo) <= 0.0; ++i) lo -= 40.0;
    for (int i = 0; i < 32 && slope(hi) >= 0.0; ++i) hi += 40.0;
    for (int i = 0; i < 80; ++i) {
      const double mid = 0.5 * (lo + hi);
      (slope(mid) > 0.0 ? lo : hi) = mid;
    }
    const double mode = 0.5 * (lo + hi);
    double curvature = 0.0;
    for (double ls : log_scales_) {
      const double p = sigmoid(mode + ls);
      curvature += p * (1.0 - p);
    }
    curvature *= coef_;
    const double width = curvature > 0.0 ? 1.0 / std::sqrt(curvature) : 1.0;
    return {mode, std::min(width, 20.0)};
  }

  // log of the Gauss-Legendre estimate of the integral over [lo, hi] in u.
  double panel(double lo, double hi) const {
    const auto& rule = panel_rule();
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    std::array<double, 16> u{};
    std::array<double, 16> out{};
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = mid + half * rule.nodes[j];
    kernels::fv_log_integrand(u, a_, xi_, power_, coef_, out);
    const double log_half = std::log(half);
    for (std::size_t j = 0; j < out.size(); ++j) {
      if (std::isnan(out[j]) || out[j] == std::numeric_limits<double>::infinity()) {
        throw Error(ErrorKind::QuadratureFailure, "density integrand is not finite");
      }
      out[j] += log_half + rule.log_weights[j];
    }
    return log_sum_exp(out);
  }

 private:
  std::vector<double> a_;
  std::vector<double> log_scales_;
  double xi_;
  double power_;
  double coef_;
};

struct Panel {
  double lo;
  double hi;
  double log_value;  // from the two half panels
  double log_error;  // |whole - halves|
  double log_left;
  double log_right;

  bool operator<(const Panel& other) const { return log_error < other.log_error; }
};

Panel refine(const DensityIntegrand& f, double lo, double hi, double log_whole) {
  const double mid = 0.5 * (lo + hi);
  const double left = f.panel(lo, mid);
  const double right = f.panel(mid, hi);
  const double value = log_sum_exp(left, right);
  return {lo, hi, value, log_abs_diff(log_whole, value), left, right};
}

double adaptive_log_integral(const DensityIntegrand& f, double rel_tol) {
  const auto [mode, width] = f.mode_in_log_s();
  std::vector<double> breaks{0.0, 1.0};
  for (double j : {-8.0, -3.0, 0.0, 3.0, 8.0}) {
    const double u = sigmoid(mode + j * width);
    if (u > 0.0 && u < 1.0) breaks.push_back(u);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  // Heap ordered by estimated error; frozen panels can no longer be split.
  std::vector<Panel> work;
  std::vector<Panel> frozen;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    work.push_back(refine(f, breaks[i], breaks[i + 1], f.panel(breaks[i], breaks[i + 1])));
  }
  std::make_heap(work.begin(), work.end());
  const double log_tol = std::log(rel_tol);
  std::vector<double> values;
  std::vector<double> errors;
  while (true) {
    values.clear();
    errors.clear();
    for (const auto* set : {&work, &frozen}) {
      for (const auto& p : *set) {
        values.push_back(p.log_value);
        errors.push_back(p.log_error);
      }
    }
    const double total = log_sum_exp(values);
    if (total == kNegInf) {
      throw Error(ErrorKind::QuadratureFailure, "density integral underflowed to zero");
    }
    if (log_sum_exp(errors) <= log_tol + total) return total;
    if (work.empty() || work.size() + frozen.size() >= kMaxPanels) {
      throw Error(ErrorKind::QuadratureFailure,
                  "adaptive quadrature did not reach the requested relative tolerance");
    }
    std::pop_heap(work.begin(), work.end());
    const Panel worst = work.back();
    work.pop_back();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      frozen.push_back(worst);
      continue;
    }
    work.push_back(refine(f, worst.lo, mid, worst.log_left));
    std::push_heap(work.begin(), work.end());
    work.push_back(refine(f, mid, worst.hi, worst.log_right));
    std::push_heap(work.begin(), work.end());
  }
}

}  // namespace

std::vector<double> score_magnitudes(const regression::ScoreMatrix& scores, int r) {
  if (r != 1 && r != 2) throw Error(ErrorKind::InvalidArgument, "moment order r must be 1 or 2");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(scores.rows.rows()));
  for (Eigen::Index g = 0; g < scores.rows.rows(); ++g) {
    const double sq = scores.rows.row(g).squaredNorm();
    out.push_back(r == 2 ? sq : std::sqrt(sq));
  }
  return out;
}

std::vector<double> normalize_top_k(std::span<const double> values, std::size_t k) {
  if (k < 3) throw Error(ErrorKind::InvalidArgument, "k must be at least 3");
  if (values.size() < k) {
    throw Error(ErrorKind::InsufficientData, "fewer values than k = " + std::to_string(k));
  }
  std::vector<double> top(values.begin(), values.end());
  std::partial_sort(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(k), top.end(),
                    std::greater<>());
  top.resize(k);
  const double floor = top.back();
  const double range = top.front() - floor;
  if (!(range > 0.0)) {
    throw Error(ErrorKind::Degenerate, "largest and k-th order statistics coincide");
  }
  for (double& v : top) v = (v - floor) / range;
  return top;
}

double log_fv_density_xi0(std::span<const double> v_star) {
  validate_v_star(v_star);
  const auto k = static_cast<double>(v_star.size());
  double sum = 1.0;
  for (std::size_t i = 1; i + 1 < v_star.size(); ++i) sum += v_star[i];
  return std::lgamma(k) + std::lgamma(k - 1.0) - (k - 1.0) * std::log(sum);
}

double log_fv_density(std::span<const double> v_star, double xi, double rel_tol) {
  validate_v_star(v_star);
  if (!(xi >= 0.0) || !std::isfinite(xi)) {
    throw Error(ErrorKind::InvalidArgument, "xi must be finite and nonnegative");
  }
  if (!(rel_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "rel_tol must be positive");
  if (xi < kXiZeroCutoff) return log_fv_density_xi0(v_star);

  const DensityIntegrand integrand(v_star, xi);
  if (!integrand.integrable()) {
    throw Error(ErrorKind::QuadratureFailure,
                "density integral diverges: too many values tied with the k-th order statistic");
  }
  const auto k = static_cast<double>(v_star.size());
  return std::lgamma(k) + adaptive_log_integral(integrand, rel_tol);
}

LogIntegrals log_integrals(std::span<const double> v_star) {
  const auto& rule = xi_rule();
  std::array<double, 64> alt{};
  std::array<double, 64> null{};
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    // Both intervals have unit length: weights are half the [-1, 1] weights.
    const double log_w = std::log(0.5 * rule.weights[j]);
    const double t = 0.5 * (1.0 + rule.nodes[j]);
    alt[j] = log_w + log_fv_density(v_star, 1.0 + t);
    null[j] = log_w + log_fv_density(v_star, t);
  }
  return {log_sum_exp(alt), log_sum_exp(null)};
}

std::size_t default_k(std::size_t num_clusters) {
  return std::min(num_clusters / 2, kMaxDefaultK);
}

MomentTestResult moment_test_magnitudes(std::span<const double> magnitudes, int r,
                                        std::size_t k, const CalibratedMeasure& lambda) {
  if (r != 1 && r != 2) throw Error(ErrorKind::InvalidArgument, "moment order r must be 1 or 2");
  if (k < 3) throw Error(ErrorKind::InvalidArgument, "k must be at least 3");
  if (magnitudes.size() < k) {
    throw Error(ErrorKind::InsufficientData,
                "moment test needs at least k = " + std::to_string(k) + " clusters");
  }
  if (lambda.k != k || !(lambda.scale > 0.0)) {
    throw Error(ErrorKind::CalibrationMissing,
                "no calibrated Lambda for k = " + std::to_string(k));
  }
  MomentTestResult result;
  result.r = r;
  result.k = k;
  result.lambda_id = lambda.lambda_id;
  result.v_star = normalize_top_k(magnitudes, k);
  const auto integrals = log_integrals(result.v_star);
  result.log_numerator = integrals.log_alternative;
  result.log_denominator = std::log(lambda.scale) + integrals.log_null_uniform;
  result.numerator = std::exp(result.log_numerator);
  result.denominator = std::exp(result.log_denominator);
  result.statistic = std::exp(result.log_numerator - result.log_denominator);
  result.reject = result.statistic > 1.0;
  return result;
}

MomentTestResult moment_test(const regression::ScoreMatrix& scores, int r, std::size_t k,
                             const CalibratedMeasure& lambda) {
  const auto magnitudes = score_magnitudes(scores, r);
  return moment_test_magnitudes(magnitudes, r, k, lambda);
}

}  // namespace clusterguard::momenttest
