#include <cmath>

#include "clusterguard/kernels.hpp"

namespace clusterguard::kernels::scalar {

double log(double x) noexcept { return std::log(x); }
double log1p(double x) noexcept { return std::log1p(x); }

void fv_log_integrand(std::span<const double> u, std::span<const double> a, double xi,
                      double power, double coef, std::span<double> out) {
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double one_minus = 1.0 - u[j];
    const double s = u[j] / one_minus;
    const double log_one_minus = std::log(one_minus);
    double acc = 0.0;
    for (double ai : a) acc += std::log1p(xi * ai * s);
    out[j] = power * (std::log(u[j]) - log_one_minus) - coef * acc - 2.0 * log_one_minus;
  }
}

double sum_log_ratio(std::span<const double> x, double denom) {
  double acc = 0.0;
  for (double v : x) acc += std::log(v / denom);
  return acc;
}

}  // namespace clusterguard::kernels::scalar
