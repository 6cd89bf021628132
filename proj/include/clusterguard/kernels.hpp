#pragma once

#include <span>
#include <string_view>

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation and, on x86-64, an AVX2/FMA variant; the variant is chosen
// once at startup from CPUID and may be overridden with the
// CLUSTERGUARD_KERNELS environment variable ("scalar" or "avx2") or
// set_backend(). The variants agree to a few ulps, not bit-for-bit.

namespace clusterguard::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view to_string(Backend backend) noexcept;

bool avx2_supported() noexcept;
Backend active_backend() noexcept;

// Throws Error(InvalidArgument) if the backend is not supported on this CPU.
void set_backend(Backend backend);

// Log of the order-statistic density integrand after the substitution
// s = u / (1 - u):
//
//   out[j] = power * log(s_j) - coef * sum_i log1p(xi * a[i] * s_j) - 2 log(1 - u_j)
//
// Requires 0 < u_j < 1, xi > 0, a[i] >= 0, out.size() == u.size().
void fv_log_integrand(std::span<const double> u, std::span<const double> a, double xi,
                      double power, double coef, std::span<double> out);

// sum_i log(x[i] / denom); x[i] and denom positive and finite.
double sum_log_ratio(std::span<const double> x, double denom);

// Backend-specific entry points, exposed for equivalence tests.
namespace scalar {
void fv_log_integrand(std::span<const double> u, std::span<const double> a, double xi,
                      double power, double coef, std::span<double> out);
double sum_log_ratio(std::span<const double> x, double denom);
double log(double x) noexcept;
double log1p(double x) noexcept;
}  // namespace scalar

namespace avx2 {
void fv_log_integrand(std::span<const double> u, std::span<const double> a, double xi,
                      double power, double coef, std::span<double> out);
double sum_log_ratio(std::span<const double> x, double denom);
// Four-lane log / log1p applied elementwise; x.size() == out.size().
void log(std::span<const double> x, std::span<double> out);
void log1p(std::span<const double> x, std::span<double> out);
}  // namespace avx2

}  // namespace clusterguard::kernels
