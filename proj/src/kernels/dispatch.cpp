#include <atomic>
#include <cstdlib>
#include <string>
#include <string_view>

#include "clusterguard/error.hpp"
#include "clusterguard/kernels.hpp"

namespace clusterguard::kernels {

namespace {

Backend detect() noexcept {
  if (const char* forced = std::getenv("CLUSTERGUARD_KERNELS")) {
    const std::string_view name(forced);
    if (name == "scalar") return Backend::Scalar;
    if (name == "avx2" && avx2_supported()) return Backend::Avx2;
  }
  return avx2_supported() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() noexcept {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

std::string_view to_string(Backend backend) noexcept {
  return backend == Backend::Avx2 ? "avx2" : "scalar";
}

bool avx2_supported() noexcept {
#if defined(CLUSTERGUARD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported;
#else
  return false;
#endif
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (backend == Backend::Avx2 && !avx2_supported()) {
    throw Error(ErrorKind::InvalidArgument, "AVX2/FMA kernels are not available on this CPU");
  }
  current().store(backend, std::memory_order_relaxed);
}

void fv_log_integrand(std::span<const double> u, std::span<const double> a, double xi,
                      double power, double coef, std::span<double> out) {
#if defined(CLUSTERGUARD_HAVE_AVX2)
  if (active_backend() == Backend::Avx2) {
    avx2::fv_log_integrand(u, a, xi, power, coef, out);
    return;
  }
#endif
  scalar::fv_log_integrand(u, a, xi, power, coef, out);
}

double sum_log_ratio(std::span<const double> x, double denom) {
#if defined(CLUSTERGUARD_HAVE_AVX2)
  if (active_backend() == Backend::Avx2) return avx2::sum_log_ratio(x, denom);
#endif
  return scalar::sum_log_ratio(x, denom);
}

}  // namespace clusterguard::kernels
