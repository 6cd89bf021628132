// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <array>
#include <cmath>

#include "clusterguard/kernels.hpp"

namespace clusterguard::kernels::avx2 {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;
// fdlibm split of ln 2; e * kLn2Hi is exact for any double exponent.
constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;

// log(m) = 2 atanh(f), f = (m - 1) / (m + 1), |f| <= 3 - 2 sqrt(2) on
// [sqrt(1/2), sqrt(2)]. Ten odd-power terms bring truncation below 2^-54.
inline __m256d atanh_series(__m256d f) {
  const __m256d f2 = _mm256_mul_pd(f, f);
  __m256d p = _mm256_set1_pd(1.0 / 21.0);
  p = _mm256_fmadd_pd(p, f2, _mm256_set1_pd(1.0 / 19.0));
  p = _mm256_fmadd_pd(p, f2, _mm256_set1_pd(1.0 / 17.0));
  p = _mm256_fmadd_pd(p, f2, _mm256_set1_pd(1.0 / 15.0));
  p = _mm256_fmadd_pd(p, f2, _mm256_set1_pd(1.0 / 13.0));
  p = _mm256_fmadd_pd(p, f2, _mm256_set1_pd(1.0 / 11.0));
  p = _mm256_fmadd_pd(p, f2, _mm256_set1_pd(1.0 / 9.0));
  p = _mm256_fmadd_pd(p, f2, _mm256_set1_pd(1.0 / 7.0));
  p = _mm256_fmadd_pd(p, f2, _mm256_set1_pd(1.0 / 5.0));
  p = _mm256_fmadd_pd(p, f2, _mm256_set1_pd(1.0 / 3.0));
  // 2 f (1 + f2 p) = 2f + 2f * f2 * p
  const __m256d two_f = _mm256_add_pd(f, f);
  return _mm256_fmadd_pd(_mm256_mul_pd(two_f, f2), p, two_f);
}

struct Decomposed {
  __m256d mantissa;  // in [sqrt(1/2), sqrt(2)]
  __m256d exponent;  // as double
};

// x positive, finite, normal.
inline Decomposed decompose(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i mantissa_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  const __m256i magic_bits = _mm256_set1_epi64x(0x4330000000000000LL);
  const __m256d magic = _mm256_set1_pd(0x1.0p52);

  const __m256i biased = _mm256_srli_epi64(bits, 52);
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, mantissa_mask), one_bits));
  __m256d e = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(biased, magic_bits)), magic);
  e = _mm256_sub_pd(e, _mm256_set1_pd(1023.0));

  const __m256d high = _mm256_cmp_pd(m, _mm256_set1_pd(kSqrt2), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), high);
  e = _mm256_add_pd(e, _mm256_and_pd(high, _mm256_set1_pd(1.0)));
  return {m, e};
}

inline __m256d combine(__m256d log_mantissa, __m256d e) {
  const __m256d low = _mm256_fmadd_pd(e, _mm256_set1_pd(kLn2Lo), log_mantissa);
  return _mm256_fmadd_pd(e, _mm256_set1_pd(kLn2Hi), low);
}

inline __m256d log_pd(__m256d x) {
  const auto [m, e] = decompose(x);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d f = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  return combine(atanh_series(f), e);
}

// x >= 0. For x < sqrt(2) - 1 the reduction f = x / (2 + x) avoids the
// rounding of 1 + x entirely.
inline __m256d log1p_pd(__m256d x) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d u = _mm256_add_pd(one, x);
  const auto [m, e] = decompose(u);
  const __m256d small = _mm256_cmp_pd(x, _mm256_set1_pd(kSqrt2 - 1.0), _CMP_LT_OQ);
  const __m256d num = _mm256_blendv_pd(_mm256_sub_pd(m, one), x, small);
  const __m256d den = _mm256_blendv_pd(_mm256_add_pd(m, one), _mm256_add_pd(_mm256_set1_pd(2.0), x), small);
  return combine(atanh_series(_mm256_div_pd(num, den)), e);
}

inline double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

inline __m256d fv_block(__m256d u, std::span<const double> a, __m256d xi, __m256d power,
                        __m256d coef) {
  const __m256d one_minus = _mm256_sub_pd(_mm256_set1_pd(1.0), u);
  const __m256d s = _mm256_div_pd(u, one_minus);
  const __m256d xs = _mm256_mul_pd(xi, s);
  __m256d acc = _mm256_setzero_pd();
  for (double ai : a) acc = _mm256_add_pd(acc, log1p_pd(_mm256_mul_pd(_mm256_set1_pd(ai), xs)));
  const __m256d log_one_minus = log_pd(one_minus);
  const __m256d log_s = _mm256_sub_pd(log_pd(u), log_one_minus);
  __m256d out = _mm256_mul_pd(power, log_s);
  out = _mm256_fnmadd_pd(coef, acc, out);
  return _mm256_fnmadd_pd(_mm256_set1_pd(2.0), log_one_minus, out);
}

}  // namespace

void fv_log_integrand(std::span<const double> u, std::span<const double> a, double xi,
                      double power, double coef, std::span<double> out) {
  const __m256d vxi = _mm256_set1_pd(xi);
  const __m256d vpower = _mm256_set1_pd(power);
  const __m256d vcoef = _mm256_set1_pd(coef);
  const std::size_t n = u.size();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    _mm256_storeu_pd(out.data() + j, fv_block(_mm256_loadu_pd(u.data() + j), a, vxi, vpower, vcoef));
  }
  if (j < n) {
    // Pad the tail so every node goes through the same lane arithmetic.
    std::array<double, 4> pad_in{0.5, 0.5, 0.5, 0.5};
    std::array<double, 4> pad_out{};
    for (std::size_t t = j; t < n; ++t) pad_in[t - j] = u[t];
    _mm256_storeu_pd(pad_out.data(), fv_block(_mm256_loadu_pd(pad_in.data()), a, vxi, vpower, vcoef));
    for (std::size_t t = j; t < n; ++t) out[t] = pad_out[t - j];
  }
}

double sum_log_ratio(std::span<const double> x, double denom) {
  const __m256d vden = _mm256_set1_pd(denom);
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n = x.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, log_pd(_mm256_div_pd(_mm256_loadu_pd(x.data() + i), vden)));
  }
  if (i < n) {
    std::array<double, 4> pad{1.0, 1.0, 1.0, 1.0};
    for (std::size_t t = i; t < n; ++t) pad[t - i] = x[t] / denom;
    acc = _mm256_add_pd(acc, log_pd(_mm256_loadu_pd(pad.data())));
  }
  return horizontal_sum(acc);
}

void log(std::span<const double> x, std::span<double> out) {
  std::size_t i = 0;
  for (; i + 4 <= x.size(); i += 4) {
    _mm256_storeu_pd(out.data() + i, log_pd(_mm256_loadu_pd(x.data() + i)));
  }
  for (; i < x.size(); ++i) {
    std::array<double, 4> pad{x[i], 1.0, 1.0, 1.0};
    std::array<double, 4> res{};
    _mm256_storeu_pd(res.data(), log_pd(_mm256_loadu_pd(pad.data())));
    out[i] = res[0];
  }
}

void log1p(std::span<const double> x, std::span<double> out) {
  std::size_t i = 0;
  for (; i + 4 <= x.size(); i += 4) {
    _mm256_storeu_pd(out.data() + i, log1p_pd(_mm256_loadu_pd(x.data() + i)));
  }
  for (; i < x.size(); ++i) {
    std::array<double, 4> pad{x[i], 0.0, 0.0, 0.0};
    std::array<double, 4> res{};
    _mm256_storeu_pd(res.data(), log1p_pd(_mm256_loadu_pd(pad.data())));
    out[i] = res[0];
  }
}

}  // namespace clusterguard::kernels::avx2
