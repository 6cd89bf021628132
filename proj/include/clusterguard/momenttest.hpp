#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clusterguard/regression.hpp"

// Test of H0: E[||S_g||^r] < infinity from the largest k cluster-score
// magnitudes. The statistic compares the likelihood of the self-normalized
// top-k order statistics under tail shapes xi in [1, 2] (infinite r-th
// moment) against xi in [0, 1], the latter weighted by a calibrated measure
// Lambda = c * Uniform[0, 1] that absorbs the critical value.

namespace clusterguard::momenttest {

inline constexpr double kDefaultRelTol = 1e-8;
inline constexpr double kDefaultSizeTarget = 0.05;
inline constexpr std::size_t kMaxDefaultK = 50;

// ||S_g||^r for every row; r must be 1 or 2.
std::vector<double> score_magnitudes(const regression::ScoreMatrix& scores, int r);

// (A_(i) - A_(k)) / (A_(1) - A_(k)) over the k largest values, descending.
// Throws Degenerate when A_(1) == A_(k).
std::vector<double> normalize_top_k(std::span<const double> values, std::size_t k);

// log f_V*(v; xi), the density of the self-normalized top-k order statistics
// of a generalized Pareto tail with shape xi:
//
//   f = Gamma(k) * int_0^inf s^(k-2) prod_{i=1}^{k-1} (1 + xi v_i s)^(-1 - 1/xi) ds
//
// (v_1 = 1). Evaluated by adaptive Gauss-Legendre after s = u / (1 - u), with
// all panel sums carried in log space. xi == 0 (and xi below 1e-9) uses the
// closed form log[Gamma(k) Gamma(k-1) / (1 + sum_{i=2}^{k-1} v_i)^(k-1)].
// Throws QuadratureFailure if the estimated relative error cannot be pushed
// below rel_tol, or if the integral diverges (ties at the k-th value).
double log_fv_density(std::span<const double> v_star, double xi,
                      double rel_tol = kDefaultRelTol);

double log_fv_density_xi0(std::span<const double> v_star);

// log of int_1^2 f dW (W uniform) and of int_0^1 f dxi, each by 64-point
// Gauss-Legendre in xi.
struct LogIntegrals {
  double log_alternative = 0.0;
  double log_null_uniform = 0.0;
};
LogIntegrals log_integrals(std::span<const double> v_star);

struct CalibratedMeasure {
  std::size_t k = 0;
  double size_target = kDefaultSizeTarget;
  std::vector<double> null_grid;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  double scale = 0.0;  // c in Lambda = c * Uniform[0, 1]
  std::string lambda_id;
};

struct MomentTestResult {
  int r = 2;
  std::size_t k = 0;
  std::vector<double> v_star;
  double numerator = 0.0;
  double denominator = 0.0;
  double log_numerator = 0.0;
  double log_denominator = 0.0;
  double statistic = 0.0;
  bool reject = false;
  std::string lambda_id;
};

// min(floor(G / 2), 50).
std::size_t default_k(std::size_t num_clusters);

// Runs the test on precomputed magnitudes (A_g = ||S_g||^r).
MomentTestResult moment_test_magnitudes(std::span<const double> magnitudes, int r,
                                        std::size_t k, const CalibratedMeasure& lambda);

// Throws InvalidArgument (r not in {1, 2}, k < 3), InsufficientData (G < k),
// CalibrationMissing (lambda calibrated for another k) and Degenerate.
MomentTestResult moment_test(const regression::ScoreMatrix& scores, int r, std::size_t k,
                             const CalibratedMeasure& lambda);

std::vector<double> default_null_grid();

// Deterministic hex identifier of a calibration's inputs.
std::string grid_hash(std::span<const double> grid);
std::string make_lambda_id(std::size_t k, double size_target, std::span<const double> grid,
                           std::size_t reps, std::uint64_t seed);

// log of the integral ratio int f dW / int_0^1 f dxi for one null
// replication: the top k of a generalized Pareto sample with shape xi0, drawn
// through the exact order-statistic representation (the sample size drops
// out after normalization).
double null_log_ratio_draw(std::size_t k, double xi0, std::uint64_t seed, std::uint32_t rep,
                           std::uint32_t grid_index);

// Smallest c such that, at every xi0 in null_grid, the Monte Carlo rejection
// rate P(ratio / c > 1) is at most size_target. Throws CalibrationFailure
// when the ratios are not finite.
CalibratedMeasure calibrate_lambda(std::size_t k, double size_target,
                                   std::span<const double> null_grid, std::size_t reps,
                                   std::uint64_t seed, unsigned threads = 0);

// Plain-text key=value store of calibrations, one blank-line separated
// record per (k, size_target, grid_hash).
class CalibrationStore {
 public:
  static constexpr int kVersion = 1;
  static constexpr const char* kFileName = "lambda_calibration.txt";

  // $CLUSTERGUARD_CALIB_DIR, else the directory baked in at build time.
  static std::filesystem::path default_directory();

  // A missing file yields an empty store; malformed content throws FileError.
  static CalibrationStore load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file) const;

  // Prefers a record on the default null grid when several match.
  std::optional<CalibratedMeasure> find(std::size_t k, double size_target) const;
  void upsert(CalibratedMeasure measure);

  const std::vector<CalibratedMeasure>& records() const noexcept { return records_; }

 private:
  std::vector<CalibratedMeasure> records_;
};

}  // namespace clusterguard::momenttest
