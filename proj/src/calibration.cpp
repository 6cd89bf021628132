#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "clusterguard/error.hpp"
#include "clusterguard/momenttest.hpp"
#include "clusterguard/parallel.hpp"
#include "clusterguard/rng.hpp"

#ifndef CLUSTERGUARD_DEFAULT_CALIB_DIR
#define CLUSTERGUARD_DEFAULT_CALIB_DIR "data/calibration"
#endif

namespace clusterguard::momenttest {

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string join_grid(std::span<const double> grid) {
  std::string out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i) out += ',';
    out += fmt::format("{:.17g}", grid[i]);
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    grid.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument(item);
  }
  return grid;
}

bool same_grid(std::span<const double> a, std::span<const double> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

std::vector<double> default_null_grid() { return {0.25, 0.5, 0.75, 1.0}; }

std::string grid_hash(std::span<const double> grid) {
  return fmt::format("{:016x}", fnv1a(join_grid(grid)));
}

std::string make_lambda_id(std::size_t k, double size_target, std::span<const double> grid,
                           std::size_t reps, std::uint64_t seed) {
  const auto canonical = fmt::format("k={};size_target={:.17g};grid={};reps={};seed={}", k,
                                     size_target, join_grid(grid), reps, seed);
  return fmt::format("lam-{:016x}", fnv1a(canonical));
}

double null_log_ratio_draw(std::size_t k, double xi0, std::uint64_t seed, std::uint32_t rep,
                           std::uint32_t grid_index) {
  // Top k of n GPD(xi0) draws: X_(i) = ((G_i / G_{n+1})^(-xi0) - 1) / xi0 with
  // G_i partial sums of unit exponentials. After location/scale
  // normalization only G_i^(-xi0) (or -log G_i at xi0 = 0) matters.
  rng::Stream stream(seed, rep, grid_index, rng::Role::NullSample);
  std::vector<double> top(k);
  double gamma = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    gamma += stream.exponential();
    top[i] = xi0 > 0.0 ? std::exp(-xi0 * std::log(gamma)) : -std::log(gamma);
  }
  const auto v_star = normalize_top_k(top, k);
  const auto integrals = log_integrals(v_star);
  return integrals.log_alternative - integrals.log_null_uniform;
}

CalibratedMeasure calibrate_lambda(std::size_t k, double size_target,
                                   std::span<const double> null_grid, std::size_t reps,
                                   std::uint64_t seed, unsigned threads) {
  if (k < 3) throw Error(ErrorKind::InvalidArgument, "k must be at least 3");
  if (!(size_target > 0.0 && size_target < 0.5)) {
    throw Error(ErrorKind::InvalidArgument, "size_target must lie in (0, 0.5)");
  }
  if (null_grid.empty()) throw Error(ErrorKind::InvalidArgument, "null grid is empty");
  for (double xi0 : null_grid) {
    if (!(xi0 > 0.0 && xi0 <= 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "null grid values must lie in (0, 1]");
    }
  }
  if (reps == 0) throw Error(ErrorKind::InvalidArgument, "reps must be positive");
  if (threads == 0) threads = default_threads();

  const std::size_t grid_size = null_grid.size();
  std::vector<double> log_ratios(grid_size * reps);
  parallel_for(log_ratios.size(), threads, [&](std::size_t idx) {
    const std::size_t g = idx / reps;
    const std::size_t rep = idx % reps;
    log_ratios[idx] = null_log_ratio_draw(k, null_grid[g], seed, static_cast<std::uint32_t>(rep),
                                          static_cast<std::uint32_t>(g));
  });

  // Rejecting when ratio > c leaves at most floor(size * reps) exceedances
  // for c equal to that order statistic of the ratios.
  const auto allowed = static_cast<std::size_t>(std::floor(size_target * static_cast<double>(reps)));
  double log_scale = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid_size; ++g) {
    std::vector<double> column(log_ratios.begin() + static_cast<std::ptrdiff_t>(g * reps),
                               log_ratios.begin() + static_cast<std::ptrdiff_t>((g + 1) * reps));
    if (!std::all_of(column.begin(), column.end(), [](double v) { return std::isfinite(v); })) {
      throw Error(ErrorKind::CalibrationFailure,
                  fmt::format("non-finite integral ratio at xi0 = {}", null_grid[g]));
    }
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(allowed),
                     column.end(), std::greater<>());
    log_scale = std::max(log_scale, column[allowed]);
  }
  const double scale = std::exp(log_scale);
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorKind::CalibrationFailure, "no finite Lambda scale controls size on the grid");
  }

  CalibratedMeasure measure;
  measure.k = k;
  measure.size_target = size_target;
  measure.null_grid.assign(null_grid.begin(), null_grid.end());
  measure.reps = reps;
  measure.seed = seed;
  measure.scale = scale;
  measure.lambda_id = make_lambda_id(k, size_target, null_grid, reps, seed);
  return measure;
}

std::filesystem::path CalibrationStore::default_directory() {
  if (const char* dir = std::getenv("CLUSTERGUARD_CALIB_DIR"); dir && *dir) return dir;
  return CLUSTERGUARD_DEFAULT_CALIB_DIR;
}

CalibrationStore CalibrationStore::load(const std::filesystem::path& file) {
  CalibrationStore store;
  std::ifstream in(file);
  if (!in) return store;

  std::map<std::string, std::string> fields;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::FileError,
                fmt::format("{}:{}: malformed calibration store: {}", file.string(), line_no, why));
  };
  auto flush = [&] {
    if (fields.empty()) return;
    if (fields.size() == 1 && fields.count("format_version")) {
      if (fields["format_version"] != std::to_string(kVersion)) fail("unsupported format_version");
      fields.clear();
      return;
    }
    try {
      CalibratedMeasure m;
      m.k = std::stoul(fields.at("k"));
      m.size_target = std::stod(fields.at("size_target"));
      m.null_grid = parse_grid(fields.at("null_grid"));
      m.reps = std::stoul(fields.at("reps"));
      m.seed = std::stoull(fields.at("seed"));
      m.scale = std::stod(fields.at("scale"));
      m.lambda_id = fields.at("lambda_id");
      if (fields.count("grid_hash") && fields.at("grid_hash") != grid_hash(m.null_grid)) {
        fail("grid_hash does not match null_grid");
      }
      store.records_.push_back(std::move(m));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(std::string("bad or missing field (") + e.what() + ")");
    }
    fields.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key=value");
    fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  flush();
  return store;
}

void CalibrationStore::save(const std::filesystem::path& file) const {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  const auto tmp = std::filesystem::path(file.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorKind::FileError, "cannot write " + tmp.string());
    out << "# clusterguard calibration store: Lambda = scale * Uniform[0,1]\n";
    out << "format_version=" << kVersion << "\n";
    for (const auto& m : records_) {
      out << "\n";
      out << "k=" << m.k << "\n";
      out << "size_target=" << fmt::format("{:.17g}", m.size_target) << "\n";
      out << "null_grid=" << join_grid(m.null_grid) << "\n";
      out << "grid_hash=" << grid_hash(m.null_grid) << "\n";
      out << "reps=" << m.reps << "\n";
      out << "seed=" << m.seed << "\n";
      out << "scale=" << fmt::format("{:.17g}", m.scale) << "\n";
      out << "lambda_id=" << m.lambda_id << "\n";
    }
    if (!out) throw Error(ErrorKind::FileError, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

std::optional<CalibratedMeasure> CalibrationStore::find(std::size_t k, double size_target) const {
  const auto preferred = default_null_grid();
  std::optional<CalibratedMeasure> fallback;
  for (const auto& m : records_) {
    if (m.k != k || m.size_target != size_target) continue;
    if (same_grid(m.null_grid, preferred)) return m;
    if (!fallback) fallback = m;
  }
  return fallback;
}

void CalibrationStore::upsert(CalibratedMeasure measure) {
  const auto hash = grid_hash(measure.null_grid);
  for (auto& m : records_) {
    if (m.k == measure.k && m.size_target == measure.size_target &&
        grid_hash(m.null_grid) == hash) {
      m = std::move(measure);
      return;
    }
  }
  records_.push_back(std::move(measure));
  std::stable_sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) {
    return a.k != b.k ? a.k < b.k : a.size_target < b.size_target;
  });
}

}  // namespace clusterguard::momenttest
