#pragma once

#include <array>
#include <cstdint>

namespace clusterguard::rng {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

// Philox4x32-10 block function (Salmon et al., SC'11). Stateless: the same
// (counter, key) pair always yields the same 128 output bits.
Philox4x32Counter philox4x32(Philox4x32Counter counter, Philox4x32Key key) noexcept;

// Substream roles keep independent draws for different model components
// from ever sharing counter space.
enum class Role : std::uint32_t {
  ClusterSize = 1,
  Regressor = 2,
  Error = 3,
  Score = 4,
  Direction = 5,
  NullSample = 6,
  Generic = 7,
};

// A reproducible stream addressed by (seed, replication, cluster, role).
// Draw i of a stream is a pure function of that address and i, so streams can
// be consumed from any thread in any order.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint32_t replication, std::uint32_t cluster,
         Role role) noexcept;

  std::uint64_t next_u64() noexcept;

  // Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform() noexcept;

  // Standard normal via Box-Muller; pairs are cached.
  double normal() noexcept;

  // Pareto(1, alpha) by inverse CDF: (1 - U)^(-1/alpha).
  double pareto(double alpha) noexcept;

  double exponential() noexcept;

 private:
  Philox4x32Key key_;
  Philox4x32Counter base_;
  std::uint32_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace clusterguard::rng
