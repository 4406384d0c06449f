#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace fastdiff {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Standard normal quantile Phi^{-1}(p) for p in (0, 1).
double normal_quantile(double p);

/// Draw channels inside one (path, species) stream.
enum class Channel : std::uint8_t {
  ou_fluctuation = 0,  ///< joint OU increments of the fluctuation modes
  edge_bottom = 1,     ///< edge Brownians beta_{e,l}, e = y=0
  edge_top = 2,        ///< y=1
  edge_left = 3,       ///< x=0
  edge_right = 4,      ///< x=1
  limit_driver = 5,    ///< fresh increments for an uncoupled limit SDE
  scalar_ou = 6,       ///< single-mode OU experiments
};

/// Counter-based Gaussian stream (one 32-bit Philox word per normal, mapped
/// through the normal quantile) keyed by (seed, path, species, channel).
/// Every draw is a pure function of (key, step, index), so paths may run in
/// any order on any thread and still reproduce bit-for-bit.
class RandomStream {
 public:
  RandomStream() = default;
  RandomStream(std::uint64_t seed, std::uint32_t path);

  RandomStream with(std::uint32_t species, Channel channel) const;

  std::uint64_t seed() const { return seed_; }
  std::uint32_t path() const { return path_; }

  /// Fills out[i] with the i-th standard normal of the given step.
  void fill_normals(std::uint64_t step, std::span<double> out) const;
  double normal(std::uint64_t step, std::uint32_t index) const;

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t step, std::uint32_t block_index) const;

  std::uint64_t seed_ = 0;
  std::uint32_t path_ = 0;
  std::uint32_t species_ = 0;
  Channel channel_ = Channel::ou_fluctuation;
  std::array<std::uint32_t, 2> key_{};
};

}  // namespace fastdiff
