#pragma once

// Counter-based random numbers: Philox4x32-10 (Salmon et al., SC'11).
// A draw is a pure function of (key, counter), so any path/time pair can be
// regenerated independently of the order in which paths are simulated.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace dualhedge {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Normal variates keyed by (seed, stream, step, block).
///
/// `stream` is the path index; `step` the fine time step; `block` indexes
/// successive pairs of normals needed within one step (ceil(d/2) blocks for
/// d assets). Each Philox block yields two 53-bit uniforms and, through
/// Box-Muller, two independent standard normals.
class NormalStream {
 public:
  explicit constexpr NormalStream(std::uint64_t seed) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  std::pair<double, double> pair(std::uint64_t stream, std::uint32_t step,
                                 std::uint32_t blk) const noexcept {
    const auto out = Philox4x32::block(
        {step, blk, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
        key_);
    const double u1 = to_unit(out[0], out[1]);
    const double u2 = to_unit(out[2], out[3]);
    // 1 - u1 lies in (0, 1], so the log is finite.
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  /// Fills `out[0..n)` with the normals of one (stream, step).
  void fill(std::uint64_t stream, std::uint32_t step, double* out, std::size_t n) const noexcept {
    std::uint32_t blk = 0;
    std::size_t k = 0;
    for (; k + 1 < n; k += 2, ++blk) {
      const auto [a, b] = pair(stream, step, blk);
      out[k] = a;
      out[k + 1] = b;
    }
    if (k < n) out[k] = pair(stream, step, blk).first;
  }

 private:
  static constexpr double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  Philox4x32::Key key_;
};

}  // namespace dualhedge
