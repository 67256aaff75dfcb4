#pragma once

#include <cstdint>
#include <limits>

namespace probtsf {

// PCG-XSL-RR 128/64 ("PCG64"). Satisfies UniformRandomBitGenerator so it can
// drive the <random> distributions.
//
// Streams: every generator is keyed by (seed, stream). Data generators use the
// trajectory index as the stream, so trajectory n is a pure function of
// (seed, n) no matter how many trajectories are produced or in what order.
class Pcg64 {
 public:
  using result_type = std::uint64_t;
  using u128 = unsigned __int128;

  explicit Pcg64(std::uint64_t seed = 0, std::uint64_t stream = 0) {
    // Scramble both words so nearby (seed, stream) pairs start far apart.
    const u128 init_state = (u128(splitmix(seed ^ 0x853c49e6748fea9bULL)) << 64) |
                            splitmix(seed + stream);
    inc_ = (u128(splitmix(stream)) << 64 | stream) << 1 | 1u;
    state_ = 0;
    next();
    state_ += init_state;
    next();
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  static constexpr u128 kMultiplier =
      (u128(0x2360ed051fc65da4ULL) << 64) | 0x4385df649fccf645ULL;

  result_type next() {
    state_ = state_ * kMultiplier + inc_;
    const auto hi = static_cast<std::uint64_t>(state_ >> 64);
    const auto lo = static_cast<std::uint64_t>(state_);
    const unsigned rot = static_cast<unsigned>(state_ >> 122);
    const std::uint64_t x = hi ^ lo;
    return (x >> rot) | (x << ((64u - rot) & 63u));
  }

  u128 state_ = 0;
  u128 inc_ = 1;
};

// Stream ids used by model initialization and training.
namespace streams {
inline constexpr std::uint64_t kMeanInit = 0xA001;
inline constexpr std::uint64_t kSigmaInit = 0xA002;
inline constexpr std::uint64_t kShuffle = 0xA003;
inline constexpr std::uint64_t kSplit = 0xA004;
}  // namespace streams

}  // namespace probtsf
