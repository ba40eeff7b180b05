#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

namespace divctl {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// 64-bit FNV-1a. Used to turn strings into seed material.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Combines two 64-bit values into one well-mixed value.
constexpr std::uint64_t combine64(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x9E3779B97F4A7C15ULL));
}

/// The splitmix64 generator. Its output sequence is fully specified, so
/// fixtures produced with it are portable across standard libraries
/// (unlike std::uniform_int_distribution and friends).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  constexpr explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  /// Independent stream for (seed, stream index).
  static constexpr SplitMix64 stream(std::uint64_t seed, std::uint64_t index) noexcept {
    return SplitMix64(combine64(seed, index));
  }

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 bits of precision.
  constexpr double uniform01() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound). `bound` must be positive. Plain modulo
  /// reduction; the bias is below 2^-40 for every bound used here.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept { return next() % bound; }

  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }
  constexpr std::uint64_t operator()() noexcept { return next(); }

 private:
  std::uint64_t state_;
};

/// Fisher-Yates shuffle driven by SplitMix64::below.
template <typename Range>
void seeded_shuffle(Range& range, SplitMix64& rng) {
  auto n = static_cast<std::uint64_t>(std::size(range));
  if (n < 2) return;
  for (std::uint64_t i = n - 1; i > 0; --i) {
    auto j = rng.below(i + 1);
    using std::swap;
    swap(range[i], range[j]);
  }
}

}  // namespace divctl
