#pragma once

// Counter-based randomness: every draw is a pure function of (key, counter,
// lane), so evaluation order and thread count never change a sample.

#include <cstdint>
#include <string_view>

namespace chowla {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seed of a named substream; adding a substream never perturbs another.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return mix64(seed ^ mix64(h));
}

class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t seed) : key_(mix64(seed ^ 0x5EED5EED5EED5EEDull)) {}

  constexpr std::uint64_t bits(std::uint64_t counter, std::uint64_t lane = 0) const {
    return mix64(key_ ^ mix64(counter * 0xD1B54A32D192ED03ull + lane * 0x8CB92BA72F3D8DD7ull));
  }

  /// Uniform on [0,1) with 53 random bits.
  double uniform01(std::uint64_t counter, std::uint64_t lane = 0) const {
    return static_cast<double>(bits(counter, lane) >> 11) * 0x1p-53;
  }

  /// Uniform on {0, ..., bound-1} by 128-bit multiply-high (bias < bound / 2^64).
  std::uint64_t below(std::uint64_t bound, std::uint64_t counter, std::uint64_t lane = 0) const {
    const auto wide = static_cast<unsigned __int128>(bits(counter, lane)) * bound;
    return static_cast<std::uint64_t>(wide >> 64);
  }

 private:
  std::uint64_t key_;
};

}  // namespace chowla
