#pragma once

// Fixed-point arithmetic on fractions of a turn. A Turns128 value t stands
// for t / 2^128 in [0,1); unsigned wrap-around is reduction mod 1, so
// integer multiples of a phase are exact.

#include <cmath>
#include <cstdint>
#include <string>

namespace chowla {

using Turns128 = unsigned __int128;
using Int128 = __int128;

/// frac(x) in 2^-128 units. Exact whenever x has at most 128 fractional bits
/// (every double of magnitude >= 2^-75), truncated otherwise.
inline Turns128 real_to_turns128(double x) {
  if (x == 0.0 || !std::isfinite(x)) return 0;
  int e = 0;
  const double m = std::frexp(x, &e);  // x = m * 2^e, 0.5 <= |m| < 1
  const auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
  const int frac_bits = 53 - e;  // x = mant * 2^-frac_bits
  if (frac_bits <= 0) return 0;
  if (frac_bits <= 128) return static_cast<Turns128>(static_cast<Int128>(mant)) << (128 - frac_bits);
  const int drop = frac_bits - 128;
  if (drop >= 64) return mant < 0 ? ~static_cast<Turns128>(0) : 0;
  return static_cast<Turns128>(static_cast<Int128>(mant >> drop));
}

inline std::uint64_t top64(Turns128 t) { return static_cast<std::uint64_t>(t >> 64); }

inline Turns128 turns64_to_128(std::uint64_t t) { return static_cast<Turns128>(t) << 64; }

/// c * t mod 1.
inline Turns128 mul_turns(Turns128 t, Int128 c) { return t * static_cast<Turns128>(c); }

inline double turns_to_phase(std::uint64_t t) {
  const double p = std::ldexp(static_cast<double>(t), -64);
  return p < 1.0 ? p : std::nextafter(1.0, 0.0);
}

/// Circular distance between two turn counts, in turns.
inline double circular_distance(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t d = a - b;
  const std::uint64_t e = b - a;
  return std::ldexp(static_cast<double>(d < e ? d : e), -64);
}

/// Truncated decimal expansion of t / 2^64 with `digits` fractional digits.
std::string turns_to_decimal(std::uint64_t t, int digits = 20);

/// Parses a decimal in [0,1) to the nearest 2^-64 turn. Returns false on
/// malformed input or a value outside [0,1).
bool decimal_to_turns(const std::string& text, std::uint64_t& out);

}  // namespace chowla
