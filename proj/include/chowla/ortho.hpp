#pragma once

// Zero-entropy systems (torus rotations, unipotent affine maps, periodic
// cycles), character observables and the Sarnak / MOMO harness.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chowla/core.hpp"
#include "chowla/turns.hpp"

namespace chowla::ortho {

/// A torus point in 2^-128 turns per coordinate. A cycle position j of
/// PeriodicCycle(p) is the point j/p.
using Point = std::vector<Turns128>;

Point make_point(std::span<const double> coords);

class ZeroEntropySystem {
 public:
  enum class Kind { Rotation, UnipotentAffine, PeriodicCycle };

  /// x -> x + alpha.
  static ZeroEntropySystem rotation(std::vector<double> alpha);
  /// x -> Mx + b; throws InvalidArgument unless M is integer,
  /// upper-triangular and (M - I)^d = 0.
  static ZeroEntropySystem unipotent(std::vector<std::vector<std::int64_t>> matrix,
                                     std::vector<double> translation);
  static ZeroEntropySystem periodic(std::uint32_t p);
  /// {"kind": "rotation"|"unipotent"|"cycle", "d", "alpha" | "matrix" +
  /// "translation" | "p"}.
  static ZeroEntropySystem from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  std::uint32_t period() const { return period_; }
  std::string describe() const;

  Point cycle_point(std::int64_t position) const;
  /// T x by one application of the map.
  Point step(const Point& x) const;
  /// T^n x in closed form.
  Point iterate(const Point& x, std::uint64_t n) const;

 private:
  Kind kind_ = Kind::Rotation;
  int dim_ = 1;
  std::vector<double> alpha_;
  std::vector<Turns128> shift_;
  std::vector<std::vector<std::int64_t>> matrix_;
  /// (M - I)^k for k < d, entries mod 2^128.
  std::vector<std::vector<std::vector<Turns128>>> nil_powers_;
  std::uint32_t period_ = 0;
};

/// Loads one system or an array of systems.
std::vector<ZeroEntropySystem> load_catalog(const std::filesystem::path& path);

struct Character {
  std::vector<std::int64_t> k;
  static Character trivial(int d) { return Character{std::vector<std::int64_t>(d, 0)}; }
};

/// e(<k, T^n x0>). Throws DimensionMismatch.
UnitValue orbit_eval(const ZeroEntropySystem& sys, const Character& chi, const Point& x0,
                     std::uint64_t n);
/// orbit_eval for n = 0 .. count-1.
std::vector<UnitValue> orbit_values(const ZeroEntropySystem& sys, const Character& chi,
                                    const Point& x0, std::uint64_t count);

/// (1/N) sum_{n<N} f(T^n x0) z(n).
std::complex<double> sarnak_test(const SequenceSource& src, const ZeroEntropySystem& sys,
                                 const Character& chi, const Point& x0, std::uint64_t N);

struct BlockSchedule {
  std::vector<std::uint64_t> b;

  /// b_k = k(k+1)/2, k = 0..K.
  static BlockSchedule triangular(std::size_t K);
  /// Triangular with the largest K such that b_K <= total.
  static BlockSchedule triangular_up_to(std::uint64_t total);
  /// b_k = k.
  static BlockSchedule trivial(std::size_t K);

  std::size_t blocks() const { return b.empty() ? 0 : b.size() - 1; }
  /// b_0 = 0, strictly increasing, gaps non-decreasing from block
  /// `burn_in` on, final gap >= gap_min. Throws InvalidArgument.
  void validate(std::size_t burn_in = 10, std::uint64_t gap_min = 1) const;
};

/// One block point per block, i.i.d. uniform on the torus (or the cycle).
std::vector<Point> random_points(const ZeroEntropySystem& sys, std::size_t K, std::uint64_t seed);

struct MomoReport {
  std::size_t K = 0;
  std::uint64_t length = 0;
  /// (1/b_K) sum_k (block sum).
  std::complex<double> plain;
  /// (1/b_K) sum_k |block sum|.
  double strong = 0;
  std::vector<std::complex<double>> block_sums;
};

/// Block k sums f(T^{n - b_k} x_k) z(n) over b_k <= n < b_{k+1}. Throws
/// ScheduleTooShort when the schedule has fewer than K blocks.
MomoReport momo_test(const SequenceSource& src, const ZeroEntropySystem& sys,
                     const Character& chi, const BlockSchedule& sched,
                     std::span<const Point> points, std::size_t K);

}  // namespace chowla::ortho
