#pragma once

// Uniform-distribution diagnostics, empirical cylinder measures, the hat
// measure built from a support measure, and the genericity test.

#include <gmpxx.h>

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chowla/core.hpp"

namespace chowla::equidist {

/// D*_N of points in [0,1). Throws PointOutOfRange otherwise.
double star_discrepancy(std::span<const double> points);

/// (1/N) sum_{n<N} z(n) e(P(n)), P(t) = poly[0] + poly[1] t + ...; P(n) is
/// reduced mod 1 in 2^-128 turn arithmetic.
std::complex<double> weyl_sum(const SequenceSource& src, std::span<const double> poly,
                              std::uint64_t N);

/// A cylinder [b_0, ..., b_{k-1}]. Finite m: letters over U(m) ∪ {0}.
/// Circle case: bins[j] in {0} ∪ {1..q}, 0 standing for the letter 0.
struct CylinderSpec {
  std::vector<UnitValue> letters;
  std::vector<std::uint32_t> bins;

  std::size_t depth() const { return letters.empty() ? bins.size() : letters.size(); }
  /// Support word: bit j set iff b_j != 0, b_0 most significant.
  std::uint64_t support_code() const;
  std::string to_string(std::optional<std::uint32_t> m = std::nullopt) const;
};

/// Cylinder probabilities of a shift-invariant measure on {0,1}^N up to
/// depth k_max. Words are indexed with the first letter most significant.
class SupportMeasure {
 public:
  static SupportMeasure point_mass_ones(int k_max);
  /// Product measure with P(1) = p.
  static SupportMeasure bernoulli(const mpq_class& p, int k_max);
  /// Window frequencies over n in [0, N - k_max] of a {0,1} sequence.
  static SupportMeasure from_support(std::span<const std::uint8_t> bits, int k_max);
  /// table[k][w] = prob of the depth-k word w, for k = 0..k_max. Throws
  /// InvalidArgument unless consistent within 2^-30.
  static SupportMeasure from_table(const std::vector<std::vector<double>>& table);

  int k_max() const { return static_cast<int>(table_.size()) - 1; }
  const mpq_class& prob(std::uint64_t word, int k) const;
  /// Largest |prob(w) - prob(w0) - prob(w1)|.
  double consistency_error() const;

 private:
  std::vector<std::vector<mpq_class>> table_;
};

/// nu(pi(b)) * (1/m)^{#non-zero letters}. Throws LetterNotInUm for a letter
/// not exactly in U(m) ∪ {0}.
mpq_class hat_measure_exact(const CylinderSpec& b, const SupportMeasure& nu, std::uint32_t m);
double hat_measure(const CylinderSpec& b, const SupportMeasure& nu, std::uint32_t m);

struct GenericityOptions {
  /// Circle case when nullopt.
  std::optional<std::uint32_t> m = 2;
  std::uint32_t circle_bins = 8;
  double tol_phase = 0x1p-20;
  double rejection_cut = 1e-3;
  std::uint64_t cylinder_cap = 1u << 20;
  /// Defaults to the empirical support measure of the same windows.
  std::optional<SupportMeasure> nu;
};

struct CylinderRow {
  std::uint64_t code = 0;
  std::string label;
  double empirical = 0;
  double expected = 0;
  double deviation() const { return empirical - expected; }
};

struct GenericityReport {
  int k_max = 0;
  std::uint64_t N = 0;
  std::uint64_t windows = 0;
  double tol = 0;
  double rejected_density = 0;
  double max_deviation = 0;
  bool pass = false;
  std::vector<CylinderRow> rows;
};

/// Compares empirical depth-k_max cylinder frequencies of z with the hat
/// measure of the support measure. Errors: CylinderExplosion,
/// RejectionDensityExceeded.
GenericityReport genericity_test(const SequenceSource& src, int k_max, std::uint64_t N,
                                 double tol, const GenericityOptions& opts = {});

/// cylinder,empirical,expected,deviation.
void write_genericity_csv(std::ostream& os, const GenericityReport& r);
nlohmann::json to_json(const GenericityReport& r);

}  // namespace chowla::equidist
