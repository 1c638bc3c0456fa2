#pragma once

// Correlation averages of extended powers, the Chowla battery, empirical
// index estimation and a small exhaustive scan for exact phase relations.

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chowla/core.hpp"

namespace chowla::correlate {

struct CorrelationReport {
  Pattern pattern;
  std::uint64_t n_used = 0;
  std::complex<double> value;
  /// (N_k, average over n < N_k) at the requested checkpoints.
  std::vector<std::pair<std::uint64_t, std::complex<double>>> running;
  /// 2 pi * (source phase error) * sum |i_s|.
  double err_hint = 0;

  double modulus() const { return std::abs(value); }
};

/// (1/N) sum_{n<N} prod_s z(n + a_s)^(i_s). Throws InvalidArgument for a
/// pattern rejected by pattern_validate against the declared index.
CorrelationReport correlation_avg(const SequenceSource& src, const Pattern& p, std::uint64_t N,
                                  std::span<const std::uint64_t> checkpoints = {});
/// Same average over already materialized values z(0 .. N + max_shift).
CorrelationReport correlation_avg(std::span<const UnitValue> z, const Pattern& p,
                                  std::uint64_t N, double phase_error = 0.0,
                                  std::span<const std::uint64_t> checkpoints = {});

/// max(0.05, 5/sqrt(N)).
double default_tolerance(std::uint64_t N);

struct EnumerationOptions {
  std::uint64_t pattern_cap = 100000;
  /// Only patterns with a_1 = 0.
  bool canonical_base = true;
  /// With a finite index: reduce exponents mod m and keep one of each
  /// conjugate pair.
  bool dedupe = true;
};

/// Shifts from {0..max_shift} (increasing), exponents from exp_set, in
/// lexicographic order of (shift set, exponent tuple). Throws PatternExplosion
/// beyond the cap.
std::vector<Pattern> enumerate_patterns(int max_shift, std::span<const std::int64_t> exp_set,
                                        const std::optional<IndexBound>& index,
                                        const EnumerationOptions& opts = {});

struct BatteryResult {
  std::vector<CorrelationReport> reports;
  double tol = 0;
  bool pass = true;
  /// Position of the first report with the largest modulus.
  std::size_t worst = 0;

  const CorrelationReport& worst_offender() const { return reports.at(worst); }
};

BatteryResult chowla_battery(const SequenceSource& src, int max_shift,
                             std::span<const std::int64_t> exp_set, std::uint64_t N, double tol,
                             const EnumerationOptions& opts = {});

struct IndexEstimate {
  IndexBound bound = IndexBound::infinite();
  /// density[j] = d_{j+2}.
  std::vector<double> density;
  double density_cut = 1e-3;
  double tol_phase = 0;
};

/// d_m = #{n < N : z(n) != 0 and z(n) is farther than tol_phase from U(m)} / N
/// for m = 2..m_max.
IndexEstimate estimate_index(const SequenceSource& src, std::uint64_t N, std::int64_t m_max,
                             double tol_phase = 1e-9, double density_cut = 1e-3);

/// Patterns with a_1 = 0, shifts in {0..max_shift}, non-zero exponents with
/// |i| <= exp_bound, whose average has modulus >= 1 - threshold.
std::vector<CorrelationReport> relation_scan(const SequenceSource& src, int max_shift,
                                             int exp_bound, std::uint64_t N,
                                             double threshold = 1e-6,
                                             std::uint64_t pattern_cap = 100000);

/// pattern,N,re,im,modulus.
void write_reports_csv(std::ostream& os, std::span<const CorrelationReport> reports);
nlohmann::json to_json(const CorrelationReport& r);
nlohmann::json to_json(const BatteryResult& b);
nlohmann::json to_json(const IndexEstimate& e);

}  // namespace chowla::correlate
