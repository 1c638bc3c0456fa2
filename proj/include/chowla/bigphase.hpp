#pragma once

// frac(beta^n g(beta)) for n = 0..N-1 with rigorously propagated error
// bounds, plus numeric evidence for the Koksma hypotheses on x^n g(x).

#include <gmpxx.h>

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "chowla/core.hpp"

namespace chowla::bigphase {

/// The real number mantissa * 2^-frac_bits, known to within
/// err_ulps * 2^-frac_bits.
class HighPrecisionReal {
 public:
  static HighPrecisionReal dyadic(mpz_class mantissa, std::int64_t frac_bits);
  static HighPrecisionReal from_double(double x);
  /// Exact when q is dyadic, otherwise q truncated to `frac_bits`.
  static HighPrecisionReal rational(const mpq_class& q, std::int64_t frac_bits);
  /// (a + b*sqrt(c)) / d to `frac_bits`.
  static HighPrecisionReal quadratic(long a, long b, unsigned long c, long d,
                                     std::int64_t frac_bits);
  static HighPrecisionReal golden_ratio(std::int64_t frac_bits);
  /// Accepts "golden", "sqrt(c)", "p/q" or a decimal literal.
  static HighPrecisionReal parse(const std::string& text, std::int64_t frac_bits);

  const mpz_class& mantissa() const { return mantissa_; }
  std::int64_t frac_bits() const { return frac_bits_; }
  std::uint64_t err_ulps() const { return err_ulps_; }
  bool exact() const { return err_ulps_ == 0; }

  double to_double() const;
  /// A double >= every value in the uncertainty interval.
  double upper_bound() const;
  double lower_bound() const;
  mpq_class to_rational() const;
  std::string to_string(int digits = 20) const;

 private:
  HighPrecisionReal(mpz_class mantissa, std::int64_t frac_bits, std::uint64_t err_ulps);
  mpz_class mantissa_;
  std::int64_t frac_bits_ = 0;
  std::uint64_t err_ulps_ = 0;
};

/// A dyadic beta uniform in (lo, hi) with `frac_bits` random fractional bits.
HighPrecisionReal random_dyadic(double lo, double hi, std::int64_t frac_bits,
                                std::uint64_t seed);

/// g, g', g'' at a point together with an absolute error bound on g.
struct GValue {
  double g = 0;
  double g1 = 0;
  double g2 = 0;
  double err = 0;
};

/// g(beta) as value * 2^-bits with |error| <= 2^log2_err.
struct FixedValue {
  mpz_class value;
  double log2_err = -std::numeric_limits<double>::infinity();
};

struct TableRow {
  double x = 0;
  double g = 0;
  double g1 = 0;
  double g2 = 0;
};

class GFunc {
 public:
  enum class Kind { One, Polynomial, PowerProduct, UserTable };

  static GFunc one();
  /// c0 + c1 x + c2 x^2 + ...
  static GFunc polynomial(std::vector<double> coeffs);
  /// alpha * x^k.
  static GFunc power_product(double alpha, int k);
  /// Samples of (x, g, g', g''), sorted by x; evaluated by linear
  /// interpolation with an h^2/8 max|g''| error bound.
  static GFunc user_table(std::vector<TableRow> rows);
  /// "one", "poly:c0,c1,...", "power:alpha,k".
  static GFunc parse(const std::string& text);

  Kind kind() const { return kind_; }
  GValue eval(double x) const;
  FixedValue eval_fixed(const HighPrecisionReal& beta, std::int64_t bits) const;
  std::string describe() const;

 private:
  Kind kind_ = Kind::One;
  std::vector<double> coeffs_;
  double alpha_ = 1.0;
  int power_ = 0;
  std::vector<TableRow> table_;
};

struct PrecisionBudget {
  std::int64_t total_bits = 0;
  int guard_bits = 64;
  std::int64_t n_max = 0;
  double beta_upper = 2.0;

  /// required_precision plus enough slack to absorb truncation growth for
  /// every beta <= beta_upper.
  static PrecisionBudget for_stream(double beta_upper, std::int64_t n_max, int guard_bits = 64);
  /// Throws InvalidArgument unless total_bits covers n_max*log2(beta_upper)+guard.
  void validate() const;
};

/// ceil(n_max * log2(beta_upper)) + guard_bits.
std::int64_t required_precision(double beta_upper, std::int64_t n_max, int guard_bits);

/// Largest error an emitted term may carry: 2^-(max(guard,16)) + 2.
double emission_cap(int guard_bits);

struct PhaseTerm {
  std::uint64_t frac = 0;  // 2^-64 turns
  double err_bound = 0;
};

class PrecisionExhausted : public Error {
 public:
  PrecisionExhausted(std::int64_t n, double bound, double cap);
  std::int64_t n() const { return n_; }

 private:
  std::int64_t n_;
};

class PhaseStream {
 public:
  PhaseStream(HighPrecisionReal beta, GFunc g, PrecisionBudget budget,
              std::vector<PhaseTerm> terms);

  const HighPrecisionReal& beta() const { return beta_; }
  const GFunc& gfunc() const { return g_; }
  const PrecisionBudget& budget() const { return budget_; }
  const std::vector<PhaseTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  double frac(std::size_t n) const;
  double err_bound(std::size_t n) const { return terms_.at(n).err_bound; }
  double max_err_bound() const { return terms_.empty() ? 0.0 : terms_.back().err_bound; }

 private:
  HighPrecisionReal beta_;
  GFunc g_;
  PrecisionBudget budget_;
  std::vector<PhaseTerm> terms_;
};

/// Iterates y_{n+1} = beta * y_n from y_0 = g(beta) in fixed point with
/// budget.total_bits fractional bits (truncating); each step adds 2^-total_bits
/// to a bound that grows by beta. Throws PrecisionExhausted(n) when the
/// propagated bound exceeds emission_cap(guard_bits).
PhaseStream phase_stream(const HighPrecisionReal& beta, const GFunc& g,
                         const PrecisionBudget& budget);
PhaseStream phase_stream(const HighPrecisionReal& beta, const GFunc& g, std::int64_t n_max,
                         int guard_bits = 64);

struct KoksmaReport {
  std::string label = "numeric-evidence";
  double a = 0, b = 0;
  int m_start = 0, m_end = 0, grid_points = 0;
  std::int64_t pairs = 0;
  /// Grid minimum of |(f_m - f_n)'| over all pairs, with its location.
  double min_abs_d1 = 0;
  int argmin_m = 0, argmin_n = 0;
  double argmin_x = 0;
  bool condition2_positive = false;
  /// Pairs where (f'_m - f'_n)' kept a constant strict sign on the grid.
  std::int64_t monotone_pairs = 0;
  bool all_monotone = false;
  /// Smallest M such that both analytic lower bounds are positive on the
  /// grid for every m in (M, m_end].
  std::optional<int> bound_m;
};

KoksmaReport koksma_check(const GFunc& g, double a, double b, int m_start, int pair_budget,
                          int grid_points);

void write_stream_csv(std::ostream& os, const PhaseStream& stream);
/// Magic "CHLPHS01", u64 count, then per term a little-endian u64 frac and
/// an i16 ceil(log2 err_bound) (INT16_MIN for an exact term).
void write_stream_binary(std::ostream& os, const PhaseStream& stream);

struct BinaryPhaseRecord {
  std::uint64_t frac = 0;
  std::int16_t log2_err = 0;
};
std::vector<BinaryPhaseRecord> read_stream_binary(std::istream& is);

}  // namespace chowla::bigphase
