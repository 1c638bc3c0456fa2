#pragma once

// Domain types shared by every module: values in S^1 ∪ {0}, extended powers,
// correlation patterns, index bounds and the sequence-source abstraction.

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chowla {

enum class ErrorCode {
  InvalidArgument,
  PrecisionExhausted,
  GVanishes,
  OutOfRange,
  BadSupport,
  ParseError,
  LengthMismatch,
  SourceTooShort,
  PatternExplosion,
  PointOutOfRange,
  LetterNotInUm,
  CylinderExplosion,
  RejectionDensityExceeded,
  DimensionMismatch,
  ScheduleTooShort,
  NodeCapExceeded,
  WordCapExceeded,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Circular tolerance used when comparing phases.
inline constexpr double kPhaseEpsilon = 0x1p-40;

/// A point of S^1 ∪ {0}. The phase is a fraction of a turn in [0,1).
///
/// Two exact encodings are kept: a rational k/m (roots of unity stay exact
/// under powers and products) and a 64-bit fixed-point turn count, where
/// integer multiples wrap modulo one without rounding. The modulus is never
/// stored.
class UnitValue {
 public:
  /// The value 1.
  constexpr UnitValue() = default;

  static UnitValue zero();
  static UnitValue one() { return {}; }
  static UnitValue from_turns(std::uint64_t turns);
  static UnitValue root_of_unity(std::int64_t k, std::uint32_t m);
  /// Reduces `phase` mod 1; the result is the nearest 2^-64 turn.
  static UnitValue from_phase(double phase);

  bool is_zero() const noexcept { return zero_; }
  bool is_rational() const noexcept { return !zero_ && den_ != 0; }
  /// Denominator of a rational phase, 0 for fixed-point phases.
  std::uint32_t denominator() const noexcept { return zero_ ? 1 : den_; }
  std::uint64_t numerator() const noexcept { return zero_ ? 0 : num_; }

  std::uint64_t turns() const noexcept;
  double phase() const noexcept;
  std::complex<double> value() const noexcept;

  UnitValue pow(std::int64_t n) const noexcept;
  UnitValue conj() const noexcept { return pow(-1); }
  friend UnitValue operator*(const UnitValue& x, const UnitValue& y) noexcept;

  bool approx_equal(const UnitValue& other, double eps = kPhaseEpsilon) const noexcept;

  /// Index k with |phase - k/m| <= tol (circular), if any.
  std::optional<std::uint32_t> snap_to_root(std::uint32_t m, double tol) const noexcept;

  /// Representation equality (bit identity), not numeric closeness.
  friend bool operator==(const UnitValue&, const UnitValue&) = default;

 private:
  std::uint64_t num_ = 0;  // numerator (< den_) or turns when den_ == 0
  std::uint32_t den_ = 1;
  bool zero_ = false;
};

/// x^(n): x^n on the circle, 0 at 0 (including n = 0).
inline UnitValue uv_pow(const UnitValue& x, std::int64_t n) { return x.pow(n); }
inline UnitValue uv_mul(const UnitValue& x, const UnitValue& y) { return x * y; }

std::string to_string(const UnitValue& x);

/// The reduced k/m with m <= max_den closest to turns / 2^64, if it lies
/// within `tol` turns.
std::optional<UnitValue> snap_rational(std::uint64_t turns, std::uint32_t max_den, double tol);

class IndexBound {
 public:
  enum class Kind { Finite, ExceedsTested, Infinite };

  static IndexBound finite(std::int64_t m);
  static IndexBound exceeds_tested(std::int64_t m_max);
  static IndexBound infinite() { return IndexBound(Kind::Infinite, 0); }

  Kind kind() const noexcept { return kind_; }
  bool is_finite() const noexcept { return kind_ == Kind::Finite; }
  /// m for Finite, m_max for ExceedsTested, 0 otherwise.
  std::int64_t m() const noexcept { return m_; }

  std::string to_string() const;
  friend bool operator==(const IndexBound&, const IndexBound&) = default;

 private:
  IndexBound(Kind kind, std::int64_t m) : kind_(kind), m_(m) {}
  Kind kind_;
  std::int64_t m_;
};

/// Shifts a_1 < ... < a_r paired with exponents i_1 ... i_r.
struct Pattern {
  std::vector<std::int64_t> shifts;
  std::vector<std::int64_t> exponents;

  std::int64_t max_shift() const { return shifts.empty() ? 0 : shifts.back(); }
  std::size_t size() const { return shifts.size(); }
  Pattern negated() const;
  Pattern shifted(std::int64_t c) const;
  std::string to_string() const;
  friend bool operator==(const Pattern&, const Pattern&) = default;
  friend auto operator<=>(const Pattern&, const Pattern&) = default;
};

/// Structural validity plus "exponents not all 0", reduced mod m for a
/// finite index. An absent index is treated as infinite.
bool pattern_validate(const Pattern& p, const std::optional<IndexBound>& idx);

/// A sequence z(0), z(1), ... evaluated on demand.
///
/// Implementations are immutable; `at` may be called concurrently and must
/// return identical values for identical arguments.
class SequenceSource {
 public:
  virtual ~SequenceSource() = default;

  virtual UnitValue at(std::uint64_t n) const = 0;
  /// nullopt means unbounded.
  virtual std::optional<std::uint64_t> length() const { return std::nullopt; }
  virtual std::optional<IndexBound> declared_index() const { return std::nullopt; }
  virtual std::string describe() const = 0;
  /// Largest absolute phase error (in turns) of any emitted value.
  virtual double phase_error_bound() const { return 0.0; }
  /// The same construction driven by a different seed. Deterministic sources
  /// throw InvalidArgument.
  virtual std::shared_ptr<const SequenceSource> reseeded(std::uint64_t seed) const;

  /// Evaluation at 0 (the first-coordinate projection).
  UnitValue first() const { return at(0); }
};

using SourcePtr = std::shared_ptr<const SequenceSource>;

/// Throws SourceTooShort unless the source holds at least `needed` terms.
void require_length(const SequenceSource& src, std::uint64_t needed);

/// z(start), ..., z(start + count - 1), evaluated in parallel.
std::vector<UnitValue> materialize(const SequenceSource& src, std::uint64_t start,
                                   std::uint64_t count);

/// n -> z(n + k).
SourcePtr shift_source(SourcePtr src, std::uint64_t k);

class VectorSource final : public SequenceSource {
 public:
  explicit VectorSource(std::vector<UnitValue> values,
                        std::optional<IndexBound> index = std::nullopt,
                        std::string label = "vector");
  UnitValue at(std::uint64_t n) const override;
  std::optional<std::uint64_t> length() const override { return values_.size(); }
  std::optional<IndexBound> declared_index() const override { return index_; }
  std::string describe() const override { return label_; }
  const std::vector<UnitValue>& values() const { return values_; }

 private:
  std::vector<UnitValue> values_;
  std::optional<IndexBound> index_;
  std::string label_;
};

/// Unbounded deterministic source backed by a pure function of n.
class FunctionSource final : public SequenceSource {
 public:
  FunctionSource(std::function<UnitValue(std::uint64_t)> fn, std::string label,
                 std::optional<IndexBound> index = std::nullopt);
  UnitValue at(std::uint64_t n) const override { return fn_(n); }
  std::optional<IndexBound> declared_index() const override { return index_; }
  std::string describe() const override { return label_; }

 private:
  std::function<UnitValue(std::uint64_t)> fn_;
  std::string label_;
  std::optional<IndexBound> index_;
};

}  // namespace chowla
