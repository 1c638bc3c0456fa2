#include "chowla/core.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cctype>
#include <numbers>
#include <numeric>
#include <sstream>

#include "chowla/turns.hpp"

namespace chowla {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PrecisionExhausted: return "PrecisionExhausted";
    case ErrorCode::GVanishes: return "GVanishes";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::BadSupport: return "BadSupport";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SourceTooShort: return "SourceTooShort";
    case ErrorCode::PatternExplosion: return "PatternExplosion";
    case ErrorCode::PointOutOfRange: return "PointOutOfRange";
    case ErrorCode::LetterNotInUm: return "LetterNotInUm";
    case ErrorCode::CylinderExplosion: return "CylinderExplosion";
    case ErrorCode::RejectionDensityExceeded: return "RejectionDensityExceeded";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ScheduleTooShort: return "ScheduleTooShort";
    case ErrorCode::NodeCapExceeded: return "NodeCapExceeded";
    case ErrorCode::WordCapExceeded: return "WordCapExceeded";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

// ---------------------------------------------------------------------------
// UnitValue

UnitValue UnitValue::zero() {
  UnitValue z;
  z.zero_ = true;
  z.num_ = 0;
  z.den_ = 1;
  return z;
}

UnitValue UnitValue::from_turns(std::uint64_t turns) {
  UnitValue v;
  v.den_ = 0;
  v.num_ = turns;
  return v;
}

UnitValue UnitValue::root_of_unity(std::int64_t k, std::uint32_t m) {
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "root_of_unity: m must be positive");
  UnitValue v;
  const std::int64_t r = ((k % static_cast<std::int64_t>(m)) + m) % static_cast<std::int64_t>(m);
  v.num_ = static_cast<std::uint64_t>(r);
  v.den_ = m;
  return v;
}

UnitValue UnitValue::from_phase(double phase) {
  return from_turns(top64(real_to_turns128(phase)) +
                    static_cast<std::uint64_t>((real_to_turns128(phase) >> 63) & 1));
}

std::uint64_t UnitValue::turns() const noexcept {
  if (zero_) return 0;
  if (den_ == 0) return num_;
  const auto scaled = (static_cast<unsigned __int128>(num_) << 64) + den_ / 2;
  return static_cast<std::uint64_t>(scaled / den_);
}

double UnitValue::phase() const noexcept {
  if (zero_) return 0.0;
  if (den_ != 0) return static_cast<double>(num_) / static_cast<double>(den_);
  return turns_to_phase(num_);
}

std::complex<double> UnitValue::value() const noexcept {
  if (zero_) return {0.0, 0.0};
  if (den_ != 0 && 4 % den_ == 0) {
    switch (num_ * (4 / den_)) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
  // Phases above one half are folded so that x and conj(x) map to exact
  // conjugates.
  double half;
  bool upper;
  if (den_ != 0) {
    upper = 2 * num_ > den_;
    half = static_cast<double>(upper ? den_ - num_ : num_) / static_cast<double>(den_);
  } else {
    upper = num_ > (1ull << 63);
    half = std::ldexp(static_cast<double>(upper ? 0 - num_ : num_), -64);
  }
  const double angle = 2.0 * std::numbers::pi * half;
  const double c = std::cos(angle), s = std::sin(angle);
  return {c, upper ? -s : s};
}

UnitValue UnitValue::pow(std::int64_t n) const noexcept {
  if (zero_) return zero();
  UnitValue v;
  if (den_ == 0) {
    v.den_ = 0;
    v.num_ = num_ * static_cast<std::uint64_t>(n);
    return v;
  }
  const auto d = static_cast<__int128>(den_);
  __int128 r = (static_cast<__int128>(num_) * n) % d;
  if (r < 0) r += d;
  v.num_ = static_cast<std::uint64_t>(r);
  v.den_ = den_;
  return v;
}

UnitValue operator*(const UnitValue& x, const UnitValue& y) noexcept {
  if (x.zero_ || y.zero_) return UnitValue::zero();
  if (x.den_ != 0 && y.den_ != 0) {
    if (x.den_ == y.den_) {
      UnitValue v;
      v.den_ = x.den_;
      v.num_ = (x.num_ + y.num_) % x.den_;
      return v;
    }
    const std::uint64_t g = std::gcd<std::uint64_t, std::uint64_t>(x.den_, y.den_);
    const std::uint64_t l = x.den_ / g * y.den_;
    if (l <= 0xFFFFFFFFull) {
      UnitValue v;
      v.den_ = static_cast<std::uint32_t>(l);
      v.num_ = (x.num_ * (l / x.den_) + y.num_ * (l / y.den_)) % l;
      return v;
    }
  }
  return UnitValue::from_turns(x.turns() + y.turns());
}

bool UnitValue::approx_equal(const UnitValue& other, double eps) const noexcept {
  if (zero_ || other.zero_) return zero_ == other.zero_;
  if (den_ != 0 && other.den_ != 0) {
    if (static_cast<unsigned __int128>(num_) * other.den_ ==
        static_cast<unsigned __int128>(other.num_) * den_)
      return true;
  }
  return circular_distance(turns(), other.turns()) <= eps;
}

std::optional<std::uint32_t> UnitValue::snap_to_root(std::uint32_t m, double tol) const noexcept {
  if (zero_ || m == 0) return std::nullopt;
  if (den_ != 0) {
    const auto scaled = static_cast<unsigned __int128>(num_) * m;
    if (scaled % den_ == 0) return static_cast<std::uint32_t>(scaled / den_);
  }
  // phase * m = k + f with f in [0,1) measured in 2^-64 units.
  const auto wide = static_cast<unsigned __int128>(turns()) * m;
  auto k = static_cast<std::uint64_t>(wide >> 64);
  const auto frac = static_cast<std::uint64_t>(wide);
  const double up = std::ldexp(static_cast<double>(frac), -64);
  const double dist_turns = std::min(up, 1.0 - up) / m;
  if (dist_turns > tol) return std::nullopt;
  if (up > 0.5) k += 1;
  return static_cast<std::uint32_t>(k % m);
}

std::string to_string(const UnitValue& x) {
  if (x.is_zero()) return "0";
  if (x.is_rational()) {
    if (x.numerator() == 0) return "e(0)";
    return "e(" + std::to_string(x.numerator()) + "/" + std::to_string(x.denominator()) + ")";
  }
  return "e(" + turns_to_decimal(x.turns()) + ")";
}

std::optional<UnitValue> snap_rational(std::uint64_t turns, std::uint32_t max_den, double tol) {
  if (turns == 0) return UnitValue::root_of_unity(0, 1);
  // Continued-fraction convergents of turns / 2^64.
  using U = unsigned __int128;
  U num = turns, den = static_cast<U>(1) << 64;
  U p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  std::optional<UnitValue> best;
  while (num != 0) {
    const U a = den / num;
    const U rem = den - a * num;
    den = num;
    num = rem;
    const U p2 = a * p1 + p0, q2 = a * q1 + q0;
    if (p2 > max_den) break;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    // Convergents of 2^64 / turns are q/p for turns / 2^64.
    const auto m = static_cast<std::uint32_t>(p1);
    const auto k = static_cast<std::uint64_t>(q1);
    const auto approx = static_cast<std::uint64_t>(((static_cast<U>(k) << 64) + m / 2) / m);
    if (circular_distance(approx, turns) <= tol) {
      best = UnitValue::root_of_unity(static_cast<std::int64_t>(k % m), m);
      break;
    }
  }
  if (!best && circular_distance(0, turns) <= tol) best = UnitValue::root_of_unity(0, 1);
  return best;
}

// ---------------------------------------------------------------------------
// Turn decimals

std::string turns_to_decimal(std::uint64_t t, int digits) {
  std::string out = "0.";
  std::uint64_t frac = t;
  for (int i = 0; i < digits; ++i) {
    const auto wide = static_cast<unsigned __int128>(frac) * 10u;
    out.push_back(static_cast<char>('0' + static_cast<int>(wide >> 64)));
    frac = static_cast<std::uint64_t>(wide);
  }
  return out;
}

bool decimal_to_turns(const std::string& text, std::uint64_t& out) {
  std::string s = text;
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  if (s.empty()) return false;
  std::string int_part;
  std::string frac_part;
  const auto dot = s.find('.');
  int_part = s.substr(0, dot);
  if (dot != std::string::npos) frac_part = s.substr(dot + 1);
  if (int_part.empty()) int_part = "0";
  if (int_part.front() == '+') int_part.erase(0, 1);
  if (int_part.empty() && frac_part.empty()) return false;
  const auto all_digits = [](const std::string& v) {
    return std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); });
  };
  if (int_part.empty()) int_part = "0";
  if (!all_digits(int_part) || !all_digits(frac_part)) return false;
  if (std::any_of(int_part.begin(), int_part.end(), [](char c) { return c != '0'; })) return false;
  if (frac_part.empty()) {
    out = 0;
    return true;
  }
  mpz_class numer(frac_part, 10);
  mpz_class denom;
  mpz_ui_pow_ui(denom.get_mpz_t(), 10, frac_part.size());
  // round(numer * 2^64 / denom)
  mpz_class scaled = numer << 64;
  scaled += denom / 2;
  scaled /= denom;
  const mpz_class wrap = mpz_class(1) << 64;
  if (scaled >= wrap) scaled -= wrap;  // rounding up to 1.0 maps to phase 0
  out = 0;
  for (int limb = 1; limb >= 0; --limb) {
    const mpz_class part = (scaled >> (32 * limb)) & mpz_class(0xFFFFFFFFul);
    out = (out << 32) | part.get_ui();
  }
  return true;
}

// ---------------------------------------------------------------------------
// IndexBound / Pattern

IndexBound IndexBound::finite(std::int64_t m) {
  if (m < 2) throw Error(ErrorCode::InvalidArgument, "finite index requires m >= 2");
  return IndexBound(Kind::Finite, m);
}

IndexBound IndexBound::exceeds_tested(std::int64_t m_max) {
  return IndexBound(Kind::ExceedsTested, m_max);
}

std::string IndexBound::to_string() const {
  switch (kind_) {
    case Kind::Finite: return "Finite(" + std::to_string(m_) + ")";
    case Kind::ExceedsTested: return "ExceedsTested(" + std::to_string(m_) + ")";
    case Kind::Infinite: return "Infinite";
  }
  return "?";
}

Pattern Pattern::negated() const {
  Pattern p = *this;
  for (auto& e : p.exponents) e = -e;
  return p;
}

Pattern Pattern::shifted(std::int64_t c) const {
  Pattern p = *this;
  for (auto& a : p.shifts) a += c;
  return p;
}

std::string Pattern::to_string() const {
  std::ostringstream os;
  const auto list = [&os](const std::vector<std::int64_t>& v) {
    os << '(';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ')';
  };
  os << '(';
  list(shifts);
  os << ',';
  list(exponents);
  os << ')';
  return os.str();
}

bool pattern_validate(const Pattern& p, const std::optional<IndexBound>& idx) {
  if (p.shifts.empty() || p.shifts.size() != p.exponents.size()) return false;
  if (p.shifts.front() < 0) return false;
  for (std::size_t i = 1; i < p.shifts.size(); ++i)
    if (p.shifts[i] <= p.shifts[i - 1]) return false;
  const bool finite = idx && idx->is_finite();
  const std::int64_t m = finite ? idx->m() : 0;
  return std::any_of(p.exponents.begin(), p.exponents.end(), [&](std::int64_t e) {
    return finite ? (e % m) != 0 : e != 0;
  });
}

// ---------------------------------------------------------------------------
// Sources

std::shared_ptr<const SequenceSource> SequenceSource::reseeded(std::uint64_t) const {
  throw Error(ErrorCode::InvalidArgument, describe() + " is not a random source");
}

void require_length(const SequenceSource& src, std::uint64_t needed) {
  const auto len = src.length();
  if (len && *len < needed)
    throw Error(ErrorCode::SourceTooShort, src.describe() + " holds " + std::to_string(*len) +
                                               " terms, " + std::to_string(needed) + " needed");
}

std::vector<UnitValue> materialize(const SequenceSource& src, std::uint64_t start,
                                   std::uint64_t count) {
  require_length(src, start + count);
  std::vector<UnitValue> out(count);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i)
    out[i] = src.at(start + static_cast<std::uint64_t>(i));
  return out;
}

namespace {

class ShiftedSource final : public SequenceSource {
 public:
  ShiftedSource(SourcePtr inner, std::uint64_t k) : inner_(std::move(inner)), k_(k) {}
  UnitValue at(std::uint64_t n) const override { return inner_->at(n + k_); }
  std::optional<std::uint64_t> length() const override {
    const auto len = inner_->length();
    if (!len) return std::nullopt;
    return *len > k_ ? *len - k_ : 0;
  }
  std::optional<IndexBound> declared_index() const override { return inner_->declared_index(); }
  std::string describe() const override {
    return "shift(" + inner_->describe() + "," + std::to_string(k_) + ")";
  }
  double phase_error_bound() const override { return inner_->phase_error_bound(); }

 private:
  SourcePtr inner_;
  std::uint64_t k_;
};

}  // namespace

SourcePtr shift_source(SourcePtr src, std::uint64_t k) {
  return std::make_shared<ShiftedSource>(std::move(src), k);
}

VectorSource::VectorSource(std::vector<UnitValue> values, std::optional<IndexBound> index,
                           std::string label)
    : values_(std::move(values)), index_(index), label_(std::move(label)) {}

UnitValue VectorSource::at(std::uint64_t n) const {
  if (n >= values_.size())
    throw Error(ErrorCode::OutOfRange, label_ + ": index " + std::to_string(n) + " >= length " +
                                           std::to_string(values_.size()));
  return values_[n];
}

FunctionSource::FunctionSource(std::function<UnitValue(std::uint64_t)> fn, std::string label,
                               std::optional<IndexBound> index)
    : fn_(std::move(fn)), label_(std::move(label)), index_(index) {}

}  // namespace chowla
