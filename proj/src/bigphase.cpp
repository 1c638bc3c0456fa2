#include "chowla/bigphase.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "chowla/parallel.hpp"
#include "chowla/rng.hpp"
#include "chowla/turns.hpp"

namespace chowla::bigphase {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, what);
}

mpz_class pow2(std::int64_t k) {
  mpz_class r = 1;
  mpz_mul_2exp(r.get_mpz_t(), r.get_mpz_t(), static_cast<mp_bitcnt_t>(k));
  return r;
}

mpz_class floor_mul_pow2(const mpq_class& q, std::int64_t bits, bool* inexact) {
  mpz_class num = q.get_num();
  mpz_mul_2exp(num.get_mpz_t(), num.get_mpz_t(), static_cast<mp_bitcnt_t>(bits));
  mpz_class out, rem;
  mpz_fdiv_qr(out.get_mpz_t(), rem.get_mpz_t(), num.get_mpz_t(), q.get_den().get_mpz_t());
  if (inexact) *inexact = rem != 0;
  return out;
}

// x * 2^exp as a double, rounded toward zero by GMP; `up` nudges outward.
double mpz_scaled(const mpz_class& x, std::int64_t neg_exp, int direction) {
  if (x == 0) return 0.0;
  long e = 0;
  const double d = mpz_get_d_2exp(&e, x.get_mpz_t());
  double v = std::ldexp(d, static_cast<int>(e - neg_exp));
  if (direction > 0) v = std::nextafter(std::nextafter(v, HUGE_VAL), HUGE_VAL);
  if (direction < 0) v = std::nextafter(std::nextafter(v, -HUGE_VAL), -HUGE_VAL);
  return v;
}

// An upper bound carried as log2, so that errors far below 2^-1074 stay visible.
struct Log2Bound {
  double l = kNegInf;

  void add_log2(double other) {
    if (other == kNegInf) return;
    if (l == kNegInf) {
      l = other;
      return;
    }
    const double hi = std::max(l, other);
    const double lo = std::min(l, other);
    l = hi + std::log2(1.0 + std::exp2(lo - hi)) + 1e-12;
  }
  void scale_log2(double factor) {
    if (l != kNegInf) l += factor + 1e-12;
  }
  double value() const {
    if (l == kNegInf) return 0.0;
    if (l < -1000) return std::numeric_limits<double>::denorm_min();
    return std::exp2(l) * (1.0 + 0x1p-40);
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// HighPrecisionReal

HighPrecisionReal::HighPrecisionReal(mpz_class mantissa, std::int64_t frac_bits,
                                     std::uint64_t err_ulps)
    : mantissa_(std::move(mantissa)), frac_bits_(frac_bits), err_ulps_(err_ulps) {
  if (frac_bits_ < 0) {
    mpz_mul_2exp(mantissa_.get_mpz_t(), mantissa_.get_mpz_t(),
                 static_cast<mp_bitcnt_t>(-frac_bits_));
    frac_bits_ = 0;
  }
  if (err_ulps_ == 0) {
    while (frac_bits_ > 0 && mantissa_ != 0 && mpz_even_p(mantissa_.get_mpz_t())) {
      mpz_fdiv_q_2exp(mantissa_.get_mpz_t(), mantissa_.get_mpz_t(), 1);
      --frac_bits_;
    }
    if (mantissa_ == 0) frac_bits_ = 0;
  }
}

HighPrecisionReal HighPrecisionReal::dyadic(mpz_class mantissa, std::int64_t frac_bits) {
  return {std::move(mantissa), frac_bits, 0};
}

HighPrecisionReal HighPrecisionReal::from_double(double x) {
  if (!std::isfinite(x)) invalid("beta must be finite");
  if (x == 0.0) return {0, 0, 0};
  int e = 0;
  const double m = std::frexp(x, &e);
  const auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
  return {mpz_class(static_cast<long>(mant)), 53 - e, 0};
}

HighPrecisionReal HighPrecisionReal::rational(const mpq_class& q, std::int64_t frac_bits) {
  if (frac_bits < 0) invalid("frac_bits must be non-negative");
  const mpz_class& den = q.get_den();
  if (mpz_popcount(den.get_mpz_t()) == 1) {
    const auto k = static_cast<std::int64_t>(mpz_sizeinbase(den.get_mpz_t(), 2)) - 1;
    return {q.get_num(), k, 0};
  }
  bool inexact = false;
  mpz_class m = floor_mul_pow2(q, frac_bits, &inexact);
  return {std::move(m), frac_bits, inexact ? 1u : 0u};
}

HighPrecisionReal HighPrecisionReal::quadratic(long a, long b, unsigned long c, long d,
                                               std::int64_t frac_bits) {
  if (d == 0) invalid("quadratic: zero denominator");
  if (frac_bits < 0) invalid("frac_bits must be non-negative");
  const std::int64_t g = frac_bits + 8;
  mpz_class s = c;
  mpz_mul_2exp(s.get_mpz_t(), s.get_mpz_t(), static_cast<mp_bitcnt_t>(2 * g));
  mpz_sqrt(s.get_mpz_t(), s.get_mpz_t());
  const bool root_exact = [&] {
    mpz_class sq = s * s;
    mpz_class target = c;
    mpz_mul_2exp(target.get_mpz_t(), target.get_mpz_t(), static_cast<mp_bitcnt_t>(2 * g));
    return sq == target;
  }();
  mpz_class num = mpz_class(a) * pow2(g) + mpz_class(b) * s;
  mpq_class q(num, mpz_class(d) * pow2(g));
  q.canonicalize();
  if (root_exact) return rational(q, frac_bits);
  // sqrt error below |b| units of 2^-g, then one unit for the final truncation.
  mpz_class m = floor_mul_pow2(q, frac_bits, nullptr);
  const std::uint64_t err = 2 + static_cast<std::uint64_t>(std::labs(b)) / 256;
  return {std::move(m), frac_bits, err};
}

HighPrecisionReal HighPrecisionReal::golden_ratio(std::int64_t frac_bits) {
  return quadratic(1, 1, 5, 2, frac_bits);
}

HighPrecisionReal HighPrecisionReal::parse(const std::string& text, std::int64_t frac_bits) {
  if (text == "golden" || text == "phi") return golden_ratio(frac_bits);
  if (text.rfind("sqrt(", 0) == 0 && text.size() > 6 && text.back() == ')') {
    const std::string inner = text.substr(5, text.size() - 6);
    std::size_t used = 0;
    unsigned long c = 0;
    try {
      c = std::stoul(inner, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != inner.size() || inner.empty()) invalid("bad beta: " + text);
    return quadratic(0, 1, c, 1, frac_bits);
  }
  mpq_class q;
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      q = mpq_class(text);
      q.canonicalize();
    } else {
      const auto dot = text.find('.');
      if (dot == std::string::npos) {
        q = mpq_class(mpz_class(text));
      } else {
        std::string digits = text.substr(0, dot) + text.substr(dot + 1);
        if (digits.empty() || digits == "-") invalid("bad beta: " + text);
        mpz_class den = 1;
        for (std::size_t i = dot + 1; i < text.size(); ++i) den *= 10;
        q = mpq_class(mpz_class(digits), den);
        q.canonicalize();
      }
    }
  } catch (const std::invalid_argument&) {
    invalid("bad beta: " + text);
  }
  return rational(q, frac_bits);
}

double HighPrecisionReal::to_double() const { return mpz_scaled(mantissa_, frac_bits_, 0); }

double HighPrecisionReal::upper_bound() const {
  return mpz_scaled(mantissa_ + static_cast<unsigned long>(err_ulps_), frac_bits_, 1);
}

double HighPrecisionReal::lower_bound() const {
  return mpz_scaled(mantissa_ - static_cast<unsigned long>(err_ulps_), frac_bits_, -1);
}

mpq_class HighPrecisionReal::to_rational() const {
  mpq_class q(mantissa_, pow2(frac_bits_));
  q.canonicalize();
  return q;
}

std::string HighPrecisionReal::to_string(int digits) const {
  mpz_class ip, fp;
  mpz_fdiv_q_2exp(ip.get_mpz_t(), mantissa_.get_mpz_t(), static_cast<mp_bitcnt_t>(frac_bits_));
  mpz_fdiv_r_2exp(fp.get_mpz_t(), mantissa_.get_mpz_t(), static_cast<mp_bitcnt_t>(frac_bits_));
  std::string out = ip.get_str();
  if (digits <= 0) return out;
  mpz_class scaled;
  mpz_ui_pow_ui(scaled.get_mpz_t(), 10, static_cast<unsigned long>(digits));
  scaled *= fp;
  mpz_fdiv_q_2exp(scaled.get_mpz_t(), scaled.get_mpz_t(), static_cast<mp_bitcnt_t>(frac_bits_));
  std::string f = scaled.get_str();
  out += '.';
  out += std::string(static_cast<std::size_t>(digits) - f.size(), '0');
  out += f;
  return out;
}

HighPrecisionReal random_dyadic(double lo, double hi, std::int64_t frac_bits,
                                std::uint64_t seed) {
  if (!(lo < hi)) invalid("random_dyadic: empty interval");
  if (frac_bits < 1 || frac_bits > (1 << 24)) invalid("random_dyadic: bad frac_bits");
  // Mantissas strictly inside (lo, hi).
  mpz_class lo_m = floor_mul_pow2(mpq_class(lo), frac_bits, nullptr) + 1;
  bool hi_inexact = false;
  mpz_class hi_m = floor_mul_pow2(mpq_class(hi), frac_bits, &hi_inexact);
  if (!hi_inexact) hi_m -= 1;
  if (hi_m < lo_m) invalid("random_dyadic: interval too narrow for frac_bits");
  const mpz_class range = hi_m - lo_m + 1;
  const std::size_t words = mpz_sizeinbase(range.get_mpz_t(), 2) / 64 + 2;
  std::vector<std::uint64_t> buf(words);
  const CounterRng rng(derive_seed(seed, "bigphase.beta"));
  for (std::size_t i = 0; i < words; ++i) buf[i] = rng.bits(i);
  mpz_class r;
  mpz_import(r.get_mpz_t(), words, -1, sizeof(std::uint64_t), 0, 0, buf.data());
  r %= range;
  return HighPrecisionReal::dyadic(lo_m + r, frac_bits);
}

// ---------------------------------------------------------------------------
// GFunc

GFunc GFunc::one() { return GFunc{}; }

GFunc GFunc::polynomial(std::vector<double> coeffs) {
  if (coeffs.empty()) invalid("polynomial needs at least one coefficient");
  for (double c : coeffs)
    if (!std::isfinite(c)) invalid("polynomial coefficient not finite");
  GFunc g;
  g.kind_ = Kind::Polynomial;
  g.coeffs_ = std::move(coeffs);
  return g;
}

GFunc GFunc::power_product(double alpha, int k) {
  if (!std::isfinite(alpha) || alpha == 0.0) invalid("power_product: alpha must be finite, non-zero");
  GFunc g;
  g.kind_ = Kind::PowerProduct;
  g.alpha_ = alpha;
  g.power_ = k;
  return g;
}

GFunc GFunc::user_table(std::vector<TableRow> rows) {
  if (rows.size() < 2) invalid("user_table needs at least two rows");
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (!(rows[i].x > rows[i - 1].x)) invalid("user_table rows must be strictly increasing in x");
  GFunc g;
  g.kind_ = Kind::UserTable;
  g.table_ = std::move(rows);
  return g;
}

GFunc GFunc::parse(const std::string& text) {
  if (text == "one" || text == "1") return one();
  auto numbers = [&](const std::string& body) {
    std::vector<double> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        invalid("bad g specification: " + text);
      }
    }
    return out;
  };
  if (text.rfind("poly:", 0) == 0) return polynomial(numbers(text.substr(5)));
  if (text.rfind("power:", 0) == 0) {
    const auto v = numbers(text.substr(6));
    if (v.size() != 2 || v[1] != std::floor(v[1])) invalid("power:alpha,k expects an integer k");
    return power_product(v[0], static_cast<int>(v[1]));
  }
  invalid("unknown g specification: " + text);
}

GValue GFunc::eval(double x) const {
  GValue v;
  switch (kind_) {
    case Kind::One:
      v.g = 1.0;
      break;
    case Kind::Polynomial: {
      double mag = 0;
      for (std::size_t i = coeffs_.size(); i-- > 0;) {
        v.g2 = v.g2 * x + 2.0 * v.g1;
        v.g1 = v.g1 * x + v.g;
        v.g = v.g * x + coeffs_[i];
        mag = mag * std::fabs(x) + std::fabs(coeffs_[i]);
      }
      v.err = 4.0 * static_cast<double>(coeffs_.size()) * 0x1p-53 * mag;
      break;
    }
    case Kind::PowerProduct: {
      const double k = power_;
      v.g = alpha_ * std::pow(x, k);
      v.g1 = alpha_ * k * std::pow(x, k - 1);
      v.g2 = alpha_ * k * (k - 1) * std::pow(x, k - 2);
      v.err = 4.0 * 0x1p-53 * std::fabs(v.g);
      break;
    }
    case Kind::UserTable: {
      if (x < table_.front().x || x > table_.back().x)
        throw Error(ErrorCode::OutOfRange, "user_table: x outside sampled range");
      auto it = std::upper_bound(table_.begin(), table_.end(), x,
                                 [](double a, const TableRow& r) { return a < r.x; });
      if (it == table_.end()) --it;
      const TableRow& r1 = *it;
      const TableRow& r0 = *(it - 1);
      const double h = r1.x - r0.x;
      const double t = (x - r0.x) / h;
      v.g = r0.g + t * (r1.g - r0.g);
      v.g1 = r0.g1 + t * (r1.g1 - r0.g1);
      v.g2 = r0.g2 + t * (r1.g2 - r0.g2);
      v.err = h * h / 8.0 * std::max(std::fabs(r0.g2), std::fabs(r1.g2)) +
              4.0 * 0x1p-53 * std::max(std::fabs(r0.g), std::fabs(r1.g));
      break;
    }
  }
  return v;
}

FixedValue GFunc::eval_fixed(const HighPrecisionReal& beta, std::int64_t bits) const {
  FixedValue out;
  if (kind_ == Kind::One) {
    out.value = pow2(bits);
    return out;
  }
  Log2Bound err;
  const double log2_delta =
      beta.exact() ? kNegInf
                   : std::log2(static_cast<double>(beta.err_ulps())) - static_cast<double>(beta.frac_bits());
  if (kind_ == Kind::UserTable) {
    const double x = beta.to_double();
    const GValue v = eval(x);
    bool inexact = false;
    out.value = floor_mul_pow2(mpq_class(v.g), bits, &inexact);
    if (inexact) err.add_log2(-static_cast<double>(bits));
    if (v.err > 0) err.add_log2(std::log2(v.err));
    // beta vs its double image, plus beta's own uncertainty.
    const double dx = std::fabs(x) * 0x1p-52 + (beta.exact() ? 0.0 : std::exp2(log2_delta));
    const double slope = std::max(std::fabs(v.g1), 1e-300);
    err.add_log2(std::log2(slope * dx * 2.0));
    out.log2_err = err.l;
    return out;
  }
  const mpq_class b = beta.to_rational();
  mpq_class q;
  double deriv = 0;  // bound on |g'| over beta's uncertainty interval
  if (kind_ == Kind::Polynomial) {
    for (std::size_t i = coeffs_.size(); i-- > 0;) q = q * b + mpq_class(coeffs_[i]);
    const double bh = std::max(std::fabs(beta.upper_bound()), std::fabs(beta.lower_bound()));
    for (std::size_t k = 1; k < coeffs_.size(); ++k)
      deriv += std::fabs(coeffs_[k]) * static_cast<double>(k) * std::pow(bh, static_cast<double>(k - 1));
  } else {
    mpq_class p = 1;
    const int ak = std::abs(power_);
    for (int i = 0; i < ak; ++i) p *= b;
    q = power_ >= 0 ? mpq_class(mpq_class(alpha_) * p) : mpq_class(mpq_class(alpha_) / p);
    q.canonicalize();
    const double worst = power_ - 1 >= 0 ? beta.upper_bound() : beta.lower_bound();
    deriv = std::fabs(alpha_ * power_) * std::pow(worst, power_ - 1.0);
  }
  bool inexact = false;
  out.value = floor_mul_pow2(q, bits, &inexact);
  if (inexact) err.add_log2(-static_cast<double>(bits));
  if (!beta.exact() && deriv > 0) err.add_log2(std::log2(deriv * 1.0000001) + log2_delta);
  out.log2_err = err.l;
  return out;
}

std::string GFunc::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::One:
      return "one";
    case Kind::Polynomial:
      os << "poly:";
      for (std::size_t i = 0; i < coeffs_.size(); ++i) os << (i ? "," : "") << coeffs_[i];
      return os.str();
    case Kind::PowerProduct:
      os << "power:" << alpha_ << "," << power_;
      return os.str();
    case Kind::UserTable:
      os << "table:" << table_.size() << " rows on [" << table_.front().x << ","
         << table_.back().x << "]";
      return os.str();
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Budgets

namespace {

std::int64_t growth_bits(double beta_upper, std::int64_t n_max) {
  return static_cast<std::int64_t>(std::ceil(static_cast<double>(n_max) * std::log2(beta_upper)));
}

}  // namespace

std::int64_t required_precision(double beta_upper, std::int64_t n_max, int guard_bits) {
  if (!(beta_upper > 1.0) || !std::isfinite(beta_upper)) invalid("beta_upper must exceed 1");
  if (n_max < 1) invalid("n_max must be at least 1");
  if (guard_bits < 16) invalid("guard_bits must be at least 16");
  return growth_bits(beta_upper, n_max) + guard_bits;
}

PrecisionBudget PrecisionBudget::for_stream(double beta_upper, std::int64_t n_max,
                                            int guard_bits) {
  if (!(beta_upper > 1.0) || !std::isfinite(beta_upper)) invalid("beta_upper must exceed 1");
  if (n_max < 1) invalid("n_max must be at least 1");
  if (guard_bits < 1) invalid("guard_bits must be positive");
  const auto slack =
      static_cast<std::int64_t>(std::ceil(std::log2(beta_upper / (beta_upper - 1.0)))) + 1;
  PrecisionBudget b;
  b.total_bits = growth_bits(beta_upper, n_max) + guard_bits + std::max<std::int64_t>(slack, 1);
  b.guard_bits = guard_bits;
  b.n_max = n_max;
  b.beta_upper = beta_upper;
  return b;
}

void PrecisionBudget::validate() const {
  if (!(beta_upper > 1.0) || !std::isfinite(beta_upper)) invalid("budget: beta_upper must exceed 1");
  if (n_max < 1) invalid("budget: n_max must be at least 1");
  if (guard_bits < 1) invalid("budget: guard_bits must be positive");
  if (total_bits < growth_bits(beta_upper, n_max) + guard_bits)
    invalid("budget: total_bits below n_max*log2(beta_upper) + guard_bits");
}

double emission_cap(int guard_bits) { return std::ldexp(1.0, -std::max(guard_bits, 16) + 2); }

PrecisionExhausted::PrecisionExhausted(std::int64_t n, double bound, double cap)
    : Error(ErrorCode::PrecisionExhausted,
            "precision exhausted at n=" + std::to_string(n) + " (bound " + std::to_string(bound) +
                " > cap " + std::to_string(cap) + "); raise the budget"),
      n_(n) {}

// ---------------------------------------------------------------------------
// Streams

PhaseStream::PhaseStream(HighPrecisionReal beta, GFunc g, PrecisionBudget budget,
                         std::vector<PhaseTerm> terms)
    : beta_(std::move(beta)), g_(std::move(g)), budget_(budget), terms_(std::move(terms)) {}

double PhaseStream::frac(std::size_t n) const { return turns_to_phase(terms_.at(n).frac); }

namespace {

// Bits [w-64, w) of y mod 2^w, and whether any bit below w-64 is set.
std::uint64_t top_frac_bits(const mpz_class& y, std::int64_t w, mpz_class& scratch,
                            bool* low_nonzero) {
  mpz_srcptr p = y.get_mpz_t();
  if (mpz_sgn(p) < 0) {
    mpz_fdiv_r_2exp(scratch.get_mpz_t(), p, static_cast<mp_bitcnt_t>(w));
    p = scratch.get_mpz_t();
  }
  if (w < 64) {
    mpz_class r;
    mpz_fdiv_r_2exp(r.get_mpz_t(), p, static_cast<mp_bitcnt_t>(w));
    *low_nonzero = false;
    const std::uint64_t v = mpz_getlimbn(r.get_mpz_t(), 0);
    return v << (64 - w);
  }
  const std::int64_t pos = w - 64;
  static_assert(sizeof(mp_limb_t) == 8);
  const auto li = static_cast<mp_size_t>(pos / 64);
  const int off = static_cast<int>(pos % 64);
  const std::uint64_t lo = mpz_getlimbn(p, li);
  const std::uint64_t hi = mpz_getlimbn(p, li + 1);
  const std::uint64_t top = off == 0 ? lo : (lo >> off) | (hi << (64 - off));
  *low_nonzero = mpz_sgn(p) != 0 && static_cast<std::int64_t>(mpz_scan1(p, 0)) < pos;
  return top;
}

}  // namespace

PhaseStream phase_stream(const HighPrecisionReal& beta, const GFunc& g,
                         const PrecisionBudget& budget) {
  budget.validate();
  if (!(beta.lower_bound() > 1.0)) invalid("phase_stream: beta must exceed 1");
  if (beta.upper_bound() > budget.beta_upper * (1.0 + 0x1p-40))
    invalid("phase_stream: beta exceeds budget.beta_upper");

  const std::int64_t w = budget.total_bits;
  const std::int64_t fb = beta.frac_bits();
  const double log2_beta = std::log2(beta.upper_bound());
  const double log2_delta =
      beta.exact() ? kNegInf
                   : std::log2(static_cast<double>(beta.err_ulps())) - static_cast<double>(fb);
  const double cap = emission_cap(budget.guard_bits);

  FixedValue y0 = g.eval_fixed(beta, w);
  mpz_class y = std::move(y0.value);
  Log2Bound err{y0.log2_err};

  std::vector<PhaseTerm> terms;
  terms.reserve(static_cast<std::size_t>(budget.n_max));
  mpz_class prod, scratch;
  double prev = 0.0;
  for (std::int64_t n = 0; n < budget.n_max; ++n) {
    bool low = false;
    const std::uint64_t top = top_frac_bits(y, w, scratch, &low);
    Log2Bound total = err;
    if (low) total.add_log2(-64.0);
    const double eb = std::max(prev, total.value());
    if (eb > cap) throw PrecisionExhausted(n, eb, cap);
    terms.push_back({top, eb});
    prev = eb;
    if (n + 1 == budget.n_max) break;

    // Advance: y <- floor(beta~ * y).
    Log2Bound next = err;
    next.scale_log2(log2_beta);
    if (!beta.exact() && y != 0) {
      const double log2_y =
          static_cast<double>(mpz_sizeinbase(y.get_mpz_t(), 2)) - static_cast<double>(w);
      next.add_log2(log2_delta + log2_y);
    }
    mpz_mul(prod.get_mpz_t(), y.get_mpz_t(), beta.mantissa().get_mpz_t());
    mpz_fdiv_q_2exp(y.get_mpz_t(), prod.get_mpz_t(), static_cast<mp_bitcnt_t>(fb));
    if (fb > 0) next.add_log2(-static_cast<double>(w));
    err = next;
  }
  return PhaseStream(beta, g, budget, std::move(terms));
}

PhaseStream phase_stream(const HighPrecisionReal& beta, const GFunc& g, std::int64_t n_max,
                         int guard_bits) {
  return phase_stream(beta, g, PrecisionBudget::for_stream(beta.upper_bound(), n_max, guard_bits));
}

// ---------------------------------------------------------------------------
// Koksma evidence

namespace {

struct PairResult {
  long double min_abs_d1 = std::numeric_limits<long double>::infinity();
  double argmin_x = 0;
  bool monotone = false;
};

}  // namespace

KoksmaReport koksma_check(const GFunc& g, double a, double b, int m_start, int pair_budget,
                          int grid_points) {
  if (!(a > 1.0) || !(b > a)) invalid("koksma_check: need 1 < a < b");
  if (m_start < 1) invalid("koksma_check: m_start must be at least 1");
  if (pair_budget < 1) invalid("koksma_check: pair_budget must be at least 1");
  if (grid_points < 2) invalid("koksma_check: grid_points must be at least 2");

  std::vector<double> xs(static_cast<std::size_t>(grid_points));
  std::vector<GValue> gv(xs.size());
  for (int j = 0; j < grid_points; ++j) {
    xs[j] = j + 1 == grid_points ? b : a + (b - a) * j / (grid_points - 1);
    gv[j] = g.eval(xs[j]);
    if (std::fabs(gv[j].g) < 0x1p-30)
      throw Error(ErrorCode::GVanishes, "g vanishes near x=" + std::to_string(xs[j]));
  }

  const int m_end = m_start + pair_budget;
  struct Pair {
    int m, n;
  };
  std::vector<Pair> pairs;
  for (int m = m_start + 1; m <= m_end; ++m)
    for (int n = m_start; n < m; ++n) pairs.push_back({m, n});

  // f_k', f_k'' at every grid point for k in [m_start, m_end].
  const int span = m_end - m_start + 1;
  std::vector<long double> d1(static_cast<std::size_t>(span) * xs.size());
  std::vector<long double> d2(d1.size());
  for (int k = m_start; k <= m_end; ++k) {
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const long double x = xs[j];
      const long double xk = std::pow(x, static_cast<long double>(k));
      const long double xk1 = xk / x;
      const long double xk2 = xk1 / x;
      const GValue& v = gv[j];
      const std::size_t idx = static_cast<std::size_t>(k - m_start) * xs.size() + j;
      d1[idx] = k * xk1 * v.g + xk * v.g1;
      d2[idx] = static_cast<long double>(k) * (k - 1) * xk2 * v.g + 2.0L * k * xk1 * v.g1 + xk * v.g2;
    }
  }

  std::vector<PairResult> results(pairs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(pairs.size()); ++p) {
    const auto [m, n] = pairs[p];
    const std::size_t rm = static_cast<std::size_t>(m - m_start) * xs.size();
    const std::size_t rn = static_cast<std::size_t>(n - m_start) * xs.size();
    PairResult r;
    int pos = 0, neg = 0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const long double v1 = std::fabs(d1[rm + j] - d1[rn + j]);
      if (v1 < r.min_abs_d1) {
        r.min_abs_d1 = v1;
        r.argmin_x = xs[j];
      }
      const long double v2 = d2[rm + j] - d2[rn + j];
      pos += v2 > 0;
      neg += v2 < 0;
    }
    r.monotone = pos == grid_points || neg == grid_points;
    results[p] = r;
  }

  KoksmaReport rep;
  rep.a = a;
  rep.b = b;
  rep.m_start = m_start;
  rep.m_end = m_end;
  rep.grid_points = grid_points;
  rep.pairs = static_cast<std::int64_t>(pairs.size());
  long double best = std::numeric_limits<long double>::infinity();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (results[p].min_abs_d1 < best) {
      best = results[p].min_abs_d1;
      rep.argmin_m = pairs[p].m;
      rep.argmin_n = pairs[p].n;
      rep.argmin_x = results[p].argmin_x;
    }
    rep.monotone_pairs += results[p].monotone;
  }
  rep.min_abs_d1 = static_cast<double>(best);
  rep.condition2_positive = best > 0;
  rep.all_monotone = rep.monotone_pairs == rep.pairs;

  // Analytic lower bounds, scanned over m = 1..m_end.
  int last_fail = 0;
  for (int m = 1; m <= m_end; ++m) {
    bool ok = true;
    for (std::size_t j = 0; j < xs.size() && ok; ++j) {
      const long double x = xs[j];
      const long double r1 = std::fabs(gv[j].g1 / gv[j].g);
      const long double r2 = std::fabs(gv[j].g2 / gv[j].g);
      const long double l1 = m * (x - 1) / (x * x) - r1;
      const long double l2 =
          static_cast<long double>(m) * (m - 1) * (x - 1) / (x * x * x) - 2.0L * m / x * r1 - r2;
      ok = l1 > 0 && l2 > 0;
    }
    if (!ok) last_fail = m;
  }
  if (last_fail < m_end) rep.bound_m = last_fail;
  return rep;
}

// ---------------------------------------------------------------------------
// Stream I/O

void write_stream_csv(std::ostream& os, const PhaseStream& stream) {
  os << "n,frac,err_bound\n";
  char buf[40];
  for (std::size_t n = 0; n < stream.size(); ++n) {
    const PhaseTerm& t = stream.terms()[n];
    std::snprintf(buf, sizeof buf, "%.17g", t.err_bound);
    os << n << "," << turns_to_decimal(t.frac, 20) << ',' << buf << '\n';
  }
}

namespace {

constexpr char kMagic[8] = {'C', 'H', 'L', 'P', 'H', 'S', '0', '1'};

void put_le(std::ostream& os, std::uint64_t v, int bytes) {
  char b[8];
  for (int i = 0; i < bytes; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, bytes);
}

bool get_le(std::istream& is, std::uint64_t& v, int bytes) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), bytes)) return false;
  v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}

}  // namespace

void write_stream_binary(std::ostream& os, const PhaseStream& stream) {
  os.write(kMagic, 8);
  put_le(os, stream.size(), 8);
  for (const PhaseTerm& t : stream.terms()) {
    put_le(os, t.frac, 8);
    std::int16_t e = std::numeric_limits<std::int16_t>::min();
    if (t.err_bound > 0) {
      const double l = std::ceil(std::log2(t.err_bound));
      e = static_cast<std::int16_t>(std::clamp(l, -32767.0, 32767.0));
    }
    put_le(os, static_cast<std::uint16_t>(e), 2);
  }
  if (!os) throw Error(ErrorCode::IoError, "failed writing phase stream");
}

std::vector<BinaryPhaseRecord> read_stream_binary(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw Error(ErrorCode::ParseError, "not a phase-stream file (bad magic)");
  std::uint64_t count = 0;
  if (!get_le(is, count, 8)) throw Error(ErrorCode::ParseError, "truncated phase-stream header");
  std::vector<BinaryPhaseRecord> out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t f = 0, e = 0;
    if (!get_le(is, f, 8) || !get_le(is, e, 2))
      throw Error(ErrorCode::LengthMismatch, "phase stream declares " + std::to_string(count) +
                                                 " records, found " + std::to_string(i));
    out.push_back({f, static_cast<std::int16_t>(static_cast<std::uint16_t>(e))});
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw Error(ErrorCode::LengthMismatch, "trailing bytes after declared phase-stream records");
  return out;
}

}  // namespace chowla::bigphase
