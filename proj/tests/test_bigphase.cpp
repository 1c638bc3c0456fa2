#include <doctest.h>

#include <cmath>
#include <sstream>

#include "chowla/bigphase.hpp"
#include "chowla/rng.hpp"

using namespace chowla;
using namespace chowla::bigphase;

namespace {

// Circular distance between q mod 1 and t / 2^64, exactly.
double exact_gap(const mpq_class& q, std::uint64_t t) {
  mpz_class fl;
  mpz_fdiv_q(fl.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  mpq_class fr = q - mpq_class(fl);
  mpz_class tz;
  mpz_import(tz.get_mpz_t(), 1, -1, 8, 0, 0, &t);
  mpq_class e(tz, mpz_class(1) << 64);
  e.canonicalize();
  mpq_class d = fr - e;
  if (d < 0) d = -d;
  if (d > mpq_class(1, 2)) d = 1 - d;
  return d.get_d();
}

}  // namespace

TEST_CASE("required_precision formula") {
  CHECK(required_precision(2.0, 100, 64) == 164);
  CHECK(required_precision(1.5, 1000, 64) == 649);
  CHECK(required_precision(4.0, 10, 16) == 36);
  CHECK_THROWS_AS(required_precision(1.0, 10, 64), Error);
  CHECK_THROWS_AS(required_precision(0.5, 10, 64), Error);
  CHECK_THROWS_AS(required_precision(2.0, 0, 64), Error);
  CHECK_THROWS_AS(required_precision(2.0, 10, 8), Error);
}

TEST_CASE("budget validation") {
  PrecisionBudget b = PrecisionBudget::for_stream(1.5, 1000, 64);
  CHECK(b.total_bits >= required_precision(1.5, 1000, 64));
  CHECK_NOTHROW(b.validate());
  b.total_bits = 100;
  CHECK_THROWS_AS(b.validate(), Error);
}

TEST_CASE("three halves stream") {
  const auto beta = HighPrecisionReal::parse("3/2", 0);
  CHECK(beta.exact());
  const PhaseStream s = phase_stream(beta, GFunc::one(), 5);
  REQUIRE(s.size() == 5);
  CHECK(s.frac(0) == 0.0);
  CHECK(s.frac(1) == 0.5);
  CHECK(s.frac(2) == 0.25);
  CHECK(s.frac(3) == 0.375);
  CHECK(s.frac(4) == 0.0625);
  CHECK(s.err_bound(0) == 0.0);
  CHECK(s.max_err_bound() <= 0x1p-62);
}

TEST_CASE("integer beta gives zero fractions") {
  const PhaseStream s = phase_stream(HighPrecisionReal::from_double(2.0), GFunc::one(), 200);
  for (std::size_t n = 0; n < s.size(); ++n) CHECK(s.terms()[n].frac == 0u);
}

TEST_CASE("golden ratio satisfies beta^2 = beta + 1") {
  const auto beta = HighPrecisionReal::golden_ratio(256);
  CHECK_FALSE(beta.exact());
  const PhaseStream s = phase_stream(beta, GFunc::one(), 3);
  // frac(phi) from an independent integer square root.
  mpz_class r = mpz_class(5) << 256;
  mpz_sqrt(r.get_mpz_t(), r.get_mpz_t());
  mpq_class phi(mpz_class(mpz_class(1) << 128) + r, mpz_class(1) << 129);
  phi.canonicalize();
  const mpq_class phi_alt(r, mpz_class(1) << 128);  // sqrt5, for sanity
  CHECK(std::fabs(phi_alt.get_d() - std::sqrt(5.0)) < 1e-15);
  CHECK(s.err_bound(2) <= 0x1p-62);
  CHECK(exact_gap(phi, s.terms()[2].frac) <= s.err_bound(2) + 0x1p-120);
  CHECK(exact_gap(phi, s.terms()[1].frac) <= s.err_bound(1) + 0x1p-120);
  CHECK(s.frac(2) == doctest::Approx(0.6180339887498949).epsilon(1e-15));
}

TEST_CASE("error bounds are sound on random dyadic beta") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto beta = random_dyadic(1.1, 3.0, 256, seed);
    CHECK(beta.to_double() > 1.1);
    CHECK(beta.to_double() < 3.0);
    const PhaseStream s = phase_stream(beta, GFunc::one(), 31);
    const mpq_class b = beta.to_rational();
    mpq_class p = 1;
    double prev = 0;
    for (std::size_t n = 0; n <= 30; ++n) {
      CHECK(exact_gap(p, s.terms()[n].frac) <= s.err_bound(n));
      CHECK(s.err_bound(n) >= prev);
      prev = s.err_bound(n);
      p *= b;
    }
  }
}

TEST_CASE("long streams whose integer part outgrows beta's bits") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto beta = random_dyadic(1.1, 3.0, 40, 1000 + seed);
    const PhaseStream s = phase_stream(beta, GFunc::polynomial({-0.25, 0.125}), 400);
    const mpq_class b = beta.to_rational();
    mpq_class p = mpq_class(-0.25) + mpq_class(0.125) * b;
    for (std::size_t n = 0; n < 400; ++n) {
      CHECK(exact_gap(p, s.terms()[n].frac) <= s.err_bound(n));
      p *= b;
    }
  }
}

TEST_CASE("non-trivial g is tracked soundly") {
  const auto beta = random_dyadic(1.2, 2.0, 128, 11);
  const GFunc g = GFunc::polynomial({0.25, -1.5, 0.5});
  const PhaseStream s = phase_stream(beta, g, 40);
  const mpq_class b = beta.to_rational();
  mpq_class gb = mpq_class(0.25) + mpq_class(-1.5) * b + mpq_class(0.5) * b * b;
  mpq_class p = gb;
  for (std::size_t n = 0; n < 40; ++n) {
    CHECK(exact_gap(p, s.terms()[n].frac) <= s.err_bound(n));
    p *= b;
  }
  const GFunc h = GFunc::power_product(3.0, -2);
  const PhaseStream t = phase_stream(beta, h, 40);
  mpq_class q = mpq_class(3) / (b * b);
  for (std::size_t n = 0; n < 40; ++n) {
    CHECK(exact_gap(q, t.terms()[n].frac) <= t.err_bound(n));
    q *= b;
  }
}

TEST_CASE("stress case exhausts precision below 8 guard bits") {
  const auto beta = HighPrecisionReal::dyadic((mpz_class(1) << 21) - 1, 20);
  CHECK(beta.to_double() == 2.0 - 0x1p-20);
  CHECK_THROWS_AS(phase_stream(beta, GFunc::one(), 10000, 7), PrecisionExhausted);
  try {
    (void)phase_stream(beta, GFunc::one(), 10000, 4);
    FAIL("expected PrecisionExhausted");
  } catch (const PrecisionExhausted& e) {
    CHECK(e.code() == ErrorCode::PrecisionExhausted);
    CHECK(e.n() > 0);
    CHECK(e.n() < 10000);
  }
  const PhaseStream ok = phase_stream(beta, GFunc::one(), 10000, 64);
  CHECK(ok.max_err_bound() <= emission_cap(64));
}

TEST_CASE("parse and describe") {
  CHECK(HighPrecisionReal::parse("1.5", 10).to_double() == 1.5);
  CHECK(HighPrecisionReal::parse("sqrt(2)", 80).to_double() == doctest::Approx(std::sqrt(2.0)));
  CHECK(HighPrecisionReal::parse("golden", 80).to_string(10) == "1.6180339887");
  CHECK_THROWS_AS(HighPrecisionReal::parse("abc", 10), Error);
  CHECK(GFunc::parse("poly:1,2").eval(2.0).g == 5.0);
  CHECK(GFunc::parse("power:2,3").eval(2.0).g1 == 24.0);
  CHECK_THROWS_AS(GFunc::parse("nope"), Error);
}

TEST_CASE("koksma evidence for g = 1") {
  const KoksmaReport one = koksma_check(GFunc::one(), 1.5, 2.0, 2, 1, 101);
  CHECK(one.pairs == 1);
  CHECK(one.min_abs_d1 == doctest::Approx(3.75));
  CHECK(one.argmin_x == 1.5);
  CHECK(one.argmin_m == 3);
  CHECK(one.argmin_n == 2);

  const KoksmaReport all = koksma_check(GFunc::one(), 1.5, 2.0, 1, 30, 201);
  CHECK(all.condition2_positive);
  CHECK(all.all_monotone);
  REQUIRE(all.bound_m.has_value());
  CHECK(*all.bound_m == 1);
  CHECK(all.label == "numeric-evidence");
}

TEST_CASE("koksma rejects vanishing g") {
  CHECK_THROWS_AS(koksma_check(GFunc::polynomial({-1.75, 1.0}), 1.5, 2.0, 1, 5, 101), Error);
  try {
    koksma_check(GFunc::polynomial({-1.75, 1.0}), 1.5, 2.0, 1, 5, 101);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GVanishes);
  }
}

TEST_CASE("binary stream round trip") {
  const PhaseStream s = phase_stream(random_dyadic(1.1, 2.5, 256, 3), GFunc::one(), 64);
  std::stringstream ss;
  write_stream_binary(ss, s);
  const auto recs = read_stream_binary(ss);
  REQUIRE(recs.size() == 64);
  for (std::size_t n = 0; n < 64; ++n) {
    CHECK(recs[n].frac == s.terms()[n].frac);
    if (s.err_bound(n) > 0) CHECK(std::ldexp(1.0, recs[n].log2_err) >= s.err_bound(n));
  }
  std::string bytes = ss.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream cut(bytes);
  CHECK_THROWS_AS(read_stream_binary(cut), Error);

  std::stringstream csv;
  write_stream_csv(csv, s);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "n,frac,err_bound");
}
