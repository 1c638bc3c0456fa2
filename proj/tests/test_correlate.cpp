#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "chowla/correlate.hpp"
#include "chowla/generators.hpp"
#include "chowla/rng.hpp"

using namespace chowla;
using namespace chowla::correlate;

namespace {

std::complex<double> brute(const std::vector<UnitValue>& z, const Pattern& p, std::uint64_t N) {
  std::complex<double> acc = 0;
  for (std::uint64_t n = 0; n < N; ++n) {
    std::complex<double> t = 1;
    for (std::size_t s = 0; s < p.size(); ++s) {
      const UnitValue& x = z[n + p.shifts[s]];
      t *= x.is_zero() ? 0.0 : std::polar(1.0, 2 * std::numbers::pi * x.phase() * static_cast<double>(p.exponents[s]));
    }
    acc += t;
  }
  return acc / static_cast<double>(N);
}

SourcePtr power_source(const std::string& beta, std::int64_t n) {
  const double up = beta == "golden" ? 1.62 : 1.5;
  const auto budget = bigphase::PrecisionBudget::for_stream(up, n);
  const auto b = bigphase::HighPrecisionReal::parse(beta, budget.total_bits);
  return gen::power_phase_source(std::make_shared<bigphase::PhaseStream>(
      bigphase::phase_stream(b, bigphase::GFunc::one(), budget)));
}

}  // namespace

TEST_CASE("simple averages") {
  const auto one = gen::constant_source(UnitValue::one());
  CHECK(correlation_avg(*one, Pattern{{0}, {1}}, 17).value == std::complex<double>(1, 0));
  const auto iid = gen::iid_source(2, 0.0, 1);
  const std::uint64_t N = 100000;
  CHECK(correlation_avg(*iid, Pattern{{0, 1}, {1, 1}}, N).modulus() <= 5 / std::sqrt(N));
  CHECK(correlation_avg(*gen::alternating_source(), Pattern{{0, 1}, {1, 1}}, 100).value ==
        std::complex<double>(-1, 0));
  CHECK_THROWS_AS(correlation_avg(*iid, Pattern{{0}, {2}}, 10), Error);
  CHECK_THROWS_AS(correlation_avg(*iid, Pattern{{1, 0}, {1, 1}}, 10), Error);
  std::vector<UnitValue> four(4, UnitValue::one());
  VectorSource shortv(four);
  try {
    (void)correlation_avg(shortv, Pattern{{0, 2}, {1, 1}}, 3);
    FAIL("expected SourceTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SourceTooShort);
  }
}

TEST_CASE("three halves relation is exact") {
  const auto src = power_source("3/2", 10001);
  const auto r = correlation_avg(*src, Pattern{{0, 1}, {-3, 2}}, 10000);
  CHECK(std::abs(r.value - 1.0) <= 1e-9);
  CHECK(r.err_hint < 1e-9);
  CHECK(r.modulus() <= 1 + r.err_hint + 1e-15);
}

TEST_CASE("brute force agreement on short U(2) sequences") {
  const CounterRng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<UnitValue> z(12);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const auto c = rng.below(3, i, trial);
      z[i] = c == 2 ? UnitValue::zero() : UnitValue::root_of_unity(static_cast<std::int64_t>(c), 2);
    }
    VectorSource src(z);
    const std::int64_t exps[] = {-1, 0, 1, 2};
    for (const auto& p : enumerate_patterns(3, exps, std::nullopt, {})) {
      const std::uint64_t N = 12 - p.max_shift();
      CHECK(std::abs(correlation_avg(src, p, N).value - brute(z, p, N)) <= 1e-12);
    }
  }
}

TEST_CASE("symmetries") {
  const auto src = gen::iid_source(std::nullopt, 0.1, 8);
  const auto z = materialize(*src, 0, 20010);
  const Pattern p{{0, 2, 5}, {1, -2, 3}};
  const auto v = correlation_avg(z, p, 20000).value;
  CHECK(correlation_avg(z, p.negated(), 20000).value == std::conj(v));
  for (std::int64_t c : {1, 3}) {
    const auto w = correlation_avg(z, p.shifted(c), 20000).value;
    CHECK(std::abs(w - v) <= 2.0 * (p.max_shift() + c) / 20000);
  }

  const auto roots = materialize(*gen::iid_source(3, 0.2, 9), 0, 5005);
  const Pattern q{{0, 1}, {1, 2}};
  const auto base = correlation_avg(roots, q, 5000).value;
  CHECK(correlation_avg(roots, Pattern{{0, 1}, {4, 2}}, 5000).value == base);
  CHECK(correlation_avg(roots, Pattern{{0, 1}, {1, -1}}, 5000).value == base);
}

TEST_CASE("running checkpoints") {
  const auto z = materialize(*gen::iid_source(4, 0.0, 2), 0, 30002);
  const Pattern p{{0, 2}, {1, 3}};
  const std::uint64_t ck[] = {1, 4096, 5000, 30000};
  const auto r = correlation_avg(z, p, 30000, 0.0, ck);
  REQUIRE(r.running.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.running[i].first == ck[i]);
    CHECK(r.running[i].second == correlation_avg(z, p, ck[i]).value);
  }
  const std::uint64_t bad[] = {30001};
  CHECK_THROWS_AS(correlation_avg(z, p, 30000, 0.0, bad), Error);
}

TEST_CASE("pattern enumeration") {
  const std::int64_t one[] = {1};
  CHECK(enumerate_patterns(3, one, IndexBound::finite(2)).size() == 8);
  EnumerationOptions all;
  all.canonical_base = false;
  const auto fifteen = enumerate_patterns(3, one, IndexBound::finite(2), all);
  CHECK(fifteen.size() == 15);
  CHECK(std::set<Pattern>(fifteen.begin(), fifteen.end()).size() == 15);

  // Mod-3 reduction and conjugate removal: exponents {1,2} on one shift
  // leave a single representative.
  const std::int64_t e12[] = {1, 2, 4};
  const auto p3 = enumerate_patterns(0, e12, IndexBound::finite(3));
  REQUIRE(p3.size() == 1);
  CHECK(p3[0].exponents == std::vector<std::int64_t>{1});
  // Two shifts over {0,1,2} mod 3: 8 non-zero tuples, 4 conjugate classes.
  const std::int64_t e012[] = {0, 1, 2};
  std::size_t two = 0;
  for (const auto& p : enumerate_patterns(1, e012, IndexBound::finite(3))) two += p.size() == 2;
  CHECK(two == 4);

  const std::int64_t zero[] = {0, 2};
  CHECK_THROWS_AS(enumerate_patterns(2, zero, IndexBound::finite(2)), Error);
  const std::int64_t many[] = {-3, -2, -1, 1, 2, 3};
  EnumerationOptions capped;
  capped.pattern_cap = 100;
  try {
    (void)enumerate_patterns(4, many, std::nullopt, capped);
    FAIL("expected PatternExplosion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PatternExplosion);
  }
}

TEST_CASE("chowla battery") {
  const std::int64_t one[] = {1};
  EnumerationOptions all;
  all.canonical_base = false;
  const auto iid = gen::iid_source(2, 0.0, 3);
  const auto b = chowla_battery(*iid, 3, one, 100000, 0.05, all);
  CHECK(b.reports.size() == 15);
  CHECK(b.pass);

  const auto alt = chowla_battery(*gen::alternating_source(), 1, one, 1000, 0.05);
  CHECK_FALSE(alt.pass);
  CHECK(alt.worst_offender().pattern == Pattern{{0, 1}, {1, 1}});
  CHECK(alt.worst_offender().value == std::complex<double>(-1, 0));

  const std::int64_t sym[] = {-3, -2, -1, 0, 1, 2, 3};
  const auto three = chowla_battery(*power_source("3/2", 10001), 1, sym, 10000, 0.05);
  CHECK_FALSE(three.pass);
  CHECK(three.worst_offender().pattern == Pattern{{0, 1}, {-3, 2}});

  // The omp pattern loop reproduces single averages exactly.
  const auto z = materialize(*iid, 0, 100003);
  for (const auto& r : b.reports) CHECK(r.value == correlation_avg(z, r.pattern, 100000).value);
  CHECK(default_tolerance(100) == 0.5);
  CHECK(default_tolerance(1000000) == 0.05);
}

TEST_CASE("index estimation") {
  const auto signs = gen::hat_source(gen::alternating_support_source(), 2, 4);
  CHECK(estimate_index(*signs, 10000, 64).bound == IndexBound::finite(2));
  CHECK(estimate_index(*gen::constant_source(UnitValue::zero()), 1000, 64).bound == IndexBound::finite(2));
  CHECK(estimate_index(*gen::iid_source(12, 0.0, 1), 10000, 64).bound == IndexBound::finite(12));
  CHECK(estimate_index(*gen::iid_source(5, 0.5, 1), 10000, 64).bound == IndexBound::finite(5));
  const auto rot = gen::linear_phase_source(std::sqrt(2.0) - 1);
  const auto e = estimate_index(*rot, 10000, 64);
  CHECK(e.bound == IndexBound::exceeds_tested(64));
  CHECK(e.density.size() == 63);
  CHECK(estimate_index(*power_source("3/2", 10000), 10000, 64).bound == IndexBound::exceeds_tested(64));
  // Fixed-point turns exactly on U(4).
  const auto quarter = gen::constant_source(UnitValue::from_turns(3ull << 62));
  CHECK(estimate_index(*quarter, 100, 64).bound == IndexBound::finite(4));
}

TEST_CASE("relation scan") {
  // Oracle: i0 + i1 (3/2) = 0, i.e. 2 i0 + 3 i1 = 0.
  const auto src = power_source("3/2", 10002);
  std::set<Pattern> expect;
  for (int i0 = -6; i0 <= 6; ++i0)
    for (int i1 = -6; i1 <= 6; ++i1)
      if (i0 && i1 && 2 * i0 + 3 * i1 == 0) expect.insert(Pattern{{0, 1}, {i0, i1}});
  std::set<Pattern> got;
  for (const auto& r : relation_scan(*src, 1, 6, 10000)) got.insert(r.pattern);
  CHECK(got == expect);
  CHECK(expect.size() == 4);

  // Two and three shifts: 4 i0 + 6 i1 + 9 i2 = 0 and the two-shift cases.
  std::set<Pattern> expect2;
  for (int i0 = -3; i0 <= 3; ++i0)
    for (int i1 = -3; i1 <= 3; ++i1) {
      if (i0 && i1 && 2 * i0 + 3 * i1 == 0) expect2.insert(Pattern{{0, 1}, {i0, i1}});
      if (i0 && i1 && 4 * i0 + 9 * i1 == 0) expect2.insert(Pattern{{0, 2}, {i0, i1}});
      for (int i2 = -3; i2 <= 3; ++i2)
        if (i0 && i1 && i2 && 4 * i0 + 6 * i1 + 9 * i2 == 0) expect2.insert(Pattern{{0, 1, 2}, {i0, i1, i2}});
    }
  std::set<Pattern> got2;
  for (const auto& r : relation_scan(*src, 2, 3, 10000)) got2.insert(r.pattern);
  CHECK(got2 == expect2);

  CHECK(relation_scan(*gen::iid_source(2, 0.0, 5), 2, 2, 100000).empty());
}

TEST_CASE("exports") {
  const std::int64_t one[] = {1};
  const auto b = chowla_battery(*gen::alternating_source(), 1, one, 100, 0.05);
  std::ostringstream os;
  write_reports_csv(os, b.reports);
  CHECK(os.str().rfind("pattern,N,re,im,modulus\n\"((0),(1))\",100,", 0) == 0);
  const auto j = to_json(b);
  CHECK(j["verdict"] == "fail");
  CHECK(j["worst"]["pattern"]["shifts"] == nlohmann::json::array({0, 1}));
}
