#include <doctest.h>

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <sstream>

#include "chowla/generators.hpp"

using namespace chowla;
using namespace chowla::gen;

namespace {

std::complex<double> mean_power(const SequenceSource& s, std::uint64_t n, std::int64_t k) {
  const auto v = materialize(s, 0, n);
  std::complex<double> acc = 0;
  for (const auto& x : v) acc += x.pow(k).value();
  return acc / static_cast<double>(n);
}

const std::string kMaps = std::string(CHOWLA_DATA_DIR) + "/maps/";

}  // namespace

TEST_CASE("iid sources") {
  const auto signs = iid_source(2, 0.0, 1);
  const auto v = materialize(*signs, 0, 1000);
  int plus = 0;
  for (const auto& x : v) {
    REQUIRE(x.is_rational());
    CHECK(x.denominator() == 2);
    plus += x.numerator() == 0;
  }
  CHECK(plus > 400);
  CHECK(plus < 600);
  CHECK(signs->declared_index() == IndexBound::finite(2));

  const auto zeros = iid_source(2, 1.0, 1);
  for (const auto& x : materialize(*zeros, 0, 100)) CHECK(x.is_zero());

  const std::uint64_t n = 100000;
  const auto twelve = iid_source(12, 0.0, 5);
  for (std::int64_t k = 1; k < 12; ++k) CHECK(std::abs(mean_power(*twelve, n, k)) <= 5.0 / std::sqrt(n));

  const auto circle = iid_source(std::nullopt, 0.0, 9);
  CHECK(std::abs(mean_power(*circle, n, 1)) <= 5.0 / std::sqrt(n));
  CHECK(circle->declared_index() == IndexBound::infinite());
}

TEST_CASE("sources are deterministic and reseedable") {
  const auto s = iid_source(3, 0.2, 77);
  for (std::uint64_t n = 0; n < 50; ++n) CHECK(s->at(n) == s->at(n));
  const auto t = s->reseeded(78);
  int same = 0;
  for (std::uint64_t n = 0; n < 200; ++n) same += s->at(n) == t->at(n);
  CHECK(same < 150);
  CHECK_THROWS_AS(alternating_source()->reseeded(1), Error);
}

TEST_CASE("hat sampler") {
  const auto ones = hat_source(constant_source(UnitValue::one()), 2, 3);
  for (const auto& x : materialize(*ones, 0, 200)) CHECK((x.is_rational() && x.denominator() == 2));
  const auto none = hat_source(constant_source(UnitValue::zero()), 2, 3);
  for (const auto& x : materialize(*none, 0, 50)) CHECK(x.is_zero());
  const auto alt = hat_source(alternating_support_source(), 2, 3);
  for (std::uint64_t n = 0; n < 100; ++n) CHECK(alt->at(n).is_zero() == (n % 2 == 1));

  std::vector<UnitValue> bad{UnitValue::one(), UnitValue::root_of_unity(1, 4)};
  auto src = std::make_shared<VectorSource>(bad);
  try {
    (void)hat_source(src, 2, 1);
    FAIL("expected BadSupport");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadSupport);
  }
  const auto lazy = hat_source(constant_source(UnitValue::root_of_unity(1, 2)), 2, 1);
  CHECK_THROWS_AS(lazy->at(0), Error);
}

TEST_CASE("hat over all-ones matches iid in distribution") {
  const std::uint64_t n = 200000;
  const auto a = materialize(*hat_source(constant_source(UnitValue::one()), 2, 11), 0, n + 3);
  const auto b = materialize(*iid_source(2, 0.0, 12), 0, n + 3);
  for (int depth = 1; depth <= 3; ++depth) {
    std::map<int, double> fa, fb;
    for (std::uint64_t i = 0; i < n; ++i) {
      int ca = 0, cb = 0;
      for (int j = 0; j < depth; ++j) {
        ca = 2 * ca + static_cast<int>(a[i + j].numerator());
        cb = 2 * cb + static_cast<int>(b[i + j].numerator());
      }
      fa[ca] += 1.0 / n;
      fb[cb] += 1.0 / n;
    }
    for (int c = 0; c < (1 << depth); ++c) CHECK(std::fabs(fa[c] - fb[c]) <= 5.0 / std::sqrt(n));
  }
}

TEST_CASE("block maps from JSON") {
  const BlockMap g1 = BlockMap::load(kMaps + "g1.json");
  CHECK(g1.symbols() == 3);
  CHECK(g1.m == 2);
  const std::uint32_t w00[] = {0, 0}, w01[] = {0, 1}, w20[] = {2, 0};
  CHECK(g1.value(w00) == UnitValue::root_of_unity(0, 2));
  CHECK(g1.value(w01) == UnitValue::root_of_unity(1, 2));
  CHECK(g1.value(w20).is_zero());
  const auto src = blockmap_source(g1, 4);
  CHECK(src->declared_index() == IndexBound::finite(2));
  for (const auto& x : materialize(*src, 0, 500))
    CHECK((x.is_zero() || (x.is_rational() && x.denominator() == 2)));

  const BlockMap g2 = BlockMap::load(kMaps + "g2.json");
  // The word 0,1,3 gives z(0) = g2(0,1) = 1 and z(1) = g2(1,3) = -1.
  const std::uint32_t a[] = {0, 1}, b[] = {1, 3};
  CHECK(g2.value(a).value() == std::complex<double>(1, 0));
  CHECK(g2.value(b).value() == std::complex<double>(-1, 0));

  const BlockMap round = BlockMap::from_json(g2.to_json());
  CHECK(round.table == g2.table);
  CHECK(round.weights == g2.weights);

  const BlockMap star = BlockMap::load(kMaps + "star3.json");
  const BlockMap built = star_map(3);
  CHECK(star.table == built.table);
  CHECK(star.weights == built.weights);

  CHECK_THROWS_AS(BlockMap::from_json(nlohmann::json::parse(R"({"alphabet":[0,1],"l":1,"weights":[0.5,0.6],"table":[]})")), Error);
  CHECK_THROWS_AS(BlockMap::from_json(nlohmann::json::parse(R"({"alphabet":[0,1],"l":1,"table":[[[0],0.14159265358979312,false]]})")), Error);
  CHECK_THROWS_AS(BlockMap::from_json(nlohmann::json::parse(R"({"alphabet":[0,1],"l":1,"m":2,"table":[[[0],"1/3",false]]})")), Error);
  const auto thirds = BlockMap::from_json(nlohmann::json::parse(
      R"({"alphabet":[0,1,2],"l":1,"weights":[0.3333333333333333,"1/3",0.3333333333333333],"table":[]})"));
  CHECK(thirds.weights[0] == mpq_class(1, 3));
}

TEST_CASE("block map source is stationary") {
  const BlockMap g1 = BlockMap::load(kMaps + "g1.json");
  const std::uint64_t n = 200000;
  const auto v = materialize(*blockmap_source(g1, 8), 0, n + 2);
  const auto code = [](const UnitValue& x) { return x.is_zero() ? 0 : 1 + static_cast<int>(x.numerator()); };
  std::map<int, double> f0, f1;
  for (std::uint64_t i = 0; i < n; ++i) {
    f0[3 * code(v[i]) + code(v[i + 1])] += 1.0 / n;
    f1[3 * code(v[i + 1]) + code(v[i + 2])] += 1.0 / n;
  }
  for (int c = 0; c < 9; ++c) CHECK(std::fabs(f0[c] - f1[c]) <= 5.0 / std::sqrt(n));
}

TEST_CASE("star map sampling respects weights") {
  const auto v = materialize(*blockmap_source(star_map(2), 21), 0, 100000);
  double nz = 0;
  for (const auto& x : v) nz += !x.is_zero();
  // P(x_n in U(2), x_{n+1} = *) = 1/4.
  CHECK(nz / 100000 == doctest::Approx(0.25).epsilon(0.03));
}

TEST_CASE("piecewise circle map") {
  CHECK(piecewise_h(0.0) == 0.0);
  CHECK(piecewise_h(0.5) == 0.5);
  CHECK(piecewise_h(0.25) == 0.375);
  CHECK(piecewise_h(0.75) == 0.875);

  // Midpoint quadrature of e(k h(t)).
  const auto quad = [](int k) {
    const int steps = 400000;
    std::complex<double> acc = 0;
    for (int i = 0; i < steps; ++i) {
      const double t = (i + 0.5) / steps;
      acc += std::polar(1.0, 2 * std::numbers::pi * k * piecewise_h(t));
    }
    return acc / static_cast<double>(steps);
  };
  CHECK(std::abs(quad(1)) < 1e-9);
  const std::complex<double> second = quad(2);
  CHECK(std::abs(second) > 0.05);

  const std::uint64_t n = 1000000;
  const auto src = piecewise_circle_source(5);
  CHECK(std::abs(mean_power(*src, n, 1)) <= 5.0 / std::sqrt(n));
  const auto m2 = mean_power(*src, n, 2);
  CHECK(std::abs(m2) >= 0.05);
  CHECK(std::abs(m2 - second) <= 5.0 / std::sqrt(n));
  CHECK(src->declared_index() == IndexBound::infinite());
  for (const auto& x : materialize(*src, 0, 1000)) CHECK_FALSE(x.is_zero());
}

TEST_CASE("power phase source") {
  auto stream = std::make_shared<bigphase::PhaseStream>(bigphase::phase_stream(
      bigphase::HighPrecisionReal::parse("3/2", 0), bigphase::GFunc::one(), 10));
  const auto src = power_phase_source(stream);
  CHECK(src->at(1).phase() == 0.5);
  CHECK(src->declared_index() == IndexBound::infinite());
  CHECK(*src->length() == 10);
  CHECK_THROWS_AS(src->at(10), Error);

  auto golden = std::make_shared<bigphase::PhaseStream>(bigphase::phase_stream(
      bigphase::HighPrecisionReal::golden_ratio(256), bigphase::GFunc::one(), 3));
  const auto g = power_phase_source(golden);
  CHECK(g->at(0).phase() == 0.0);
  CHECK(g->at(1).phase() == doctest::Approx(0.6180339887498949));
  CHECK(g->at(2).phase() == doctest::Approx(0.6180339887498949));

  auto two = std::make_shared<bigphase::PhaseStream>(
      bigphase::phase_stream(bigphase::HighPrecisionReal::from_double(2.0), bigphase::GFunc::one(), 20));
  for (const auto& x : materialize(*power_phase_source(two), 0, 20)) CHECK(x.turns() == 0u);
}

TEST_CASE("csv sources") {
  std::istringstream three("0.5,false\n0,true\n0.25,false\n");
  const auto s = csv_source(three);
  REQUIRE(*s->length() == 3);
  CHECK(s->at(0).value() == std::complex<double>(-1, 0));
  CHECK(s->at(1).is_zero());
  CHECK(s->at(2).value() == std::complex<double>(0, 1));

  std::istringstream empty("");
  CHECK(*csv_source(empty)->length() == 0);

  std::istringstream bad("phase,is_zero\n0.5,false\n1.2,false\n");
  try {
    (void)csv_source(bad, "bad.csv");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
  }

  std::istringstream declared("# length=3\n0.5,false\n");
  try {
    (void)csv_source(declared);
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }

  std::stringstream out;
  const auto thirds = iid_source(3, 0.3, 2);
  write_csv(out, *thirds, 200);
  const auto back = csv_source(out);
  for (std::uint64_t n = 0; n < 200; ++n) {
    const UnitValue a = thirds->at(n), b = back->at(n);
    CHECK(a.is_zero() == b.is_zero());
    if (!a.is_zero()) CHECK(static_cast<__int128>(a.numerator()) * b.denominator() ==
                            static_cast<__int128>(b.numerator()) * a.denominator());
  }
}
