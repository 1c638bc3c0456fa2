#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "chowla/generators.hpp"
#include "chowla/ortho.hpp"

using namespace chowla;
using namespace chowla::ortho;

namespace {

const double kA = std::sqrt(2.0) - 1;

Point origin(int d) { return Point(d, 0); }

ZeroEntropySystem skew() { return ZeroEntropySystem::unipotent({{1, 1}, {0, 1}}, {0.0, kA}); }

}  // namespace

TEST_CASE("rotation orbits") {
  const auto rot = ZeroEntropySystem::rotation({kA});
  for (std::uint64_t n : {0ull, 1ull, 7ull, 123456ull}) {
    const double expect = std::fmod(static_cast<double>(n) * kA, 1.0);
    CHECK(circular_distance(orbit_eval(rot, Character{{1}}, origin(1), n).turns(),
                            static_cast<std::uint64_t>(std::ldexp(expect, 64))) < 1e-10);
  }
  const auto rot2 = ZeroEntropySystem::rotation({kA, std::sqrt(3.0) - 1});
  const Point x0 = make_point(std::vector<double>{0.25, 0.5});
  for (std::uint64_t n = 0; n < 50; ++n)
    for (std::uint64_t m : {1ull, 13ull})
      CHECK(orbit_eval(rot2, Character{{2, -3}}, x0, n + m) ==
            orbit_eval(rot2, Character{{2, -3}}, rot2.iterate(x0, m), n));
  CHECK(ZeroEntropySystem::rotation({0.25}).iterate(origin(1), 3)[0] == real_to_turns128(0.75));
}

TEST_CASE("unipotent orbits") {
  const auto s = skew();
  const Turns128 a = real_to_turns128(kA);
  Point x = origin(2);
  for (std::uint64_t n = 0; n < 300; ++n) {
    CHECK(s.iterate(origin(2), n) == x);
    // First coordinate: n(n-1)/2 alpha.
    CHECK(x[0] == a * static_cast<Turns128>(n * (n - 1) / 2));
    x = s.step(x);
  }
  const double close = std::fmod(1e4 * (1e4 - 1) / 2 * kA, 1.0);
  CHECK(std::fabs(orbit_eval(s, Character{{1, 0}}, origin(2), 10000).phase() - close) < 1e-6);

  const auto three = ZeroEntropySystem::unipotent({{1, 2, -1}, {0, 1, 3}, {0, 0, 1}}, {0.1, 0.2, kA});
  const Point y0 = make_point(std::vector<double>{0.3, 0.7, 0.1});
  Point y = y0;
  for (std::uint64_t n = 0; n < 200; ++n) {
    CHECK(three.iterate(y0, n) == y);
    y = three.step(y);
  }
  for (std::uint64_t n = 0; n < 40; ++n)
    CHECK(orbit_eval(three, Character{{1, -2, 5}}, y0, n + 9) ==
          orbit_eval(three, Character{{1, -2, 5}}, three.iterate(y0, 9), n));

  CHECK_THROWS_AS(ZeroEntropySystem::unipotent({{2, 1}, {0, 1}}, {0.0, 0.0}), Error);
  CHECK_THROWS_AS(ZeroEntropySystem::unipotent({{1, 0}, {1, 1}}, {0.0, 0.0}), Error);
  CHECK_THROWS_AS(ZeroEntropySystem::unipotent({{1, 1}, {0, 1}}, {0.0}), Error);
  try {
    (void)orbit_eval(s, Character{{1}}, origin(2), 3);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("periodic cycles") {
  const auto c2 = ZeroEntropySystem::periodic(2);
  const Point x0 = c2.cycle_point(0);
  for (std::uint64_t n = 0; n < 10; ++n)
    CHECK(orbit_eval(c2, Character{{1}}, x0, n) == UnitValue::root_of_unity(n % 2, 2));
  const auto c7 = ZeroEntropySystem::periodic(7);
  CHECK(c7.step(c7.cycle_point(6)) == c7.cycle_point(0));
  CHECK(c7.iterate(c7.cycle_point(3), 12) == c7.cycle_point(1));
  CHECK(orbit_eval(c7, Character{{3}}, c7.cycle_point(2), 1) == UnitValue::root_of_unity(2, 7));
}

TEST_CASE("sarnak harness") {
  const auto c2 = ZeroEntropySystem::periodic(2);
  const auto v = sarnak_test(*gen::alternating_source(), c2, Character{{1}}, c2.cycle_point(0), 100000);
  CHECK(std::abs(v - 1.0) <= 1e-12);

  const std::uint64_t N = 100000;
  const auto rot = ZeroEntropySystem::rotation({kA});
  CHECK(std::abs(sarnak_test(*gen::iid_source(2, 0.0, 1), rot, Character{{1}}, origin(1), N)) <= 5 / std::sqrt(N));
  const auto budget = bigphase::PrecisionBudget::for_stream(1.5, N);
  const auto three_halves = gen::power_phase_source(std::make_shared<bigphase::PhaseStream>(
      bigphase::phase_stream(bigphase::HighPrecisionReal::parse("3/2", 0), bigphase::GFunc::one(), budget)));
  CHECK(std::abs(sarnak_test(*three_halves, rot, Character{{1}}, origin(1), N)) <= 0.05);

  // Residue-class oracle for a cycle of length 3.
  const auto c3 = ZeroEntropySystem::periodic(3);
  const auto src = gen::iid_source(std::nullopt, 0.1, 5);
  const auto z = materialize(*src, 0, 3000);
  std::complex<double> cls[3] = {0, 0, 0};
  for (std::size_t n = 0; n < z.size(); ++n) cls[n % 3] += z[n].value();
  std::complex<double> direct = 0;
  for (int r = 0; r < 3; ++r) direct += cls[r] * std::polar(1.0, 2 * std::numbers::pi * (2 * ((r + 1) % 3)) / 3.0);
  direct /= 3000.0;
  CHECK(std::abs(sarnak_test(*src, c3, Character{{2}}, c3.cycle_point(1), 3000) - direct) <= 1e-12);
}

TEST_CASE("block schedules") {
  const auto t = BlockSchedule::triangular(5);
  CHECK(t.b == std::vector<std::uint64_t>{0, 1, 3, 6, 10, 15});
  CHECK_NOTHROW(t.validate());
  const auto up = BlockSchedule::triangular_up_to(100000);
  CHECK(up.b.back() <= 100000);
  CHECK(up.b.back() + up.blocks() + 1 > 100000);
  CHECK_NOTHROW(BlockSchedule::trivial(20).validate());
  CHECK_THROWS_AS((BlockSchedule{{1, 2, 3}}.validate()), Error);
  CHECK_THROWS_AS((BlockSchedule{{0, 2, 2}}.validate()), Error);
  std::vector<std::uint64_t> early{0, 10, 11};
  for (int k = 1; k < 20; ++k) early.push_back(early.back() + k);
  CHECK_NOTHROW((BlockSchedule{early}.validate()));
  auto late = BlockSchedule::triangular(20);
  late.b.push_back(late.b.back() + 1);
  CHECK_THROWS_AS(late.validate(), Error);
  CHECK_THROWS_AS(BlockSchedule::triangular(3).validate(10, 5), Error);
}

TEST_CASE("momo harness") {
  const auto rot = ZeroEntropySystem::rotation({kA});
  const auto one = gen::constant_source(UnitValue::one());
  const auto sched = BlockSchedule::triangular(50);
  const auto pts = random_points(rot, 50, 1);
  const auto r = momo_test(*one, rot, Character::trivial(1), sched, pts, 50);
  CHECK(r.strong == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(r.plain - 1.0) < 1e-15);

  const auto big = BlockSchedule::triangular_up_to(100000);
  const auto iid = gen::iid_source(2, 0.0, 9);
  const auto s = momo_test(*iid, rot, Character::trivial(1), big, random_points(rot, big.blocks(), 2), big.blocks());
  // Oracle: exact E|S_g| for a sum of g fair signs, summed over blocks.
  const auto mean_abs = [](std::uint64_t g) {
    double acc = 0, logp = -static_cast<double>(g) * std::log(2.0);
    for (std::uint64_t j = 0; j <= g; ++j) {
      acc += std::exp(logp) * std::fabs(2.0 * j - g);
      logp += std::log(static_cast<double>(g - j)) - std::log(static_cast<double>(j + 1));
    }
    return acc;
  };
  double expect = 0, var = 0;
  for (std::size_t k = 0; k < big.blocks(); ++k) {
    const std::uint64_t g = big.b[k + 1] - big.b[k];
    const double e = mean_abs(g);
    expect += e;
    var += static_cast<double>(g) - e * e;
  }
  expect /= static_cast<double>(big.b.back());
  const double sd = std::sqrt(var) / static_cast<double>(big.b.back());
  CHECK(std::fabs(s.strong - expect) <= 4 * sd);
  CHECK(expect == doctest::Approx(1.064 / std::sqrt(static_cast<double>(big.blocks()))).epsilon(0.02));
  CHECK(s.strong >= std::abs(s.plain));
  const auto longer = BlockSchedule::triangular_up_to(400000);
  CHECK(momo_test(*iid, rot, Character::trivial(1), longer, random_points(rot, longer.blocks(), 2),
                  longer.blocks()).strong <= 0.05);

  // Trivial schedule with x_k = T^k x0 reproduces the Sarnak average.
  for (const auto& sys : {rot, skew(), ZeroEntropySystem::periodic(5)}) {
    const std::size_t K = 20000;
    const Point x0 = sys.kind() == ZeroEntropySystem::Kind::PeriodicCycle
                         ? sys.cycle_point(2)
                         : make_point(std::vector<double>(sys.dim(), 0.125));
    std::vector<Point> orbit;
    for (std::size_t k = 0; k < K; ++k) orbit.push_back(sys.iterate(x0, k));
    const Character chi{std::vector<std::int64_t>(sys.dim(), 1)};
    const auto src = gen::iid_source(std::nullopt, 0.0, 4);
    const auto m = momo_test(*src, sys, chi, BlockSchedule::trivial(K), orbit, K);
    CHECK(m.plain == sarnak_test(*src, sys, chi, x0, K));
  }

  try {
    (void)momo_test(*iid, rot, Character::trivial(1), sched, pts, 51);
    FAIL("expected ScheduleTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ScheduleTooShort);
  }
}

TEST_CASE("catalog") {
  const auto path = std::filesystem::temp_directory_path() / "chowla_catalog_test.json";
  {
    std::ofstream os(path);
    os << R"([{"kind":"rotation","d":1,"alpha":[0.4142135623730951]},
              {"kind":"unipotent","matrix":[[1,1],[0,1]],"translation":[0,0.4142135623730951]},
              {"kind":"cycle","p":2}])";
  }
  const auto cat = load_catalog(path);
  REQUIRE(cat.size() == 3);
  CHECK(cat[0].kind() == ZeroEntropySystem::Kind::Rotation);
  CHECK(cat[1].dim() == 2);
  CHECK(cat[2].period() == 2);
  CHECK(ZeroEntropySystem::from_json(cat[1].to_json()).iterate(origin(2), 77) == cat[1].iterate(origin(2), 77));
  CHECK_THROWS_AS(ZeroEntropySystem::from_json(nlohmann::json::parse(R"({"kind":"rotation","d":2,"alpha":[0.1]})")), Error);
  CHECK_THROWS_AS(ZeroEntropySystem::from_json(nlohmann::json::parse(R"({"kind":"shift"})")), Error);
  std::filesystem::remove(path);
}
