#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "chowla/equidist.hpp"
#include "chowla/generators.hpp"
#include "chowla/rng.hpp"

using namespace chowla;
using namespace chowla::equidist;

namespace {

// sup_t |#{x < t}/N - t| over t at the points and just above them.
double brute_discrepancy(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (const double t : x) {
    std::size_t below = 0, upto = 0;
    for (const double y : x) {
      below += y < t;
      upto += y <= t;
    }
    d = std::max({d, std::fabs(below / n - t), std::fabs(upto / n - t)});
  }
  return d;
}

SupportMeasure random_measure(std::uint64_t seed, int k) {
  std::vector<std::uint8_t> bits(997);
  const CounterRng rng(seed);
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = rng.uniform01(i) < 0.3 ? 0 : 1;
  return SupportMeasure::from_support(bits, k);
}

}  // namespace

TEST_CASE("star discrepancy") {
  const double zero[] = {0.0};
  CHECK(star_discrepancy(zero) == 1.0);
  std::vector<double> mid;
  for (int i = 1; i <= 10; ++i) mid.push_back((2.0 * i - 1) / 20);
  CHECK(star_discrepancy(mid) == doctest::Approx(0.05).epsilon(1e-14));

  const auto stream = bigphase::phase_stream(bigphase::HighPrecisionReal::parse("3/2", 0),
                                             bigphase::GFunc::one(), 10000);
  std::vector<double> fr;
  for (std::size_t n = 0; n < stream.size(); ++n) fr.push_back(stream.frac(n));
  CHECK(std::fabs(star_discrepancy(fr) - brute_discrepancy(fr)) <= 1e-12);

  const double bad[] = {0.2, 1.0};
  CHECK_THROWS_AS(star_discrepancy(bad), Error);
  const double neg[] = {-0.1};
  try {
    (void)star_discrepancy(neg);
    FAIL("expected PointOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PointOutOfRange);
  }

  const CounterRng rng(3);
  std::vector<double> u(100000);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = rng.uniform01(i);
  const double d = star_discrepancy(u);
  CHECK(d > 0);
  CHECK(d <= 0.02);
}

TEST_CASE("weyl sums") {
  const double alpha = std::sqrt(2.0) - 1;
  const auto rot = gen::linear_phase_source(alpha);
  const double cancel[] = {0.0, -alpha};
  CHECK(std::abs(weyl_sum(*rot, cancel, 5000) - 1.0) < 1e-15);

  for (const std::uint64_t N : {10ull, 1000ull, 77777ull}) {
    const double expect = std::fabs(std::sin(std::numbers::pi * N * alpha)) /
                          (N * std::fabs(std::sin(std::numbers::pi * alpha)));
    CHECK(std::abs(weyl_sum(*rot, {}, N)) == doctest::Approx(expect).epsilon(1e-9));
  }

  const double quad[] = {0.0, 0.1, 0.3};
  CHECK(std::abs(weyl_sum(*gen::iid_source(2, 0.0, 4), quad, 100000)) <= 5 / std::sqrt(1e5));
  const double weyl[] = {0.0, 0.0, alpha};
  CHECK(std::abs(weyl_sum(*gen::constant_source(UnitValue::one()), weyl, 100000)) <= 0.05);
}

TEST_CASE("hat measure values") {
  const auto ones = SupportMeasure::point_mass_ones(4);
  CylinderSpec b{{UnitValue::root_of_unity(0, 2), UnitValue::root_of_unity(1, 2)}, {}};
  CHECK(hat_measure_exact(b, ones, 2) == mpq_class(1, 4));
  CylinderSpec with_zero{{UnitValue::one(), UnitValue::zero()}, {}};
  CHECK(hat_measure_exact(with_zero, ones, 2) == 0);

  const auto half = SupportMeasure::bernoulli(mpq_class(1, 2), 3);
  CylinderSpec w{{UnitValue::root_of_unity(1, 3), UnitValue::zero(), UnitValue::root_of_unity(2, 3)}, {}};
  CHECK(hat_measure_exact(w, half, 3) == mpq_class(1, 72));

  CylinderSpec quarter{{UnitValue::root_of_unity(1, 4)}, {}};
  try {
    (void)hat_measure_exact(quarter, ones, 2);
    FAIL("expected LetterNotInUm");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LetterNotInUm);
  }
  CHECK_THROWS_AS(hat_measure(CylinderSpec{{UnitValue::from_phase(0.3)}, {}}, ones, 2), Error);
  CHECK(hat_measure_exact(CylinderSpec{{UnitValue::from_turns(1ull << 62)}, {}}, ones, 4) == mpq_class(1, 4));
  CHECK(hat_measure_exact(CylinderSpec{{UnitValue::root_of_unity(2, 4)}, {}}, ones, 2) == mpq_class(1, 2));

  // All non-zero cylinders under the all-ones point mass: (1/m)^k.
  for (std::uint32_t m = 2; m <= 5; ++m)
    for (int k = 1; k <= 4; ++k) {
      CylinderSpec c;
      for (int j = 0; j < k; ++j) c.letters.push_back(UnitValue::root_of_unity(j % m, m));
      mpz_class den;
      mpz_ui_pow_ui(den.get_mpz_t(), m, k);
      CHECK(hat_measure_exact(c, ones, m) == mpq_class(1) / mpq_class(den));
    }
}

TEST_CASE("hat measure additivity on random cylinders") {
  const CounterRng rng(17);
  int checked = 0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const auto m = static_cast<std::uint32_t>(2 + rng.below(4, t, 0));
    const int k = 1 + static_cast<int>(rng.below(4, t, 1));
    const SupportMeasure nu = t % 2 ? random_measure(t, k + 1)
                                    : SupportMeasure::bernoulli(mpq_class(1 + rng.below(9, t, 2), 10), k + 1);
    CylinderSpec c;
    for (int j = 0; j < k; ++j) {
      const auto l = rng.below(m + 1, t, 10 + j);
      c.letters.push_back(l == 0 ? UnitValue::zero() : UnitValue::root_of_unity(l - 1, m));
    }
    mpq_class sum = 0;
    for (std::uint32_t l = 0; l <= m; ++l) {
      CylinderSpec e = c;
      e.letters.push_back(l == 0 ? UnitValue::zero() : UnitValue::root_of_unity(l - 1, m));
      sum += hat_measure_exact(e, nu, m);
    }
    CHECK(sum == hat_measure_exact(c, nu, m));
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("support measure tables") {
  const auto nu = random_measure(5, 4);
  CHECK(nu.consistency_error() == 0.0);
  CHECK(nu.prob(0, 0) == 1);
  const std::vector<std::vector<double>> good{{1.0}, {0.25, 0.75}, {0.125, 0.125, 0.125, 0.625}};
  const auto t = SupportMeasure::from_table(good);
  CHECK(t.prob(3, 2) == mpq_class(5, 8));
  auto bad = good;
  bad[2][3] += 1e-6;
  CHECK_THROWS_AS(SupportMeasure::from_table(bad), Error);
  auto tiny = good;
  tiny[2][3] += 1e-12;
  CHECK_NOTHROW(SupportMeasure::from_table(tiny));
  CHECK_THROWS_AS(SupportMeasure::from_table({{1.0}, {0.5}}), Error);
  CHECK_THROWS_AS(t.prob(0, 3), Error);
}

TEST_CASE("genericity") {
  const auto iid = genericity_test(*gen::iid_source(2, 0.0, 6), 3, 1000000, 0.01);
  CHECK(iid.pass);
  CHECK(iid.max_deviation <= 0.01);
  CHECK(iid.rows.size() == 27);

  const auto one = genericity_test(*gen::constant_source(UnitValue::one()), 2, 1000, 0.01);
  CHECK_FALSE(one.pass);
  CHECK(one.rows[4].label == "[0/2,0/2]");
  CHECK(one.rows[4].empirical == 1.0);
  CHECK(one.rows[4].expected == 0.25);

  // Hat sampler over a deterministic support: generic for its hat measure.
  const auto hat = gen::hat_source(gen::alternating_support_source(), 3, 2);
  GenericityOptions three;
  three.m = 3;
  CHECK(genericity_test(*hat, 3, 300000, 0.01, three).pass);

  // A non-trivial support with frozen signs is not.
  const auto alt = gen::alternating_source();
  CHECK_FALSE(genericity_test(*alt, 2, 10000, 0.05).pass);

  GenericityOptions circle;
  circle.m = std::nullopt;
  const auto beta = bigphase::random_dyadic(1.1, 2.5, 256, 11);
  const auto budget = bigphase::PrecisionBudget::for_stream(beta.upper_bound(), 100000);
  const auto src = gen::power_phase_source(std::make_shared<bigphase::PhaseStream>(
      bigphase::phase_stream(beta, bigphase::GFunc::one(), budget)));
  const auto c = genericity_test(*src, 2, 100000, 0.05, circle);
  CHECK(c.pass);
  CHECK(c.rows.size() == 81);

  GenericityOptions big;
  big.m = 100;
  try {
    (void)genericity_test(*gen::iid_source(100, 0.0, 1), 4, 1000, 0.1, big);
    FAIL("expected CylinderExplosion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CylinderExplosion);
  }
  try {
    (void)genericity_test(*gen::iid_source(std::nullopt, 0.0, 1), 2, 1000, 0.1);
    FAIL("expected RejectionDensityExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RejectionDensityExceeded);
  }

  // A sparse rejected set is tolerated and its windows leave the table.
  std::vector<UnitValue> v = materialize(*gen::iid_source(2, 0.0, 3), 0, 20000);
  v[100] = UnitValue::from_phase(0.3);
  VectorSource sparse(v);
  const auto r = genericity_test(sparse, 2, 20000, 0.05);
  CHECK(r.rejected_density == doctest::Approx(1.0 / 20000));
  std::uint64_t total = 0;
  for (const auto& row : r.rows) total += static_cast<std::uint64_t>(std::llround(row.empirical * r.windows));
  CHECK(total == r.windows - 2);

  std::ostringstream os;
  write_genericity_csv(os, one);
  CHECK(os.str().rfind("cylinder,empirical,expected,deviation\n\"[0,0]\",0,", 0) == 0);
  CHECK(to_json(one)["verdict"] == "fail");
}
