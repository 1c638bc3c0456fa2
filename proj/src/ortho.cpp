#include "chowla/ortho.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "chowla/kernels.hpp"
#include "chowla/parallel.hpp"
#include "chowla/rng.hpp"

namespace chowla::ortho {

namespace {

using Matrix = std::vector<std::vector<Turns128>>;

Turns128 wrap(std::int64_t v) { return static_cast<Turns128>(static_cast<Int128>(v)); }

/// C(n, k) mod 2^128.
Turns128 binomial_mod(std::uint64_t n, unsigned k) {
  if (k > n) return 0;
  mpz_class c;
  mpz_bin_uiui(c.get_mpz_t(), n, k);
  mpz_fdiv_r_2exp(c.get_mpz_t(), c.get_mpz_t(), 128);
  const Turns128 lo = mpz_getlimbn(c.get_mpz_t(), 0);
  const Turns128 hi = mpz_size(c.get_mpz_t()) > 1 ? mpz_getlimbn(c.get_mpz_t(), 1) : 0;
  return (hi << 64) | lo;
}

Point apply(const Matrix& m, const Point& x) {
  Point y(x.size(), 0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += m[i][j] * x[j];
  return y;
}

UnitValue round_turns(Turns128 t) {
  return UnitValue::from_turns(top64(t) + static_cast<std::uint64_t>((t >> 63) & 1));
}

/// Nearest j with j/p close to t.
std::uint64_t cycle_position(Turns128 t, std::uint32_t p) {
  const Turns128 hi = static_cast<Turns128>(top64(t)) * p;
  const Turns128 lo = (static_cast<Turns128>(static_cast<std::uint64_t>(t)) * p) >> 64;
  const Turns128 wide = hi + lo;  // t * p / 2^64
  return static_cast<std::uint64_t>(((wide + (static_cast<Turns128>(1) << 63)) >> 64) % p);
}

void require_dim(const ZeroEntropySystem& sys, std::size_t got, const char* what) {
  if (static_cast<int>(got) != sys.dim())
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has dimension " + std::to_string(got) +
                                                  ", system " + sys.describe() + " needs " +
                                                  std::to_string(sys.dim()));
}

}  // namespace

Point make_point(std::span<const double> coords) {
  Point p;
  for (const double c : coords) p.push_back(real_to_turns128(c));
  return p;
}

ZeroEntropySystem ZeroEntropySystem::rotation(std::vector<double> alpha) {
  if (alpha.empty()) throw Error(ErrorCode::InvalidArgument, "rotation needs a dimension >= 1");
  ZeroEntropySystem s;
  s.kind_ = Kind::Rotation;
  s.dim_ = static_cast<int>(alpha.size());
  s.shift_ = make_point(alpha);
  s.alpha_ = std::move(alpha);
  return s;
}

ZeroEntropySystem ZeroEntropySystem::unipotent(std::vector<std::vector<std::int64_t>> matrix,
                                               std::vector<double> translation) {
  const std::size_t d = matrix.size();
  if (d == 0 || translation.size() != d)
    throw Error(ErrorCode::InvalidArgument, "unipotent map needs a square matrix and matching translation");
  for (std::size_t i = 0; i < d; ++i) {
    if (matrix[i].size() != d) throw Error(ErrorCode::InvalidArgument, "matrix is not square");
    for (std::size_t j = 0; j < i; ++j)
      if (matrix[i][j] != 0) throw Error(ErrorCode::InvalidArgument, "matrix is not upper-triangular");
  }
  // (M - I)^d = 0 over the integers.
  std::vector<std::vector<mpz_class>> nil(d, std::vector<mpz_class>(d)), pw(d, std::vector<mpz_class>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      nil[i][j] = matrix[i][j] - (i == j ? 1 : 0);
      pw[i][j] = i == j ? 1 : 0;
    }
  for (std::size_t step = 0; step < d; ++step) {
    std::vector<std::vector<mpz_class>> next(d, std::vector<mpz_class>(d, 0));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t l = 0; l < d; ++l)
        for (std::size_t j = 0; j < d; ++j) next[i][j] += pw[i][l] * nil[l][j];
    pw = std::move(next);
  }
  for (const auto& row : pw)
    for (const auto& v : row)
      if (v != 0) throw Error(ErrorCode::InvalidArgument, "matrix is not unipotent");

  ZeroEntropySystem s;
  s.kind_ = Kind::UnipotentAffine;
  s.dim_ = static_cast<int>(d);
  s.shift_ = make_point(translation);
  s.alpha_ = std::move(translation);
  s.matrix_ = std::move(matrix);
  Matrix n(d, std::vector<Turns128>(d)), power(d, std::vector<Turns128>(d, 0));
  for (std::size_t i = 0; i < d; ++i) {
    power[i][i] = 1;
    for (std::size_t j = 0; j < d; ++j) n[i][j] = wrap(s.matrix_[i][j] - (i == j ? 1 : 0));
  }
  for (std::size_t k = 0; k < d; ++k) {
    s.nil_powers_.push_back(power);
    Matrix next(d, std::vector<Turns128>(d, 0));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t l = 0; l < d; ++l)
        for (std::size_t j = 0; j < d; ++j) next[i][j] += power[i][l] * n[l][j];
    power = std::move(next);
  }
  return s;
}

ZeroEntropySystem ZeroEntropySystem::periodic(std::uint32_t p) {
  if (p == 0) throw Error(ErrorCode::InvalidArgument, "cycle length must be positive");
  ZeroEntropySystem s;
  s.kind_ = Kind::PeriodicCycle;
  s.dim_ = 1;
  s.period_ = p;
  return s;
}

ZeroEntropySystem ZeroEntropySystem::from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    ZeroEntropySystem s;
    if (kind == "rotation") {
      s = rotation(j.at("alpha").get<std::vector<double>>());
    } else if (kind == "unipotent") {
      s = unipotent(j.at("matrix").get<std::vector<std::vector<std::int64_t>>>(),
                    j.at("translation").get<std::vector<double>>());
    } else if (kind == "cycle") {
      s = periodic(j.at("p").get<std::uint32_t>());
    } else {
      throw Error(ErrorCode::ParseError, "unknown system kind '" + kind + "'");
    }
    if (j.contains("d") && j.at("d").get<int>() != s.dim())
      throw Error(ErrorCode::DimensionMismatch, "declared d disagrees with the system data");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("system catalog: ") + e.what());
  }
}

nlohmann::json ZeroEntropySystem::to_json() const {
  switch (kind_) {
    case Kind::Rotation: return {{"kind", "rotation"}, {"d", dim_}, {"alpha", alpha_}};
    case Kind::UnipotentAffine:
      return {{"kind", "unipotent"}, {"d", dim_}, {"matrix", matrix_}, {"translation", alpha_}};
    case Kind::PeriodicCycle: return {{"kind", "cycle"}, {"d", 1}, {"p", period_}};
  }
  return {};
}

std::string ZeroEntropySystem::describe() const {
  std::ostringstream os;
  os.precision(17);
  const auto vec = [&os](const std::vector<double>& v) {
    os << '(';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ')';
  };
  switch (kind_) {
    case Kind::Rotation:
      os << "Rotation(" << dim_ << ", ";
      vec(alpha_);
      os << ')';
      break;
    case Kind::UnipotentAffine:
      os << "UnipotentAffine(" << dim_ << ", b=";
      vec(alpha_);
      os << ')';
      break;
    case Kind::PeriodicCycle: os << "PeriodicCycle(" << period_ << ')'; break;
  }
  return os.str();
}

Point ZeroEntropySystem::cycle_point(std::int64_t position) const {
  if (kind_ != Kind::PeriodicCycle) throw Error(ErrorCode::InvalidArgument, "not a cycle");
  const auto p = static_cast<std::int64_t>(period_);
  const auto j = static_cast<std::uint64_t>(((position % p) + p) % p);
  // Nearest 2^-128 turn to j/p.
  const Turns128 one_over = ~static_cast<Turns128>(0) / period_;
  return {one_over * j + j / 2};
}

Point ZeroEntropySystem::step(const Point& x) const {
  require_dim(*this, x.size(), "point");
  switch (kind_) {
    case Kind::Rotation: {
      Point y = x;
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += shift_[i];
      return y;
    }
    case Kind::UnipotentAffine: {
      Point y(x.size(), 0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = shift_[i];
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += wrap(matrix_[i][j]) * x[j];
      }
      return y;
    }
    case Kind::PeriodicCycle: return cycle_point(static_cast<std::int64_t>(cycle_position(x[0], period_)) + 1);
  }
  return x;
}

Point ZeroEntropySystem::iterate(const Point& x, std::uint64_t n) const {
  require_dim(*this, x.size(), "point");
  switch (kind_) {
    case Kind::Rotation: {
      Point y = x;
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += shift_[i] * static_cast<Turns128>(n);
      return y;
    }
    case Kind::UnipotentAffine: {
      // M^n = sum_k C(n,k) N^k and sum_{j<n} M^j = sum_k C(n,k+1) N^k.
      Point y(x.size(), 0);
      for (std::size_t k = 0; k < nil_powers_.size(); ++k) {
        const Turns128 cx = binomial_mod(n, static_cast<unsigned>(k));
        const Turns128 cb = binomial_mod(n, static_cast<unsigned>(k + 1));
        if (cx == 0 && cb == 0) continue;
        const Point nx = apply(nil_powers_[k], x);
        const Point nb = apply(nil_powers_[k], shift_);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += cx * nx[i] + cb * nb[i];
      }
      return y;
    }
    case Kind::PeriodicCycle:
      return cycle_point(static_cast<std::int64_t>((cycle_position(x[0], period_) + n % period_) % period_));
  }
  return x;
}

std::vector<ZeroEntropySystem> load_catalog(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  std::vector<ZeroEntropySystem> out;
  if (doc.is_array()) {
    for (const auto& j : doc) out.push_back(ZeroEntropySystem::from_json(j));
  } else {
    out.push_back(ZeroEntropySystem::from_json(doc));
  }
  return out;
}

UnitValue orbit_eval(const ZeroEntropySystem& sys, const Character& chi, const Point& x0,
                     std::uint64_t n) {
  require_dim(sys, chi.k.size(), "character");
  require_dim(sys, x0.size(), "point");
  if (sys.kind() == ZeroEntropySystem::Kind::PeriodicCycle) {
    const std::uint32_t p = sys.period();
    const std::uint64_t pos = (cycle_position(x0[0], p) + n % p) % p;
    const auto k = static_cast<std::int64_t>(((chi.k[0] % static_cast<std::int64_t>(p)) + p) % p);
    return UnitValue::root_of_unity(static_cast<std::int64_t>((static_cast<std::uint64_t>(k) * pos) % p), p);
  }
  const Point x = sys.iterate(x0, n);
  Turns128 t = 0;
  for (std::size_t i = 0; i < x.size(); ++i) t += wrap(chi.k[i]) * x[i];
  return round_turns(t);
}

std::vector<UnitValue> orbit_values(const ZeroEntropySystem& sys, const Character& chi,
                                    const Point& x0, std::uint64_t count) {
  require_dim(sys, chi.k.size(), "character");
  require_dim(sys, x0.size(), "point");
  std::vector<UnitValue> out(count);
#pragma omp parallel for schedule(static)
  for (std::int64_t n = 0; n < static_cast<std::int64_t>(count); ++n)
    out[n] = orbit_eval(sys, chi, x0, static_cast<std::uint64_t>(n));
  return out;
}

std::complex<double> sarnak_test(const SequenceSource& src, const ZeroEntropySystem& sys,
                                 const Character& chi, const Point& x0, std::uint64_t N) {
  if (N == 0) throw Error(ErrorCode::InvalidArgument, "N must be positive");
  const auto z = materialize(src, 0, N);
  const auto f = orbit_values(sys, chi, x0, N);
  return kernels::omp::product_sum(z, f) / static_cast<double>(N);
}

BlockSchedule BlockSchedule::triangular(std::size_t K) {
  BlockSchedule s;
  for (std::uint64_t k = 0; k <= K; ++k) s.b.push_back(k * (k + 1) / 2);
  return s;
}

BlockSchedule BlockSchedule::triangular_up_to(std::uint64_t total) {
  std::size_t K = 0;
  while ((K + 1) * (K + 2) / 2 <= total) ++K;
  return triangular(K);
}

BlockSchedule BlockSchedule::trivial(std::size_t K) {
  BlockSchedule s;
  for (std::uint64_t k = 0; k <= K; ++k) s.b.push_back(k);
  return s;
}

void BlockSchedule::validate(std::size_t burn_in, std::uint64_t gap_min) const {
  if (b.empty() || b[0] != 0) throw Error(ErrorCode::InvalidArgument, "schedule must start at b_0 = 0");
  for (std::size_t k = 1; k < b.size(); ++k) {
    if (b[k] <= b[k - 1])
      throw Error(ErrorCode::InvalidArgument, "schedule not strictly increasing at k = " + std::to_string(k));
    if (k >= burn_in + 2 && b[k] - b[k - 1] < b[k - 1] - b[k - 2])
      throw Error(ErrorCode::InvalidArgument, "schedule gaps decrease at k = " + std::to_string(k));
  }
  if (b.size() >= 2 && b.back() - b[b.size() - 2] < gap_min)
    throw Error(ErrorCode::InvalidArgument, "final schedule gap below " + std::to_string(gap_min));
}

std::vector<Point> random_points(const ZeroEntropySystem& sys, std::size_t K, std::uint64_t seed) {
  const CounterRng rng(derive_seed(seed, "ortho.points"));
  std::vector<Point> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    if (sys.kind() == ZeroEntropySystem::Kind::PeriodicCycle) {
      out[k] = sys.cycle_point(static_cast<std::int64_t>(rng.below(sys.period(), k)));
      continue;
    }
    for (int i = 0; i < sys.dim(); ++i) {
      const Turns128 hi = rng.bits(k, 2 * i), lo = rng.bits(k, 2 * i + 1);
      out[k].push_back((hi << 64) | lo);
    }
  }
  return out;
}

MomoReport momo_test(const SequenceSource& src, const ZeroEntropySystem& sys,
                     const Character& chi, const BlockSchedule& sched,
                     std::span<const Point> points, std::size_t K) {
  if (K == 0) throw Error(ErrorCode::InvalidArgument, "K must be positive");
  if (sched.blocks() < K)
    throw Error(ErrorCode::ScheduleTooShort, "schedule has " + std::to_string(sched.blocks()) +
                                                 " blocks, " + std::to_string(K) + " requested");
  if (points.size() < K)
    throw Error(ErrorCode::InvalidArgument, "need one block point per block");
  if (sched.b[0] != 0) throw Error(ErrorCode::InvalidArgument, "schedule must start at b_0 = 0");
  const std::span<const std::uint64_t> bounds(sched.b.data(), K + 1);
  const std::uint64_t length = bounds[K];
  const auto z = materialize(src, 0, length);
  std::vector<UnitValue> f(length);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(K); ++k)
    for (std::uint64_t n = bounds[k]; n < bounds[k + 1]; ++n)
      f[n] = orbit_eval(sys, chi, points[k], n - bounds[k]);

  MomoReport r;
  r.K = K;
  r.length = length;
  r.block_sums = kernels::omp::block_sums(z, f, bounds);
  const auto& bs = r.block_sums;
  const auto total = blocked_reduce(K, std::complex<double>(0), [&](std::uint64_t lo, std::uint64_t hi) {
    std::complex<double> acc = 0;
    for (std::uint64_t k = lo; k < hi; ++k) acc += bs[k];
    return acc;
  });
  const double strong = blocked_reduce(K, 0.0, [&](std::uint64_t lo, std::uint64_t hi) {
    double acc = 0;
    for (std::uint64_t k = lo; k < hi; ++k) acc += std::abs(bs[k]);
    return acc;
  });
  r.plain = total / static_cast<double>(length);
  r.strong = strong / static_cast<double>(length);
  if (r.strong < std::abs(r.plain) - 1e-12)
    throw std::logic_error("strong MOMO value below the plain value");
  return r;
}

}  // namespace chowla::ortho
