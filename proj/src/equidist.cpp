#include "chowla/equidist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "chowla/kernels.hpp"
#include "chowla/turns.hpp"

namespace chowla::equidist {

double star_discrepancy(std::span<const double> points) {
  if (points.empty()) throw Error(ErrorCode::InvalidArgument, "star discrepancy needs at least one point");
  std::vector<double> x(points.begin(), points.end());
  for (const double v : x)
    if (!(v >= 0.0 && v < 1.0))
      throw Error(ErrorCode::PointOutOfRange, "point " + std::to_string(v) + " outside [0,1)");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double above = static_cast<double>(i + 1) / n - x[i];
    const double below = x[i] - static_cast<double>(i) / n;
    d = std::max({d, above, below});
  }
  return d;
}

std::complex<double> weyl_sum(const SequenceSource& src, std::span<const double> poly,
                              std::uint64_t N) {
  if (N == 0) throw Error(ErrorCode::InvalidArgument, "N must be positive");
  std::vector<Turns128> c;
  for (const double v : poly) c.push_back(real_to_turns128(v));
  const auto z = materialize(src, 0, N);
  std::vector<UnitValue> f(N);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(N); ++i) {
    const auto n = static_cast<Turns128>(i);
    Turns128 acc = 0;
    for (std::size_t j = c.size(); j-- > 0;) acc = acc * n + c[j];
    f[i] = UnitValue::from_turns(top64(acc) + static_cast<std::uint64_t>((acc >> 63) & 1));
  }
  return kernels::omp::product_sum(z, f) / static_cast<double>(N);
}

// ---------------------------------------------------------------------------
// Cylinders and support measures

std::uint64_t CylinderSpec::support_code() const {
  std::uint64_t w = 0;
  if (!letters.empty()) {
    for (const auto& x : letters) w = 2 * w + (x.is_zero() ? 0 : 1);
  } else {
    for (const auto b : bins) w = 2 * w + (b == 0 ? 0 : 1);
  }
  return w;
}

std::string CylinderSpec::to_string(std::optional<std::uint32_t> m) const {
  std::string s = "[";
  for (std::size_t j = 0; j < depth(); ++j) {
    if (j) s += ',';
    if (!letters.empty()) {
      const auto& x = letters[j];
      if (x.is_zero()) {
        s += '0';
      } else if (m) {
        const auto k = x.snap_to_root(*m, 0x1p-20);
        s += k ? std::to_string(*k) + "/" + std::to_string(*m) : chowla::to_string(x);
      } else {
        s += chowla::to_string(x);
      }
    } else {
      s += bins[j] == 0 ? std::string("0") : "bin" + std::to_string(bins[j] - 1);
    }
  }
  return s + "]";
}

namespace {

void check_depth(int k_max) {
  if (k_max < 0 || k_max > 24) throw Error(ErrorCode::InvalidArgument, "support depth must lie in [0, 24]");
}

}  // namespace

SupportMeasure SupportMeasure::point_mass_ones(int k_max) {
  check_depth(k_max);
  SupportMeasure s;
  for (int k = 0; k <= k_max; ++k) {
    std::vector<mpq_class> row(std::size_t{1} << k, mpq_class(0));
    row.back() = 1;
    s.table_.push_back(std::move(row));
  }
  return s;
}

SupportMeasure SupportMeasure::bernoulli(const mpq_class& p, int k_max) {
  check_depth(k_max);
  if (p < 0 || p > 1) throw Error(ErrorCode::InvalidArgument, "Bernoulli parameter outside [0,1]");
  SupportMeasure s;
  s.table_.push_back({mpq_class(1)});
  for (int k = 1; k <= k_max; ++k) {
    const auto& prev = s.table_.back();
    std::vector<mpq_class> row(prev.size() * 2);
    for (std::size_t w = 0; w < prev.size(); ++w) {
      row[2 * w] = prev[w] * (1 - p);
      row[2 * w + 1] = prev[w] * p;
    }
    s.table_.push_back(std::move(row));
  }
  return s;
}

SupportMeasure SupportMeasure::from_support(std::span<const std::uint8_t> bits, int k_max) {
  check_depth(k_max);
  if (bits.size() < static_cast<std::size_t>(std::max(k_max, 1)))
    throw Error(ErrorCode::SourceTooShort, "support sequence shorter than the depth");
  const std::uint64_t windows = bits.size() - std::max(k_max, 1) + 1;
  std::vector<std::uint32_t> codes(bits.begin(), bits.end());
  SupportMeasure s;
  s.table_.push_back({mpq_class(1)});
  for (int k = 1; k <= k_max; ++k) {
    const auto counts = kernels::omp::cylinder_counts(codes, k, 2, windows);
    std::vector<mpq_class> row(counts.size());
    for (std::size_t w = 0; w < counts.size(); ++w) {
      row[w] = mpq_class(mpz_class(counts[w]), mpz_class(windows));
      row[w].canonicalize();
    }
    s.table_.push_back(std::move(row));
  }
  return s;
}

SupportMeasure SupportMeasure::from_table(const std::vector<std::vector<double>>& table) {
  if (table.empty()) throw Error(ErrorCode::InvalidArgument, "empty support table");
  check_depth(static_cast<int>(table.size()) - 1);
  SupportMeasure s;
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (table[k].size() != (std::size_t{1} << k))
      throw Error(ErrorCode::InvalidArgument, "support table depth " + std::to_string(k) + " needs " +
                                                  std::to_string(1u << k) + " entries");
    std::vector<mpq_class> row;
    for (const double v : table[k]) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, "support probability outside [0,1]");
      row.emplace_back(v);
    }
    s.table_.push_back(std::move(row));
  }
  if (std::fabs(s.table_[0][0].get_d() - 1.0) > 0x1p-30 || s.consistency_error() > 0x1p-30)
    throw Error(ErrorCode::InvalidArgument, "support table is not consistent");
  return s;
}

const mpq_class& SupportMeasure::prob(std::uint64_t word, int k) const {
  if (k < 0 || k > k_max()) throw Error(ErrorCode::InvalidArgument, "support measure depth exceeded");
  return table_[k].at(word);
}

double SupportMeasure::consistency_error() const {
  double worst = 0;
  for (int k = 0; k < k_max(); ++k)
    for (std::size_t w = 0; w < table_[k].size(); ++w) {
      const mpq_class gap = table_[k][w] - table_[k + 1][2 * w] - table_[k + 1][2 * w + 1];
      worst = std::max(worst, std::fabs(gap.get_d()));
    }
  return worst;
}

mpq_class hat_measure_exact(const CylinderSpec& b, const SupportMeasure& nu, std::uint32_t m) {
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "m must be positive");
  const int k = static_cast<int>(b.depth());
  std::size_t nonzero = 0;
  if (!b.letters.empty()) {
    for (const auto& x : b.letters) {
      if (x.is_zero()) continue;
      const bool in_um = x.is_rational()
                             ? (static_cast<unsigned __int128>(x.numerator()) * m) % x.denominator() == 0
                             : x.numerator() * m == 0;
      if (!in_um) throw Error(ErrorCode::LetterNotInUm, "letter " + to_string(x) + " is not in U(" +
                                                            std::to_string(m) + ")");
      ++nonzero;
    }
  } else {
    for (const auto bin : b.bins) {
      if (bin > m) throw Error(ErrorCode::LetterNotInUm, "bin " + std::to_string(bin) + " out of range");
      nonzero += bin != 0;
    }
  }
  mpz_class den;
  mpz_ui_pow_ui(den.get_mpz_t(), m, nonzero);
  mpq_class out = nu.prob(b.support_code(), k) / mpq_class(den);
  out.canonicalize();
  return out;
}

double hat_measure(const CylinderSpec& b, const SupportMeasure& nu, std::uint32_t m) {
  return hat_measure_exact(b, nu, m).get_d();
}

// ---------------------------------------------------------------------------
// Genericity

GenericityReport genericity_test(const SequenceSource& src, int k_max, std::uint64_t N,
                                 double tol, const GenericityOptions& opts) {
  if (k_max < 1) throw Error(ErrorCode::InvalidArgument, "k_max must be at least 1");
  if (N < static_cast<std::uint64_t>(k_max))
    throw Error(ErrorCode::InvalidArgument, "N must be at least k_max");
  const bool circle = !opts.m.has_value();
  const std::uint32_t letters = circle ? opts.circle_bins : *opts.m;
  if (letters == 0) throw Error(ErrorCode::InvalidArgument, "alphabet size must be positive");
  const std::uint32_t base = letters + 1;
  const std::uint64_t cells = kernels::cell_count(base, k_max, opts.cylinder_cap);
  if (cells == 0)
    throw Error(ErrorCode::CylinderExplosion, std::to_string(base) + "^" + std::to_string(k_max) +
                                                   " cylinders exceed the cap of " +
                                                   std::to_string(opts.cylinder_cap));

  const auto z = materialize(src, 0, N);
  std::vector<std::uint32_t> codes(N);
  std::vector<std::uint8_t> bits(N), rejected(N, 0);
  std::uint64_t n_rejected = 0;
#pragma omp parallel for schedule(static) reduction(+ : n_rejected)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(N); ++i) {
    const UnitValue& x = z[i];
    if (x.is_zero()) {
      codes[i] = 0;
      bits[i] = 0;
      continue;
    }
    bits[i] = 1;
    if (circle) {
      const auto wide = static_cast<unsigned __int128>(x.turns()) * letters;
      codes[i] = 1 + static_cast<std::uint32_t>(wide >> 64);
    } else if (const auto k = x.snap_to_root(letters, opts.tol_phase)) {
      codes[i] = 1 + *k;
    } else {
      codes[i] = 0;
      rejected[i] = 1;
      ++n_rejected;
    }
  }
  GenericityReport r;
  r.k_max = k_max;
  r.N = N;
  r.tol = tol;
  r.windows = N - k_max + 1;
  r.rejected_density = static_cast<double>(n_rejected) / static_cast<double>(N);
  if (r.rejected_density > opts.rejection_cut)
    throw Error(ErrorCode::RejectionDensityExceeded,
                "density " + std::to_string(r.rejected_density) + " of values off U(" +
                    std::to_string(letters) + ") exceeds " + std::to_string(opts.rejection_cut));

  auto counts = kernels::omp::cylinder_counts(codes, k_max, base, r.windows);
  if (n_rejected > 0) {
    std::vector<std::uint8_t> hit(r.windows, 0);
    for (std::uint64_t i = 0; i < N; ++i) {
      if (!rejected[i]) continue;
      const std::uint64_t lo = i + 1 >= static_cast<std::uint64_t>(k_max) ? i + 1 - k_max : 0;
      for (std::uint64_t n = lo; n <= i && n < r.windows; ++n) hit[n] = 1;
    }
    for (std::uint64_t n = 0; n < r.windows; ++n) {
      if (!hit[n]) continue;
      std::uint64_t c = 0;
      for (int j = 0; j < k_max; ++j) c = c * base + codes[n + j];
      --counts[c];
    }
  }

  const SupportMeasure nu = opts.nu ? *opts.nu : SupportMeasure::from_support(bits, k_max);
  r.rows.resize(cells);
  double worst = 0;
  for (std::uint64_t c = 0; c < cells; ++c) {
    CylinderSpec spec;
    std::uint64_t rest = c;
    std::vector<std::uint32_t> digits(k_max);
    for (int j = k_max; j-- > 0;) {
      digits[j] = static_cast<std::uint32_t>(rest % base);
      rest /= base;
    }
    if (circle) {
      spec.bins = digits;
    } else {
      for (const auto d : digits)
        spec.letters.push_back(d == 0 ? UnitValue::zero() : UnitValue::root_of_unity(d - 1, letters));
    }
    CylinderRow& row = r.rows[c];
    row.code = c;
    row.label = spec.to_string(circle ? std::nullopt : std::optional<std::uint32_t>(letters));
    row.empirical = static_cast<double>(counts[c]) / static_cast<double>(r.windows);
    row.expected = hat_measure(spec, nu, letters);
    worst = std::max(worst, std::fabs(row.deviation()));
  }
  r.max_deviation = worst;
  r.pass = worst <= tol;
  return r;
}

void write_genericity_csv(std::ostream& os, const GenericityReport& r) {
  os << "cylinder,empirical,expected,deviation\n";
  char buf[96];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", row.empirical, row.expected, row.deviation());
    os << '"' << row.label << '"' << buf;
  }
}

nlohmann::json to_json(const GenericityReport& r) {
  nlohmann::json j;
  j["k_max"] = r.k_max;
  j["N"] = r.N;
  j["windows"] = r.windows;
  j["tol"] = r.tol;
  j["rejected_density"] = r.rejected_density;
  j["max_deviation"] = r.max_deviation;
  j["verdict"] = r.pass ? "pass" : "fail";
  auto& rows = j["table"] = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"cylinder", row.label}, {"empirical", row.empirical}, {"expected", row.expected},
                    {"deviation", row.deviation()}});
  return j;
}

}  // namespace chowla::equidist
