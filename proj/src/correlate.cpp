#include "chowla/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <set>
#include <string>

#include "chowla/kernels.hpp"
#include "chowla/parallel.hpp"

namespace chowla::correlate {

namespace {

using Complex = std::complex<double>;

void require_pattern(const Pattern& p, const std::optional<IndexBound>& idx) {
  if (!pattern_validate(p, idx))
    throw Error(ErrorCode::InvalidArgument, "invalid pattern " + p.to_string());
}

double exponent_weight(const Pattern& p) {
  double w = 0;
  for (const auto e : p.exponents) w += std::fabs(static_cast<double>(e));
  return w;
}

CorrelationReport finish(const Pattern& p, std::uint64_t N, std::span<const Complex> blocks,
                         std::span<const UnitValue> z, double phase_error,
                         std::span<const std::uint64_t> checkpoints) {
  CorrelationReport r;
  r.pattern = p;
  r.n_used = N;
  r.value = kernels::sum_blocks(blocks) / static_cast<double>(N);
  r.err_hint = 2 * std::numbers::pi * phase_error * exponent_weight(p);
  for (const std::uint64_t nk : checkpoints) {
    if (nk == 0 || nk > N) throw Error(ErrorCode::InvalidArgument, "checkpoint outside [1, N]");
    const std::uint64_t full = nk / kReduceBlock;
    Complex acc = kernels::sum_blocks(blocks.first(full));
    const std::uint64_t lo = full * kReduceBlock;
    if (lo < nk) acc += kernels::serial::correlation_sum(z.subspan(lo), p, nk - lo);
    r.running.emplace_back(nk, acc / static_cast<double>(nk));
  }
  return r;
}

std::int64_t reduce_mod(std::int64_t e, std::int64_t m) { return ((e % m) + m) % m; }

}  // namespace

CorrelationReport correlation_avg(std::span<const UnitValue> z, const Pattern& p,
                                  std::uint64_t N, double phase_error,
                                  std::span<const std::uint64_t> checkpoints) {
  require_pattern(p, std::nullopt);
  if (N == 0) throw Error(ErrorCode::InvalidArgument, "N must be positive");
  const auto blocks = kernels::omp::correlation_blocks(z, p, N);
  return finish(p, N, blocks, z, phase_error, checkpoints);
}

CorrelationReport correlation_avg(const SequenceSource& src, const Pattern& p, std::uint64_t N,
                                  std::span<const std::uint64_t> checkpoints) {
  require_pattern(p, src.declared_index());
  if (N == 0) throw Error(ErrorCode::InvalidArgument, "N must be positive");
  const auto z = materialize(src, 0, N + p.max_shift());
  return correlation_avg(z, p, N, src.phase_error_bound(), checkpoints);
}

double default_tolerance(std::uint64_t N) {
  return std::max(0.05, 5.0 / std::sqrt(static_cast<double>(std::max<std::uint64_t>(N, 1))));
}

std::vector<Pattern> enumerate_patterns(int max_shift, std::span<const std::int64_t> exp_set,
                                        const std::optional<IndexBound>& index,
                                        const EnumerationOptions& opts) {
  if (max_shift < 0 || max_shift > 62)
    throw Error(ErrorCode::InvalidArgument, "max_shift must lie in [0, 62]");
  const bool finite = index && index->is_finite();
  const std::int64_t m = finite ? index->m() : 0;
  const bool reduce = finite && opts.dedupe;

  std::vector<std::int64_t> exps;
  for (const auto e : exp_set) {
    const std::int64_t v = reduce ? reduce_mod(e, m) : e;
    if (std::find(exps.begin(), exps.end(), v) == exps.end()) exps.push_back(v);
  }
  const bool any_nonzero = std::any_of(exps.begin(), exps.end(), [&](std::int64_t e) {
    return finite ? e % m != 0 : e != 0;
  });
  if (!any_nonzero) throw Error(ErrorCode::InvalidArgument, "exponent set yields no valid pattern");

  std::vector<Pattern> out;
  std::set<std::vector<std::int64_t>> seen;
  const int slots = max_shift + 1;
  for (int r = 1; r <= slots; ++r) {
    // Increasing shift tuples of size r, lexicographic.
    std::vector<std::int64_t> shifts(r);
    for (int i = 0; i < r; ++i) shifts[i] = i;
    while (true) {
      if (!opts.canonical_base || shifts[0] == 0) {
        std::vector<std::size_t> digit(r, 0);
        while (true) {
          Pattern p;
          p.shifts = shifts;
          p.exponents.resize(r);
          for (int i = 0; i < r; ++i) p.exponents[i] = exps[digit[i]];
          if (pattern_validate(p, index)) {
            bool keep = true;
            if (reduce) {
              std::vector<std::int64_t> key = p.shifts, conj = p.shifts;
              for (const auto e : p.exponents) {
                key.push_back(e);
                conj.push_back(reduce_mod(-e, m));
              }
              keep = !seen.count(key) && !seen.count(conj);
              if (keep) seen.insert(std::move(key));
            }
            if (keep) {
              if (out.size() >= opts.pattern_cap)
                throw Error(ErrorCode::PatternExplosion,
                            "pattern enumeration exceeds the cap of " + std::to_string(opts.pattern_cap));
              out.push_back(std::move(p));
            }
          }
          int i = r - 1;
          while (i >= 0 && ++digit[i] == exps.size()) digit[i--] = 0;
          if (i < 0) break;
        }
      }
      int i = r - 1;
      while (i >= 0 && shifts[i] == slots - r + i) --i;
      if (i < 0) break;
      ++shifts[i];
      for (int j = i + 1; j < r; ++j) shifts[j] = shifts[j - 1] + 1;
    }
  }
  return out;
}

namespace {

std::vector<CorrelationReport> run_patterns(std::span<const UnitValue> z,
                                            const std::vector<Pattern>& patterns,
                                            std::uint64_t N, double phase_error) {
  std::vector<CorrelationReport> reports(patterns.size());
  const auto count = static_cast<std::int64_t>(patterns.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto blocks = kernels::serial::correlation_blocks(z, patterns[i], N);
    reports[i] = finish(patterns[i], N, blocks, z, phase_error, {});
  }
  return reports;
}

}  // namespace

BatteryResult chowla_battery(const SequenceSource& src, int max_shift,
                             std::span<const std::int64_t> exp_set, std::uint64_t N, double tol,
                             const EnumerationOptions& opts) {
  if (N == 0) throw Error(ErrorCode::InvalidArgument, "N must be positive");
  const auto patterns = enumerate_patterns(max_shift, exp_set, src.declared_index(), opts);
  const auto z = materialize(src, 0, N + max_shift);
  BatteryResult out;
  out.tol = tol;
  out.reports = run_patterns(z, patterns, N, src.phase_error_bound());
  double worst = -1;
  for (std::size_t i = 0; i < out.reports.size(); ++i) {
    const double mod = out.reports[i].modulus();
    if (mod > worst) {
      worst = mod;
      out.worst = i;
    }
    if (!(mod <= tol)) out.pass = false;
  }
  return out;
}

IndexEstimate estimate_index(const SequenceSource& src, std::uint64_t N, std::int64_t m_max,
                             double tol_phase, double density_cut) {
  if (N == 0) throw Error(ErrorCode::InvalidArgument, "N must be positive");
  if (m_max < 2) throw Error(ErrorCode::InvalidArgument, "m_max must be at least 2");
  require_length(src, N);
  const auto ms = static_cast<std::size_t>(m_max - 1);
  std::vector<std::uint64_t> off(ms, 0);
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(ms, 0);
#pragma omp for schedule(static)
    for (std::int64_t n = 0; n < static_cast<std::int64_t>(N); ++n) {
      const UnitValue x = src.at(static_cast<std::uint64_t>(n));
      if (x.is_zero()) continue;
      for (std::size_t j = 0; j < ms; ++j) {
        const std::uint64_t m = j + 2;
        double dist;
        if (x.is_rational()) {
          const std::uint64_t den = x.denominator();
          const std::uint64_t r = static_cast<std::uint64_t>(
              (static_cast<unsigned __int128>(x.numerator()) * m) % den);
          dist = static_cast<double>(std::min(r, den - r)) / (static_cast<double>(den) * m);
        } else {
          const std::uint64_t r = x.turns() * m;
          dist = std::ldexp(static_cast<double>(std::min(r, -r)), -64) / static_cast<double>(m);
        }
        if (dist > tol_phase) ++local[j];
      }
    }
#pragma omp critical
    for (std::size_t j = 0; j < ms; ++j) off[j] += local[j];
  }
  IndexEstimate e;
  e.density_cut = density_cut;
  e.tol_phase = tol_phase;
  e.bound = IndexBound::exceeds_tested(m_max);
  bool found = false;
  for (std::size_t j = 0; j < ms; ++j) {
    e.density.push_back(static_cast<double>(off[j]) / static_cast<double>(N));
    if (!found && e.density.back() <= density_cut) {
      e.bound = IndexBound::finite(static_cast<std::int64_t>(j + 2));
      found = true;
    }
  }
  return e;
}

std::vector<CorrelationReport> relation_scan(const SequenceSource& src, int max_shift,
                                             int exp_bound, std::uint64_t N, double threshold,
                                             std::uint64_t pattern_cap) {
  if (N == 0) throw Error(ErrorCode::InvalidArgument, "N must be positive");
  if (exp_bound < 1) throw Error(ErrorCode::InvalidArgument, "exp_bound must be positive");
  std::vector<std::int64_t> exps;
  for (int e = -exp_bound; e <= exp_bound; ++e)
    if (e != 0) exps.push_back(e);
  EnumerationOptions opts;
  opts.pattern_cap = pattern_cap;
  opts.dedupe = false;
  const auto patterns = enumerate_patterns(max_shift, exps, src.declared_index(), opts);
  const auto z = materialize(src, 0, N + max_shift);
  std::vector<CorrelationReport> flagged;
  for (auto& r : run_patterns(z, patterns, N, src.phase_error_bound()))
    if (r.modulus() >= 1.0 - threshold) flagged.push_back(std::move(r));
  return flagged;
}

void write_reports_csv(std::ostream& os, std::span<const CorrelationReport> reports) {
  os << "pattern,N,re,im,modulus\n";
  char buf[128];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, ",%llu,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.n_used), r.value.real(), r.value.imag(),
                  r.modulus());
    os << '"' << r.pattern.to_string() << '"' << buf;
  }
}

nlohmann::json to_json(const CorrelationReport& r) {
  nlohmann::json j;
  j["pattern"] = {{"shifts", r.pattern.shifts}, {"exponents", r.pattern.exponents}};
  j["N"] = r.n_used;
  j["re"] = r.value.real();
  j["im"] = r.value.imag();
  j["modulus"] = r.modulus();
  j["err_hint"] = r.err_hint;
  if (!r.running.empty()) {
    auto& run = j["running"] = nlohmann::json::array();
    for (const auto& [nk, v] : r.running) run.push_back({{"N", nk}, {"re", v.real()}, {"im", v.imag()}});
  }
  return j;
}

nlohmann::json to_json(const BatteryResult& b) {
  nlohmann::json j;
  j["tol"] = b.tol;
  j["verdict"] = b.pass ? "pass" : "fail";
  j["patterns"] = b.reports.size();
  if (!b.reports.empty()) j["worst"] = to_json(b.worst_offender());
  auto& all = j["reports"] = nlohmann::json::array();
  for (const auto& r : b.reports) all.push_back(to_json(r));
  return j;
}

nlohmann::json to_json(const IndexEstimate& e) {
  nlohmann::json j;
  j["index"] = e.bound.to_string();
  j["density_cut"] = e.density_cut;
  j["tol_phase"] = e.tol_phase;
  auto& d = j["density"] = nlohmann::json::array();
  for (std::size_t i = 0; i < e.density.size(); ++i) d.push_back({{"m", i + 2}, {"d", e.density[i]}});
  return j;
}

}  // namespace chowla::correlate
