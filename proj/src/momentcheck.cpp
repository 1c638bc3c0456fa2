#include "chowla/momentcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "chowla/kernels.hpp"
#include "chowla/rng.hpp"

namespace chowla::momentcheck {

// ---------------------------------------------------------------------------
// CycloSum

namespace {

using Poly = std::vector<mpz_class>;

Poly poly_divide_exact(Poly num, const Poly& den) {
  // den is monic.
  const std::size_t dn = den.size() - 1;
  if (num.size() < den.size()) return {mpz_class(0)};
  Poly q(num.size() - dn, 0);
  for (std::size_t i = num.size(); i-- > dn;) {
    const mpz_class c = num[i];
    q[i - dn] = c;
    if (c == 0) continue;
    for (std::size_t j = 0; j <= dn; ++j) num[i - dn + j] -= c * den[j];
  }
  return q;
}

std::uint32_t lcm32(std::uint32_t a, std::uint32_t b) { return std::lcm(a, b); }

CycloSum lift(const CycloSum& x, std::uint32_t m) {
  if (x.m() == m) return x;
  CycloSum y(m);
  const std::uint32_t step = m / x.m();
  for (std::size_t j = 0; j < x.coeffs().size(); ++j) y[j * step] += x.coeffs()[j];
  return y;
}

}  // namespace

std::vector<mpz_class> cyclotomic(std::uint32_t m) {
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "cyclotomic index must be positive");
  Poly num(m + 1, 0);
  num[0] = -1;
  num[m] = 1;
  for (std::uint32_t d = 1; d < m; ++d)
    if (m % d == 0) num = poly_divide_exact(num, cyclotomic(d));
  return num;
}

CycloSum::CycloSum(std::uint32_t m) : m_(m), c_(m, mpq_class(0)) {
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "CycloSum needs m >= 1");
}

CycloSum CycloSum::rational(const mpq_class& q, std::uint32_t m) {
  CycloSum s(m);
  s.c_[0] = q;
  return s;
}

std::vector<mpq_class> CycloSum::reduced() const {
  const Poly phi = cyclotomic(m_);
  const std::size_t deg = phi.size() - 1;
  std::vector<mpq_class> r = c_;
  for (std::size_t i = r.size(); i-- > deg;) {
    const mpq_class c = r[i];
    if (c == 0) continue;
    for (std::size_t j = 0; j <= deg; ++j) r[i - deg + j] -= c * mpq_class(phi[j]);
  }
  r.resize(deg);
  return r;
}

bool CycloSum::is_zero() const {
  const auto r = reduced();
  return std::all_of(r.begin(), r.end(), [](const mpq_class& c) { return c == 0; });
}

std::optional<mpq_class> CycloSum::as_rational() const {
  const auto r = reduced();
  for (std::size_t j = 1; j < r.size(); ++j)
    if (r[j] != 0) return std::nullopt;
  return r.empty() ? mpq_class(0) : r[0];
}

std::complex<double> CycloSum::value() const {
  std::complex<double> v = 0;
  for (std::size_t j = 0; j < c_.size(); ++j)
    if (c_[j] != 0) v += c_[j].get_d() * UnitValue::root_of_unity(static_cast<std::int64_t>(j), m_).value();
  return v;
}

std::string CycloSum::to_string() const {
  if (const auto q = as_rational()) return q->get_str();
  std::ostringstream os;
  bool first = true;
  for (std::size_t j = 0; j < c_.size(); ++j) {
    if (c_[j] == 0) continue;
    os << (first ? "" : " + ") << c_[j].get_str() << "*e(" << j << "/" << m_ << ")";
    first = false;
  }
  return os.str();
}

CycloSum operator+(const CycloSum& a, const CycloSum& b) {
  const std::uint32_t m = lcm32(a.m(), b.m());
  CycloSum x = lift(a, m);
  const CycloSum y = lift(b, m);
  for (std::uint32_t j = 0; j < m; ++j) x[j] += y.coeffs()[j];
  return x;
}

CycloSum operator-(const CycloSum& a, const CycloSum& b) {
  const std::uint32_t m = lcm32(a.m(), b.m());
  CycloSum x = lift(a, m);
  const CycloSum y = lift(b, m);
  for (std::uint32_t j = 0; j < m; ++j) x[j] -= y.coeffs()[j];
  return x;
}

CycloSum operator*(const CycloSum& a, const CycloSum& b) {
  const std::uint32_t m = lcm32(a.m(), b.m());
  const CycloSum x = lift(a, m), y = lift(b, m);
  CycloSum z(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    if (x.coeffs()[i] == 0) continue;
    for (std::uint32_t j = 0; j < m; ++j)
      if (y.coeffs()[j] != 0) z[(i + j) % m] += x.coeffs()[i] * y.coeffs()[j];
  }
  return z;
}

// ---------------------------------------------------------------------------
// Trees

std::vector<std::uint32_t> ColoredTree::word(int level, std::size_t v) const {
  std::vector<std::uint32_t> w(level);
  for (int k = level; k > 0; --k) {
    const TreeVertex& t = levels.at(k).at(v);
    w[k - 1] = t.symbol;
    v = static_cast<std::size_t>(t.parent);
  }
  return w;
}

std::vector<int> ColoredTree::branch_type(int level, std::size_t v) const {
  std::vector<int> colors;
  for (int k = level; k >= l && k > 0; --k) {
    const TreeVertex& t = levels.at(k).at(v);
    colors.push_back(t.color);
    v = static_cast<std::size_t>(t.parent);
  }
  std::reverse(colors.begin(), colors.end());
  return colors;
}

std::size_t ColoredTree::node_count() const {
  std::size_t n = 0;
  for (const auto& lv : levels) n += lv.size();
  return n;
}

ColoredTree build_tree(const gen::BlockMap& bm, int depth, std::size_t node_cap) {
  bm.validate();
  if (depth < bm.l) throw Error(ErrorCode::InvalidArgument, "tree depth must be at least l");
  ColoredTree t;
  t.alphabet = bm.alphabet;
  t.l = bm.l;
  t.m = bm.m;
  t.depth = depth;
  t.levels.push_back({TreeVertex{}});
  const auto A = static_cast<std::uint32_t>(bm.symbols());
  std::size_t nodes = 1;
  std::vector<std::uint32_t> window(bm.l);
  for (int k = 0; k < depth; ++k) {
    std::vector<TreeVertex> next;
    const auto& cur = t.levels[k];
    for (std::size_t v = 0; v < cur.size(); ++v) {
      if (k < bm.l - 1) {
        for (std::uint32_t a = 0; a < A; ++a) next.push_back(TreeVertex{a, static_cast<std::int64_t>(v), kBlack});
      } else {
        // The last l-1 symbols of this vertex followed by the candidate.
        std::size_t u = v;
        for (int j = bm.l - 2; j >= 0; --j) {
          const TreeVertex& tv = t.levels[k - (bm.l - 2 - j)][u];
          window[j] = tv.symbol;
          u = static_cast<std::size_t>(tv.parent);
        }
        for (std::uint32_t a = 0; a < A; ++a) {
          window[bm.l - 1] = a;
          const auto root = bm.root_index(bm.word_index(window));
          if (root) next.push_back(TreeVertex{a, static_cast<std::int64_t>(v), static_cast<int>(*root)});
        }
      }
      if (nodes + next.size() > node_cap)
        throw Error(ErrorCode::NodeCapExceeded, "tree exceeds " + std::to_string(node_cap) + " vertices");
    }
    nodes += next.size();
    t.levels.push_back(std::move(next));
  }
  return t;
}

HomogeneityReport homogeneity_check(const ColoredTree& tree, int depth) {
  if (depth > tree.depth) throw Error(ErrorCode::InvalidArgument, "tree built to a smaller depth");
  HomogeneityReport r;
  for (int k = std::max(tree.l, 1); k <= depth; ++k) {
    LevelTypes lt;
    lt.level = k;
    const int len = k - tree.l + 1;
    const std::uint64_t cells = kernels::cell_count(tree.m, len, 1u << 24);
    if (cells == 0) throw Error(ErrorCode::NodeCapExceeded, "too many branch types at level " + std::to_string(k));
    lt.counts.assign(cells, 0);
    for (std::size_t v = 0; v < tree.levels[k].size(); ++v) {
      std::uint64_t code = 0;
      for (const int c : tree.branch_type(k, v)) code = code * tree.m + static_cast<std::uint64_t>(c);
      ++lt.counts[code];
      ++lt.branches;
    }
    if (lt.branches > 0)
      lt.homogeneous = std::all_of(lt.counts.begin(), lt.counts.end(),
                                   [&](std::uint64_t c) { return c == lt.counts.front() && c > 0; });
    r.homogeneous = r.homogeneous && lt.homogeneous;
    r.levels.push_back(std::move(lt));
  }
  return r;
}

nlohmann::json to_json(const ColoredTree& tree) {
  nlohmann::json j;
  j["alphabet"] = tree.alphabet;
  j["l"] = tree.l;
  j["m"] = tree.m;
  j["depth"] = tree.depth;
  auto& levels = j["levels"] = nlohmann::json::array();
  for (const auto& lv : tree.levels) {
    auto arr = nlohmann::json::array();
    for (const auto& v : lv) {
      nlohmann::json e{{"symbol", tree.alphabet.empty() ? std::string() : tree.alphabet[v.symbol]},
                       {"parent", v.parent}};
      e["color"] = v.color == kBlack ? nlohmann::json("black") : nlohmann::json(v.color);
      arr.push_back(std::move(e));
    }
    levels.push_back(std::move(arr));
  }
  levels[0][0]["symbol"] = "root";
  return j;
}

nlohmann::json to_json(const HomogeneityReport& r, std::uint32_t m, int l) {
  nlohmann::json j;
  j["homogeneous"] = r.homogeneous;
  auto& levels = j["levels"] = nlohmann::json::array();
  for (const auto& lt : r.levels) {
    nlohmann::json e{{"level", lt.level}, {"branches", lt.branches}, {"homogeneous", lt.homogeneous}};
    auto& types = e["types"] = nlohmann::json::object();
    const int len = lt.level - l + 1;
    for (std::uint64_t code = 0; code < lt.counts.size(); ++code) {
      std::string label;
      std::uint64_t rest = code;
      for (int i = 0; i < len; ++i) {
        label = std::to_string(rest % m) + (label.empty() ? "" : ",") + label;
        rest /= m;
      }
      types[label] = lt.counts[code];
    }
    levels.push_back(std::move(e));
  }
  return j;
}

void write_dot(std::ostream& os, const ColoredTree& tree) {
  static const char* palette[] = {"green", "red", "blue", "orange", "purple", "brown", "cyan", "magenta"};
  os << "digraph T {\n  node [shape=circle, fontsize=10];\n  v0_0 [label=\"\"];\n";
  for (std::size_t k = 1; k < tree.levels.size(); ++k)
    for (std::size_t v = 0; v < tree.levels[k].size(); ++v) {
      const TreeVertex& t = tree.levels[k][v];
      os << "  v" << k << '_' << v << " [label=\"" << tree.alphabet[t.symbol] << "\"];\n";
      os << "  v" << k - 1 << '_' << t.parent << " -> v" << k << '_' << v << " [color="
         << (t.color == kBlack ? "black" : palette[t.color % 8]);
      if (t.color != kBlack) os << ", label=\"" << t.color << '/' << tree.m << '"';
      os << "];\n";
    }
  os << "}\n";
}

// ---------------------------------------------------------------------------
// Exact moments

namespace {

struct MomentSetup {
  std::uint32_t A = 0;
  std::uint32_t m = 1;
  int L = 0;
  std::vector<std::uint64_t> pow_a;   // A^j
  std::vector<int> classes;           // root index per table word, -1 for 0
  std::vector<std::uint64_t> w;       // integer weights, sum D
  mpz_class D;
  std::vector<std::int64_t> shifts, exps;
  bool narrow = true;                 // products fit in unsigned __int128
};

MomentSetup setup(const gen::BlockMap& bm, const Pattern& p, int word_cap) {
  bm.validate();
  if (p.shifts.empty() || p.shifts.size() != p.exponents.size() || p.shifts.front() < 0)
    throw Error(ErrorCode::InvalidArgument, "malformed pattern " + p.to_string());
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p.shifts[i] <= p.shifts[i - 1]) throw Error(ErrorCode::InvalidArgument, "shifts must increase");
  MomentSetup s;
  s.A = static_cast<std::uint32_t>(bm.symbols());
  s.m = bm.m;
  s.L = static_cast<int>(p.max_shift()) + bm.l;
  if (s.L > word_cap)
    throw Error(ErrorCode::WordCapExceeded, "words of length " + std::to_string(s.L) + " exceed the cap of " +
                                                std::to_string(word_cap));
  s.pow_a.assign(s.L + 1, 1);
  for (int j = 1; j <= s.L; ++j) s.pow_a[j] = s.pow_a[j - 1] * s.A;
  for (std::size_t i = 0; i < bm.words(); ++i) {
    const auto r = bm.root_index(i);
    s.classes.push_back(r ? static_cast<int>(*r) : -1);
  }
  mpq_class total = 0;
  for (const auto& x : bm.weights) total += x;
  mpz_class den = 1;
  std::vector<mpq_class> q;
  for (const auto& x : bm.weights) {
    mpq_class v = x / total;
    v.canonicalize();
    q.push_back(v);
    mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), v.get_den_mpz_t());
  }
  if (!den.fits_ulong_p()) throw Error(ErrorCode::InvalidArgument, "weight denominators too large");
  s.D = den;
  double log_max = 0;
  for (const auto& v : q) {
    const mpz_class wi = v.get_num() * (den / v.get_den());
    s.w.push_back(wi.get_ui());
    log_max = std::max(log_max, std::log2(std::max(1.0, wi.get_d())));
  }
  s.narrow = log_max * s.L + std::log2(static_cast<double>(s.pow_a[s.L])) < 120;
  s.shifts = p.shifts;
  for (const auto e : p.exponents) s.exps.push_back(((e % static_cast<std::int64_t>(s.m)) + s.m) % s.m);
  return s;
}

/// Class of the product over the pattern windows for one word, -1 if zero.
int word_class(const MomentSetup& s, std::uint64_t code, int l) {
  std::int64_t cls = 0;
  const std::uint64_t span = s.pow_a[l];
  for (std::size_t i = 0; i < s.shifts.size(); ++i) {
    const std::uint64_t idx = (code / s.pow_a[s.L - s.shifts[i] - l]) % span;
    const int c = s.classes[idx];
    if (c < 0) return -1;
    cls += s.exps[i] * c;
  }
  return static_cast<int>(cls % s.m);
}

template <class Acc>
void accumulate_range(const MomentSetup& s, int l, std::uint64_t lo, std::uint64_t hi,
                      std::vector<Acc>& acc) {
  std::vector<std::uint32_t> digits(s.L);
  for (std::uint64_t code = lo; code < hi; ++code) {
    const int cls = word_class(s, code, l);
    if (cls < 0) continue;
    Acc weight = 1;
    std::uint64_t rest = code;
    for (int j = 0; j < s.L; ++j) {
      const std::uint64_t wj = s.w[rest % s.A];
      rest /= s.A;
      if (wj == 0) {
        weight = 0;
        break;
      }
      weight *= wj;
    }
    acc[cls] += weight;
  }
}

CycloSum finish(const MomentSetup& s, const std::vector<mpz_class>& counts) {
  CycloSum out(s.m);
  mpz_class scale;
  mpz_pow_ui(scale.get_mpz_t(), s.D.get_mpz_t(), static_cast<unsigned long>(s.L));
  for (std::uint32_t j = 0; j < s.m; ++j) {
    out[j] = mpq_class(counts[j], scale);
    out[j].canonicalize();
  }
  return out;
}

mpz_class to_mpz(unsigned __int128 v) {
  mpz_class hi(static_cast<unsigned long>(v >> 64)), lo(static_cast<unsigned long>(v));
  return (hi << 64) + lo;
}

CycloSum moment_impl(const gen::BlockMap& bm, const Pattern& p, int word_cap, bool parallel) {
  const MomentSetup s = setup(bm, p, word_cap);
  const std::uint64_t total = s.pow_a[s.L];
  // Prefix partition: one chunk per leading symbol block.
  const std::uint64_t chunk = std::max<std::uint64_t>(1, total / std::min<std::uint64_t>(total, 256));
  const auto chunks = static_cast<std::int64_t>((total + chunk - 1) / chunk);
  std::vector<mpz_class> counts(s.m, 0);
  if (s.narrow) {
    std::vector<unsigned __int128> sum(s.m, 0);
#pragma omp parallel if (parallel)
    {
      std::vector<unsigned __int128> local(s.m, 0);
#pragma omp for schedule(dynamic)
      for (std::int64_t c = 0; c < chunks; ++c) {
        const std::uint64_t lo = static_cast<std::uint64_t>(c) * chunk;
        accumulate_range(s, bm.l, lo, std::min(total, lo + chunk), local);
      }
#pragma omp critical
      for (std::uint32_t j = 0; j < s.m; ++j) sum[j] += local[j];
    }
    for (std::uint32_t j = 0; j < s.m; ++j) counts[j] = to_mpz(sum[j]);
  } else {
#pragma omp parallel if (parallel)
    {
      std::vector<mpz_class> local(s.m, 0);
#pragma omp for schedule(dynamic)
      for (std::int64_t c = 0; c < chunks; ++c) {
        const std::uint64_t lo = static_cast<std::uint64_t>(c) * chunk;
        accumulate_range(s, bm.l, lo, std::min(total, lo + chunk), local);
      }
#pragma omp critical
      for (std::uint32_t j = 0; j < s.m; ++j) counts[j] += local[j];
    }
  }
  return finish(s, counts);
}

void check_pattern(const gen::BlockMap& bm, const Pattern& p) {
  if (!pattern_validate(p, IndexBound::finite(bm.m)))
    throw Error(ErrorCode::InvalidArgument,
                "invalid pattern " + p.to_string() + " for U(" + std::to_string(bm.m) + ")");
}

}  // namespace

CycloSum exact_moment(const gen::BlockMap& bm, const Pattern& p, int word_cap) {
  check_pattern(bm, p);
  return moment_impl(bm, p, word_cap, true);
}

namespace serial {
CycloSum exact_moment(const gen::BlockMap& bm, const Pattern& p, int word_cap) {
  check_pattern(bm, p);
  return moment_impl(bm, p, word_cap, false);
}
}  // namespace serial

std::vector<FactorCheck> IndependenceReport::violations() const {
  std::vector<FactorCheck> out;
  for (const auto& c : checks)
    if (!c.holds) out.push_back(c);
  return out;
}

IndependenceReport independence_factor_check(const gen::BlockMap& bm,
                                             std::span<const std::int64_t> shifts,
                                             bool use_modulus, int word_cap) {
  if (shifts.empty()) throw Error(ErrorCode::InvalidArgument, "no shifts given");
  IndependenceReport r;
  r.shifts.assign(shifts.begin(), shifts.end());
  r.use_modulus = use_modulus;
  const std::size_t k = shifts.size();
  const std::uint32_t m = bm.m;
  std::vector<std::int64_t> e(k, 0);
  while (true) {
    Pattern joint{r.shifts, e};
    FactorCheck fc;
    fc.exponents = e;
    fc.joint = moment_impl(bm, joint, word_cap, true);
    fc.product = CycloSum::rational(1);
    for (std::size_t s = 0; s < k; ++s)
      fc.product = fc.product * moment_impl(bm, Pattern{{r.shifts[s]}, {e[s]}}, word_cap, true);
    fc.holds = fc.joint == fc.product;
    r.independent = r.independent && fc.holds;
    r.checks.push_back(std::move(fc));
    if (use_modulus) break;
    std::size_t i = k;
    while (i-- > 0 && ++e[i] == static_cast<std::int64_t>(m)) e[i] = 0;
    if (i == static_cast<std::size_t>(-1)) break;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Monte-Carlo

McMoment mc_moment(const SequenceSource& src, const Pattern& p, std::uint64_t samples,
                   std::uint64_t runs, std::uint64_t seed) {
  if (!pattern_validate(p, std::nullopt)) throw Error(ErrorCode::InvalidArgument, "invalid pattern " + p.to_string());
  if (samples == 0 || runs == 0) throw Error(ErrorCode::InvalidArgument, "samples and runs must be positive");
  McMoment out;
  out.samples = samples;
  out.runs = runs;
  const std::uint64_t span = samples + static_cast<std::uint64_t>(p.max_shift());
  std::vector<SourcePtr> draws(runs);
  try {
    const std::uint64_t base = derive_seed(seed, "momentcheck.mc");
    for (std::uint64_t r = 0; r < runs; ++r) draws[r] = src.reseeded(mix64(base + r));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InvalidArgument) throw;
    out.reseeded = false;
    require_length(src, span * runs);
  }
  std::vector<std::complex<double>> means(runs);
  double second = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : second)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(runs); ++r) {
    const auto z = out.reseeded ? materialize(*draws[r], 0, span)
                                : materialize(src, static_cast<std::uint64_t>(r) * span, span);
    means[r] = kernels::serial::correlation_sum(z, p, samples) / static_cast<double>(samples);
    if (runs == 1) {
      for (std::uint64_t n = 0; n < samples; ++n) {
        UnitValue t = z[n + p.shifts[0]].pow(p.exponents[0]);
        for (std::size_t s = 1; s < p.size(); ++s) t = t * z[n + p.shifts[s]].pow(p.exponents[s]);
        second += t.is_zero() ? 0.0 : 1.0;
      }
    }
  }
  std::complex<double> mean = 0;
  for (const auto& v : means) mean += v;
  mean /= static_cast<double>(runs);
  out.mean = mean;
  if (runs == 1) {
    const double var = std::max(0.0, second / static_cast<double>(samples) - std::norm(mean));
    out.std_error = std::sqrt(var / static_cast<double>(samples));
  } else {
    double ss = 0;
    for (const auto& v : means) ss += std::norm(v - mean);
    out.std_error = std::sqrt(ss / static_cast<double>(runs - 1) / static_cast<double>(runs));
  }
  return out;
}

}  // namespace chowla::momentcheck
