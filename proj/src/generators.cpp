#include "chowla/generators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "chowla/rng.hpp"
#include "chowla/turns.hpp"

namespace chowla::gen {

namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, what);
}

std::string alphabet_label(const Alphabet& m) {
  return m ? "U(" + std::to_string(*m) + ")" : "circle";
}

UnitValue uniform_letter(const Alphabet& m, const CounterRng& rng, std::uint64_t n) {
  if (m) return UnitValue::root_of_unity(static_cast<std::int64_t>(rng.below(*m, n, 0)), *m);
  return UnitValue::from_turns(rng.bits(n, 0) & ~((1ull << 11) - 1));
}

bool is_exact_one(const UnitValue& v) {
  return !v.is_zero() && (v.is_rational() ? v.numerator() == 0 : v.turns() == 0);
}

class PowerPhaseSource final : public SequenceSource {
 public:
  PowerPhaseSource(std::shared_ptr<const bigphase::PhaseStream> s, std::uint64_t burn_in)
      : s_(std::move(s)), burn_(burn_in) {
    if (!s_ || s_->size() == 0) invalid("power_phase_source: empty stream");
    if (burn_ >= s_->size()) invalid("power_phase_source: burn_in consumes the whole stream");
    const auto& b = s_->beta();
    integer_beta_ = b.exact() && b.frac_bits() == 0;
  }
  UnitValue at(std::uint64_t n) const override {
    if (n >= s_->size() - burn_)
      throw Error(ErrorCode::OutOfRange, "power phase: n=" + std::to_string(n) +
                                             " beyond stream length " +
                                             std::to_string(s_->size() - burn_));
    return UnitValue::from_turns(s_->terms()[n + burn_].frac);
  }
  std::optional<std::uint64_t> length() const override { return s_->size() - burn_; }
  std::optional<IndexBound> declared_index() const override {
    if (integer_beta_) return std::nullopt;
    return IndexBound::infinite();
  }
  std::string describe() const override {
    return "beta^n g(beta), beta=" + s_->beta().to_string(12) + ", g=" + s_->gfunc().describe();
  }
  double phase_error_bound() const override { return s_->max_err_bound(); }

 private:
  std::shared_ptr<const bigphase::PhaseStream> s_;
  std::uint64_t burn_;
  bool integer_beta_ = false;
};

class IidSource final : public SequenceSource {
 public:
  IidSource(Alphabet m, double zero_prob, std::uint64_t seed)
      : m_(m), zero_prob_(zero_prob), seed_(seed), rng_(derive_seed(seed, "gen.iid")) {
    if (m_ && *m_ < 2) invalid("iid_source: m must be at least 2");
    if (!(zero_prob >= 0.0 && zero_prob <= 1.0)) invalid("iid_source: zero_prob outside [0,1]");
  }
  UnitValue at(std::uint64_t n) const override {
    if (zero_prob_ > 0 && rng_.uniform01(n, 1) < zero_prob_) return UnitValue::zero();
    return uniform_letter(m_, rng_, n);
  }
  std::optional<IndexBound> declared_index() const override {
    return m_ ? IndexBound::finite(*m_) : IndexBound::infinite();
  }
  std::string describe() const override {
    std::ostringstream os;
    os << "iid " << alphabet_label(m_) << " zero_prob=" << zero_prob_ << " seed=" << seed_;
    return os.str();
  }
  SourcePtr reseeded(std::uint64_t seed) const override {
    return std::make_shared<IidSource>(m_, zero_prob_, seed);
  }

 private:
  Alphabet m_;
  double zero_prob_;
  std::uint64_t seed_;
  CounterRng rng_;
};

class HatSource final : public SequenceSource {
 public:
  HatSource(SourcePtr support, Alphabet m, std::uint64_t seed)
      : support_(std::move(support)), m_(m), seed_(seed), rng_(derive_seed(seed, "gen.hat")) {
    if (m_ && *m_ < 2) invalid("hat_source: m must be at least 2");
    if (const auto len = support_->length()) {
      const auto vals = materialize(*support_, 0, *len);
      for (std::size_t n = 0; n < vals.size(); ++n) check(vals[n], n);
    }
  }
  UnitValue at(std::uint64_t n) const override {
    const UnitValue y = support_->at(n);
    check(y, n);
    if (y.is_zero()) return y;
    return uniform_letter(m_, rng_, n);
  }
  std::optional<std::uint64_t> length() const override { return support_->length(); }
  std::optional<IndexBound> declared_index() const override {
    return m_ ? IndexBound::finite(*m_) : IndexBound::infinite();
  }
  std::string describe() const override {
    return "hat " + alphabet_label(m_) + " over [" + support_->describe() + "] seed=" +
           std::to_string(seed_);
  }
  SourcePtr reseeded(std::uint64_t seed) const override {
    return std::make_shared<HatSource>(support_, m_, seed);
  }

 private:
  static void check(const UnitValue& y, std::uint64_t n) {
    if (!y.is_zero() && !is_exact_one(y))
      throw Error(ErrorCode::BadSupport, "support value " + to_string(y) + " at n=" +
                                             std::to_string(n) + " is not 0 or 1");
  }
  SourcePtr support_;
  Alphabet m_;
  std::uint64_t seed_;
  CounterRng rng_;
};

class BlockMapSource final : public SequenceSource {
 public:
  BlockMapSource(BlockMap bm, std::uint64_t seed)
      : bm_(std::move(bm)), seed_(seed), rng_(derive_seed(seed, "gen.blockmap")) {
    bm_.validate();
    double acc = 0;
    for (const auto& w : bm_.weights) {
      acc += w.get_d();
      cdf_.push_back(acc);
    }
    // The last symbol with positive weight closes the distribution.
    for (std::size_t i = cdf_.size(); i-- > 0;) {
      if (bm_.weights[i] > 0) {
        for (std::size_t j = i; j < cdf_.size(); ++j) cdf_[j] = 2.0;
        break;
      }
    }
  }
  std::uint32_t symbol_at(std::uint64_t n) const {
    const double u = rng_.uniform01(n);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t s = static_cast<std::size_t>(it - cdf_.begin());
    while (bm_.weights[s] == 0) ++s;
    return static_cast<std::uint32_t>(s);
  }
  UnitValue at(std::uint64_t n) const override {
    std::size_t idx = 0;
    for (int j = 0; j < bm_.l; ++j) idx = idx * bm_.symbols() + symbol_at(n + j);
    return bm_.table[idx];
  }
  std::optional<IndexBound> declared_index() const override {
    return IndexBound::finite(std::max<std::uint32_t>(bm_.m, 2));
  }
  std::string describe() const override {
    return "blockmap " + bm_.name + " seed=" + std::to_string(seed_);
  }
  SourcePtr reseeded(std::uint64_t seed) const override {
    return std::make_shared<BlockMapSource>(bm_, seed);
  }

 private:
  BlockMap bm_;
  std::uint64_t seed_;
  CounterRng rng_;
  std::vector<double> cdf_;
};

class PiecewiseCircleSource final : public SequenceSource {
 public:
  explicit PiecewiseCircleSource(std::uint64_t seed)
      : seed_(seed), rng_(derive_seed(seed, "gen.piecewise")) {}
  UnitValue at(std::uint64_t n) const override {
    // t = u 2^-53 held in 2^-128 turns, so every branch is exact.
    const Turns128 t = static_cast<Turns128>(rng_.bits(n) >> 11) << 75;
    constexpr Turns128 quarter = static_cast<Turns128>(1) << 126;
    constexpr Turns128 half = quarter << 1;
    Turns128 h;
    if (t < quarter)
      h = t + (t >> 1);
    else if (t < half)
      h = (t >> 1) + quarter;
    else if (t < half + quarter)
      h = t + (t >> 1) - quarter;
    else
      h = (t >> 1) + half;
    return UnitValue::from_turns(top64(h) + static_cast<std::uint64_t>((h >> 63) & 1));
  }
  std::optional<IndexBound> declared_index() const override { return IndexBound::infinite(); }
  std::string describe() const override { return "piecewise circle seed=" + std::to_string(seed_); }
  SourcePtr reseeded(std::uint64_t seed) const override {
    return std::make_shared<PiecewiseCircleSource>(seed);
  }

 private:
  std::uint64_t seed_;
  CounterRng rng_;
};

class FileSource final : public SequenceSource {
 public:
  FileSource(std::vector<UnitValue> v, std::string label, double err)
      : v_(std::move(v)), label_(std::move(label)), err_(err) {}
  UnitValue at(std::uint64_t n) const override {
    if (n >= v_.size())
      throw Error(ErrorCode::OutOfRange, label_ + ": index " + std::to_string(n) +
                                             " >= length " + std::to_string(v_.size()));
    return v_[n];
  }
  std::optional<std::uint64_t> length() const override { return v_.size(); }
  std::optional<IndexBound> declared_index() const override { return std::nullopt; }
  std::string describe() const override { return label_; }
  double phase_error_bound() const override { return err_; }

 private:
  std::vector<UnitValue> v_;
  std::string label_;
  double err_;
};

UnitValue snapped(std::uint64_t turns) {
  if (auto r = snap_rational(turns, 1u << 16, 0x1p-60)) return *r;
  return UnitValue::from_turns(turns);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    cur.erase(0, cur.find_first_not_of(" \t\r"));
    const auto last = cur.find_last_not_of(" \t\r");
    cur.erase(last == std::string::npos ? 0 : last + 1);
    out.push_back(cur);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool looks_numeric(const std::string& s) {
  return !s.empty() && (std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '.' ||
                        s[0] == '-' || s[0] == '+');
}

}  // namespace

SourcePtr power_phase_source(std::shared_ptr<const bigphase::PhaseStream> stream,
                             std::uint64_t burn_in) {
  return std::make_shared<PowerPhaseSource>(std::move(stream), burn_in);
}

SourcePtr iid_source(Alphabet m, double zero_prob, std::uint64_t seed) {
  return std::make_shared<IidSource>(m, zero_prob, seed);
}

SourcePtr hat_source(SourcePtr support, Alphabet m, std::uint64_t seed) {
  if (!support) invalid("hat_source: null support");
  return std::make_shared<HatSource>(std::move(support), m, seed);
}

SourcePtr linear_phase_source(double alpha) {
  const Turns128 a = real_to_turns128(alpha);
  std::ostringstream os;
  os.precision(17);
  os << "e(n*" << alpha << ")";
  return std::make_shared<FunctionSource>(
      [a](std::uint64_t n) {
        const Turns128 t = a * static_cast<Turns128>(n);
        return UnitValue::from_turns(top64(t) + static_cast<std::uint64_t>((t >> 63) & 1));
      },
      os.str());
}

SourcePtr constant_source(UnitValue v) {
  return std::make_shared<FunctionSource>([v](std::uint64_t) { return v; },
                                          "constant " + to_string(v));
}

SourcePtr alternating_source() {
  return std::make_shared<FunctionSource>(
      [](std::uint64_t n) { return UnitValue::root_of_unity(static_cast<std::int64_t>(n & 1), 2); },
      "(-1)^n", IndexBound::finite(2));
}

SourcePtr alternating_support_source() {
  return std::make_shared<FunctionSource>(
      [](std::uint64_t n) { return (n & 1) ? UnitValue::zero() : UnitValue::one(); }, "1,0,1,0,...",
      IndexBound::finite(2));
}

// ---------------------------------------------------------------------------
// BlockMap

std::size_t BlockMap::words() const {
  std::size_t w = 1;
  for (int i = 0; i < l; ++i) w *= symbols();
  return w;
}

std::size_t BlockMap::word_index(std::span<const std::uint32_t> word) const {
  if (word.size() != static_cast<std::size_t>(l)) invalid("word length differs from l");
  std::size_t idx = 0;
  for (const auto s : word) {
    if (s >= symbols()) invalid("symbol out of range");
    idx = idx * symbols() + s;
  }
  return idx;
}

std::optional<std::uint32_t> BlockMap::root_index(std::size_t word_idx) const {
  const UnitValue& v = table.at(word_idx);
  if (v.is_zero()) return std::nullopt;
  return static_cast<std::uint32_t>(v.numerator() * (m / v.denominator()));
}

bool BlockMap::uniform_weights() const {
  return std::all_of(weights.begin(), weights.end(),
                     [&](const mpq_class& w) { return w == weights.front(); });
}

std::uint32_t BlockMap::symbol(const std::string& s) const {
  const auto it = std::find(alphabet.begin(), alphabet.end(), s);
  if (it == alphabet.end()) invalid("unknown symbol '" + s + "' in map " + name);
  return static_cast<std::uint32_t>(it - alphabet.begin());
}

void BlockMap::validate() const {
  if (alphabet.empty()) invalid("block map: empty alphabet");
  if (l < 1) invalid("block map: l must be at least 1");
  if (m < 1) invalid("block map: m must be positive");
  if (std::pow(static_cast<double>(symbols()), l) > 1e8) invalid("block map: table too large");
  if (table.size() != words()) invalid("block map: table is not total on alphabet^l");
  if (weights.size() != symbols()) invalid("block map: one weight per symbol required");
  mpq_class total = 0;
  for (const auto& w : weights) {
    if (w < 0) invalid("block map: negative weight");
    total += w;
  }
  if (std::fabs(total.get_d() - 1.0) > 0x1p-40) invalid("block map: weights do not sum to 1");
  for (const auto& v : table) {
    if (v.is_zero()) continue;
    if (!v.is_rational() || m % v.denominator() != 0)
      invalid("block map: value " + to_string(v) + " is not in U(" + std::to_string(m) + ")");
  }
}

namespace {

std::string symbol_text(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  invalid("block map: symbols must be strings or integers");
}

mpq_class parse_rational_text(const std::string& s) {
  try {
    if (s.find('/') != std::string::npos) {
      mpq_class q(s);
      if (q.get_den() == 0) invalid("zero denominator in '" + s + "'");
      q.canonicalize();
      return q;
    }
    const auto dot = s.find('.');
    if (dot == std::string::npos) return mpq_class(mpz_class(s));
    mpz_class den = 1;
    for (std::size_t i = dot + 1; i < s.size(); ++i) den *= 10;
    mpq_class q(mpz_class(s.substr(0, dot) + s.substr(dot + 1)), den);
    q.canonicalize();
    return q;
  } catch (const std::invalid_argument&) {
    invalid("bad rational '" + s + "'");
  }
}

mpq_class parse_weight(const nlohmann::json& j) {
  if (j.is_string()) return parse_rational_text(j.get<std::string>());
  if (j.is_number()) {
    const double d = j.get<double>();
    // Prefer a short rational: 0.3333333333333333 reads as 1/3.
    if (d > 0 && d < 1) {
      const auto t = static_cast<std::uint64_t>(std::ldexp(d, 64));
      if (auto r = snap_rational(t, 1u << 20, 0x1p-48))
        return mpq_class(static_cast<unsigned long>(r->numerator()),
                         static_cast<unsigned long>(r->denominator()));
    }
    return mpq_class(d);
  }
  invalid("block map: weights must be numbers or strings");
}

UnitValue parse_phase(const nlohmann::json& j) {
  mpq_class q;
  if (j.is_string()) {
    q = parse_rational_text(j.get<std::string>());
  } else if (j.is_number()) {
    const double d = j.get<double>();
    if (d < 0 || d >= 1) invalid("block map: phase outside [0,1)");
    const auto t = static_cast<std::uint64_t>(std::ldexp(d, 64));
    if (auto r = snap_rational(t, 1u << 16, 0x1p-40)) return *r;
    invalid("block map: phase " + std::to_string(d) + " is not a root of unity");
  } else {
    invalid("block map: phase must be a number or string");
  }
  if (q < 0 || q >= 1) invalid("block map: phase outside [0,1)");
  if (!q.get_den().fits_uint_p()) invalid("block map: phase denominator too large");
  return UnitValue::root_of_unity(static_cast<std::int64_t>(q.get_num().get_si()),
                                  static_cast<std::uint32_t>(q.get_den().get_ui()));
}

}  // namespace

BlockMap BlockMap::from_json(const nlohmann::json& doc) {
  BlockMap bm;
  try {
    bm.name = doc.value("name", std::string("blockmap"));
    for (const auto& s : doc.at("alphabet")) bm.alphabet.push_back(symbol_text(s));
    bm.l = doc.at("l").get<int>();
    if (bm.l < 1 || bm.l > 8) invalid("block map: l must lie in [1,8]");
    bm.table.assign(bm.words(), UnitValue::zero());
    std::vector<bool> seen(bm.table.size(), false);
    for (const auto& row : doc.at("table")) {
      if (!row.is_array() || row.size() < 2 || row.size() > 3)
        invalid("block map: table rows are [word, phase, is_zero]");
      std::vector<std::uint32_t> word;
      for (const auto& s : row.at(0)) word.push_back(bm.symbol(symbol_text(s)));
      const std::size_t idx = bm.word_index(word);
      if (seen[idx]) invalid("block map: duplicate word in table");
      seen[idx] = true;
      const bool zero = row.size() == 3 && row.at(2).get<bool>();
      bm.table[idx] = zero ? UnitValue::zero() : parse_phase(row.at(1));
    }
    if (doc.contains("weights")) {
      for (const auto& w : doc.at("weights")) bm.weights.push_back(parse_weight(w));
      mpq_class total = 0;
      for (const auto& w : bm.weights) total += w;
      if (total != 1 && std::fabs(total.get_d() - 1.0) <= 0x1p-40)
        for (auto& w : bm.weights) w /= total;
    } else {
      bm.weights.assign(bm.symbols(), mpq_class(1, static_cast<unsigned long>(bm.symbols())));
    }
    if (doc.contains("m")) {
      bm.m = doc.at("m").get<std::uint32_t>();
    } else {
      std::uint64_t m = 2;
      for (const auto& v : bm.table)
        if (!v.is_zero()) m = std::lcm<std::uint64_t>(m, v.denominator());
      if (m > 0xFFFFFFFFull) invalid("block map: index too large");
      bm.m = static_cast<std::uint32_t>(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("block map JSON: ") + e.what());
  }
  // Re-express every value over the common denominator m.
  for (auto& v : bm.table)
    if (!v.is_zero() && v.is_rational() && bm.m % v.denominator() == 0)
      v = UnitValue::root_of_unity(static_cast<std::int64_t>(v.numerator() * (bm.m / v.denominator())),
                                   bm.m);
  bm.validate();
  return bm;
}

BlockMap BlockMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json BlockMap::to_json() const {
  nlohmann::json doc;
  doc["name"] = name;
  doc["alphabet"] = alphabet;
  doc["l"] = l;
  doc["m"] = m;
  nlohmann::json w = nlohmann::json::array();
  for (const auto& x : weights) w.push_back(x.get_str());
  doc["weights"] = w;
  nlohmann::json rows = nlohmann::json::array();
  std::vector<std::uint32_t> word(static_cast<std::size_t>(l));
  for (std::size_t idx = 0; idx < table.size(); ++idx) {
    std::size_t r = idx;
    for (int j = l; j-- > 0;) {
      word[static_cast<std::size_t>(j)] = static_cast<std::uint32_t>(r % symbols());
      r /= symbols();
    }
    nlohmann::json wj = nlohmann::json::array();
    for (const auto s : word) wj.push_back(alphabet[s]);
    const UnitValue& v = table[idx];
    const std::string ph = v.is_zero() ? "0"
                                       : std::to_string(v.numerator()) + "/" +
                                             std::to_string(v.denominator());
    rows.push_back({wj, ph, v.is_zero()});
  }
  doc["table"] = rows;
  return doc;
}

BlockMap star_map(std::uint32_t m) {
  if (m < 2) invalid("star_map: m must be at least 2");
  BlockMap bm;
  bm.name = "star" + std::to_string(m);
  for (std::uint32_t k = 0; k < m; ++k) bm.alphabet.push_back("u" + std::to_string(k));
  bm.alphabet.push_back("0");
  bm.alphabet.push_back("*");
  bm.l = 2;
  bm.m = m;
  const std::size_t a = bm.symbols();
  bm.table.assign(a * a, UnitValue::zero());
  for (std::uint32_t k = 0; k < m; ++k)
    bm.table[k * a + (a - 1)] = UnitValue::root_of_unity(k, m);
  bm.weights.assign(a, mpq_class(1, 2 * m));
  bm.weights[m] = 0;
  bm.weights[m + 1] = mpq_class(1, 2);
  bm.validate();
  return bm;
}

BlockMap sarnak_not_chowla_map() {
  BlockMap bm;
  bm.name = "sarnak_not_chowla";
  bm.alphabet = {"0", "1", "2"};
  bm.l = 2;
  bm.m = 2;
  bm.table.assign(9, UnitValue::zero());
  bm.table[0 * 3 + 1] = UnitValue::root_of_unity(0, 2);
  bm.table[1 * 3 + 2] = UnitValue::root_of_unity(1, 2);
  bm.weights.assign(3, mpq_class(1, 3));
  bm.validate();
  return bm;
}

SourcePtr blockmap_source(const BlockMap& bm, std::uint64_t seed) {
  return std::make_shared<BlockMapSource>(bm, seed);
}

double piecewise_h(double t) {
  if (!(t >= 0.0 && t < 1.0)) invalid("piecewise_h: t outside [0,1)");
  if (t < 0.25) return 1.5 * t;
  if (t < 0.5) return 0.5 * t + 0.25;
  if (t < 0.75) return 1.5 * t - 0.25;
  return 0.5 * t + 0.5;
}

SourcePtr piecewise_circle_source(std::uint64_t seed) {
  return std::make_shared<PiecewiseCircleSource>(seed);
}

// ---------------------------------------------------------------------------
// Files

SourcePtr csv_source(std::istream& is, const std::string& label) {
  std::vector<UnitValue> values;
  std::optional<std::uint64_t> declared;
  int col_n = -1, col_phase = 0, col_zero = 1, col_err = -1;
  bool header_done = false;
  double err = 0.0;
  std::string line;
  std::uint64_t lineno = 0;
  const auto fail = [&](const std::string& what) -> void {
    throw Error(ErrorCode::ParseError, label + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[0] == '#') {
      const auto pos = line.find("length=");
      if (pos != std::string::npos) {
        try {
          declared = std::stoull(line.substr(pos + 7));
        } catch (const std::exception&) {
          fail("bad length declaration");
        }
      }
      continue;
    }
    auto cols = split_csv(line);
    if (!header_done) {
      header_done = true;
      if (!looks_numeric(cols[0])) {
        col_n = col_phase = col_zero = col_err = -1;
        for (int i = 0; i < static_cast<int>(cols.size()); ++i) {
          if (cols[i] == "n") col_n = i;
          else if (cols[i] == "phase" || cols[i] == "frac") col_phase = i;
          else if (cols[i] == "is_zero") col_zero = i;
          else if (cols[i] == "err_bound") col_err = i;
        }
        if (col_phase < 0) fail("header lacks a phase column");
        continue;
      }
      if (cols.size() == 3) {
        col_n = 0;
        col_phase = 1;
        col_zero = 2;
      } else if (cols.size() != 2) {
        fail("expected 2 or 3 columns");
      }
    }
    const int need = std::max({col_n, col_phase, col_zero, col_err});
    if (static_cast<int>(cols.size()) <= need) fail("missing columns");
    if (col_n >= 0) {
      std::uint64_t n = 0;
      try {
        std::size_t used = 0;
        n = std::stoull(cols[col_n], &used);
        if (used != cols[col_n].size()) throw std::invalid_argument("n");
      } catch (const std::exception&) {
        fail("bad index '" + cols[col_n] + "'");
      }
      if (n != values.size()) fail("index " + std::to_string(n) + " out of sequence");
    }
    bool zero = false;
    if (col_zero >= 0) {
      const std::string& z = cols[col_zero];
      if (z == "true" || z == "1") zero = true;
      else if (z == "false" || z == "0") zero = false;
      else fail("bad is_zero '" + z + "'");
    }
    std::uint64_t t = 0;
    if (!decimal_to_turns(cols[col_phase], t)) fail("phase '" + cols[col_phase] + "' not in [0,1)");
    if (col_err >= 0) {
      try {
        err = std::max(err, std::stod(cols[col_err]));
      } catch (const std::exception&) {
        fail("bad err_bound");
      }
    }
    if (zero) {
      if (t != 0) fail("zero value with non-zero phase");
      values.push_back(UnitValue::zero());
    } else {
      values.push_back(col_err >= 0 ? UnitValue::from_turns(t) : snapped(t));
    }
  }
  if (declared && *declared != values.size())
    throw Error(ErrorCode::LengthMismatch, label + ": header declares " +
                                               std::to_string(*declared) + " rows, found " +
                                               std::to_string(values.size()));
  return std::make_shared<FileSource>(std::move(values), label, err);
}

SourcePtr file_source(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  if (format == FileFormat::Auto) {
    char magic[8] = {};
    in.read(magic, 8);
    format = in.gcount() == 8 && std::string(magic, 8) == "CHLPHS01" ? FileFormat::Binary
                                                                      : FileFormat::Csv;
    in.clear();
    in.seekg(0);
  }
  const std::string label = "file:" + path.string();
  if (format == FileFormat::Csv) return csv_source(in, label);
  const auto recs = bigphase::read_stream_binary(in);
  std::vector<UnitValue> values;
  values.reserve(recs.size());
  double err = 0;
  for (const auto& r : recs) {
    values.push_back(UnitValue::from_turns(r.frac));
    if (r.log2_err != std::numeric_limits<std::int16_t>::min())
      err = std::max(err, std::ldexp(1.0, r.log2_err));
  }
  return std::make_shared<FileSource>(std::move(values), label, err);
}

void write_csv(std::ostream& os, const SequenceSource& src, std::uint64_t n) {
  const auto vals = materialize(src, 0, n);
  os << "n,phase,is_zero\n";
  for (std::uint64_t i = 0; i < n; ++i) {
    const UnitValue& v = vals[i];
    os << i << ',' << turns_to_decimal(v.turns(), 20) << ',' << (v.is_zero() ? "true" : "false")
       << '\n';
  }
}

}  // namespace chowla::gen
