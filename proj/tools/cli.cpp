#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "chowla/bigphase.hpp"
#include "chowla/correlate.hpp"
#include "chowla/equidist.hpp"
#include "chowla/generators.hpp"
#include "chowla/momentcheck.hpp"
#include "chowla/ortho.hpp"
#include "chowla/parallel.hpp"
#include "chowla/rng.hpp"

#ifndef CHOWLA_LAB_VERSION
#define CHOWLA_LAB_VERSION "0.0.0"
#endif

namespace chowla::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::IoError, "sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

namespace {

// ---------------------------------------------------------------------------
// Parsing helpers

[[noreturn]] void bad(const std::string& flag, const std::string& what) {
  throw CLI::ValidationError(flag, what);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::int64_t> int_list(const std::string& flag, const std::string& s) {
  std::vector<std::int64_t> v;
  for (const auto& t : split(s, ',')) {
    std::size_t pos = 0;
    try {
      v.push_back(std::stoll(t, &pos));
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != t.size()) bad(flag, "not an integer list: " + s);
  }
  return v;
}

std::vector<double> real_list(const std::string& flag, const std::string& s) {
  std::vector<double> v;
  for (const auto& t : split(s, ',')) {
    try {
      v.push_back(bigphase::HighPrecisionReal::parse(t, 128).to_double());
    } catch (const Error&) {
      bad(flag, "not a number: " + t);
    }
  }
  return v;
}

gen::Alphabet alphabet(const std::string& flag, const std::string& s) {
  if (s == "circle" || s == "inf") return std::nullopt;
  const auto v = int_list(flag, s);
  if (v.size() != 1 || v[0] < 1) bad(flag, "expected a positive integer or 'circle'");
  return static_cast<std::uint32_t>(v[0]);
}

/// "(1,2),(1,1)", "((1,2),(1,1))" or "1,2/1,1".
Pattern parse_pattern(const std::string& s) {
  std::vector<std::string> groups;
  const std::regex group(R"(\(([^()]*)\))");
  for (auto it = std::sregex_iterator(s.begin(), s.end(), group); it != std::sregex_iterator(); ++it)
    groups.push_back((*it)[1]);
  if (groups.empty()) groups = split(s, '/');
  if (groups.size() != 2) bad("--pattern", "expected shifts and exponents: " + s);
  return Pattern{int_list("--pattern", groups[0]), int_list("--pattern", groups[1])};
}

// ---------------------------------------------------------------------------
// Sources

struct SourceOpts {
  std::string kind;
  std::string beta;
  std::string beta_range = "1.1:2.5";
  std::int64_t beta_bits = 256;
  std::string g = "one";
  int guard = 64;
  std::uint64_t burn_in = 0;
  std::string m = "2";
  double zero_prob = 0;
  std::string support = "alternating";
  std::string alpha = "sqrt(2)";
  double phase = 0;
  std::string map;
  std::string in;
  std::string format = "auto";
};

void add_source_options(CLI::App* app, SourceOpts& o) {
  app->add_option("--source", o.kind, "beta|iid|hat|linear|constant|alternating|blockmap|piecewise|file")
      ->check(CLI::IsMember({"beta", "iid", "hat", "linear", "constant", "alternating", "blockmap",
                             "piecewise", "file"}));
  app->add_option("--beta", o.beta, "beta: golden, sqrt(c), p/q or a decimal");
  app->add_option("--beta-range", o.beta_range, "lo:hi for a random dyadic beta");
  app->add_option("--beta-bits", o.beta_bits, "fractional bits of a random beta");
  app->add_option("--g", o.g, "one, poly:c0,c1,... or power:alpha,k");
  app->add_option("--guard", o.guard, "guard bits of the precision budget");
  app->add_option("--burn-in", o.burn_in);
  app->add_option("--m", o.m, "alphabet U(m), or circle");
  app->add_option("--zero-prob", o.zero_prob);
  app->add_option("--support", o.support, "hat support: alternating, ones or a sequence file");
  app->add_option("--alpha", o.alpha, "linear phase e(n alpha)");
  app->add_option("--phase", o.phase, "constant e(phase)");
  app->add_option("--map", o.map, "block map JSON");
  app->add_option("--in", o.in, "sequence file");
  app->add_option("--format", o.format, "auto|csv|binary")->check(CLI::IsMember({"auto", "csv", "binary"}));
}

struct Built {
  SourcePtr src;
  std::shared_ptr<const bigphase::PhaseStream> stream;
  json info = json::object();
};

struct Run;

Built build_source(const SourceOpts& o, Run& run, std::uint64_t terms);

// ---------------------------------------------------------------------------
// Run state shared by every subcommand

struct Run {
  std::string command;
  std::uint64_t seed = 1;
  std::string out;
  std::string json_out;
  std::string manifest;
  json substreams = json::object();
  json precision;
  json source;
  json outputs = json::array();
  CLI::App* app = nullptr;
  std::set<std::string> flags;
  std::ostream* stdout_ = nullptr;

  std::uint64_t stream(const std::string& name) {
    const auto s = derive_seed(seed, name);
    substreams[name] = s;
    return s;
  }

  void write(const std::string& path, const std::string& bytes) {
    if (path.empty()) return;
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + path);
    os << bytes;
    if (!os) throw Error(ErrorCode::IoError, "write failed: " + path);
    outputs.push_back({{"path", path}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }

  void write_json(const json& j) {
    if (!json_out.empty()) write(json_out, j.dump(2) + "\n");
  }

  json config() const {
    json c = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      const std::string name = opt->get_single_name();
      if (name == "help") continue;
      if (flags.count(name)) {
        if (opt->count() > 0) c[name] = true;
        continue;
      }
      if (opt->count() > 0) {
        const auto& r = opt->results();
        if (r.size() == 1) c[name] = r[0];
        else c[name] = r;
      } else if (!opt->get_default_str().empty()) {
        c[name] = opt->get_default_str();
      }
    }
    return c;
  }
};

Built build_source(const SourceOpts& o, Run& run, std::uint64_t terms) {
  Built b;
  const std::string kind = !o.kind.empty() ? o.kind : (!o.in.empty() ? "file" : "iid");
  b.info["source"] = kind;
  if (kind == "beta") {
    bigphase::HighPrecisionReal beta = bigphase::HighPrecisionReal::from_double(1.5);
    double upper = 0;
    if (!o.beta.empty()) {
      upper = bigphase::HighPrecisionReal::parse(o.beta, 128).upper_bound() * (1 + 1e-12);
    } else {
      const auto r = real_list("--beta-range", [&] {
        std::string s = o.beta_range;
        std::replace(s.begin(), s.end(), ':', ',');
        return s;
      }());
      if (r.size() != 2) bad("--beta-range", "expected lo:hi");
      beta = bigphase::random_dyadic(r[0], r[1], o.beta_bits, run.stream("cli.beta"));
      upper = beta.upper_bound() * (1 + 1e-12);
    }
    const auto budget = bigphase::PrecisionBudget::for_stream(upper, static_cast<std::int64_t>(terms + o.burn_in), o.guard);
    if (!o.beta.empty()) beta = bigphase::HighPrecisionReal::parse(o.beta, budget.total_bits);
    const auto g = bigphase::GFunc::parse(o.g);
    b.stream = std::make_shared<bigphase::PhaseStream>(bigphase::phase_stream(beta, g, budget));
    b.src = gen::power_phase_source(b.stream, o.burn_in);
    b.info["beta"] = beta.to_string(40);
    b.info["g"] = g.describe();
    run.precision = {{"total_bits", budget.total_bits}, {"guard_bits", budget.guard_bits},
                     {"n_max", budget.n_max}, {"beta_upper", budget.beta_upper},
                     {"max_err_bound", b.stream->max_err_bound()}};
  } else if (kind == "iid") {
    b.src = gen::iid_source(alphabet("--m", o.m), o.zero_prob, run.stream("cli.iid"));
  } else if (kind == "hat") {
    SourcePtr support;
    if (o.support == "alternating") support = gen::alternating_support_source();
    else if (o.support == "ones") support = gen::constant_source(UnitValue::one());
    else support = gen::file_source(o.support);
    b.src = gen::hat_source(support, alphabet("--m", o.m), run.stream("cli.hat"));
  } else if (kind == "linear") {
    const auto a = real_list("--alpha", o.alpha);
    if (a.size() != 1) bad("--alpha", "expected one number");
    b.src = gen::linear_phase_source(a[0]);
  } else if (kind == "constant") {
    b.src = gen::constant_source(UnitValue::from_phase(o.phase));
  } else if (kind == "alternating") {
    b.src = gen::alternating_source();
  } else if (kind == "blockmap") {
    if (o.map.empty()) bad("--map", "blockmap source needs --map");
    b.src = gen::blockmap_source(gen::BlockMap::load(o.map), run.stream("cli.blockmap"));
  } else if (kind == "piecewise") {
    b.src = gen::piecewise_circle_source(run.stream("cli.piecewise"));
  } else {
    if (o.in.empty()) bad("--in", "file source needs --in");
    const auto fmt = o.format == "csv" ? gen::FileFormat::Csv
                     : o.format == "binary" ? gen::FileFormat::Binary
                                            : gen::FileFormat::Auto;
    b.src = gen::file_source(o.in, fmt);
  }
  b.info["describe"] = b.src->describe();
  run.source = b.info;
  return b;
}

std::uint64_t default_terms(const SourceOpts& o, std::uint64_t N) {
  if (N > 0) return N;
  if (!o.in.empty() && (o.kind.empty() || o.kind == "file")) {
    const auto src = gen::file_source(o.in);
    if (src->length()) return *src->length();
  }
  return 100000;
}

// ---------------------------------------------------------------------------
// Zero-entropy systems

std::vector<ortho::ZeroEntropySystem> parse_system(const std::string& spec) {
  if (spec == "unipotent") return {ortho::ZeroEntropySystem::unipotent({{1, 1}, {0, 1}}, {0.0, std::sqrt(2.0) - 1})};
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "rotation") {
    auto a = real_list("--system", arg);
    for (auto& x : a) x -= std::floor(x);
    if (a.empty()) bad("--system", "rotation needs angles");
    return {ortho::ZeroEntropySystem::rotation(a)};
  }
  if (kind == "cycle") {
    const auto p = int_list("--system", arg);
    if (p.size() != 1 || p[0] < 1) bad("--system", "cycle needs a period");
    return {ortho::ZeroEntropySystem::periodic(static_cast<std::uint32_t>(p[0]))};
  }
  if (fs::exists(spec)) return ortho::load_catalog(spec);
  bad("--system", "unknown system " + spec);
}

std::vector<ortho::Character> characters(const ortho::ZeroEntropySystem& sys, const std::string& explicit_k,
                                         int bound) {
  if (!explicit_k.empty()) return {ortho::Character{int_list("--char", explicit_k)}};
  std::vector<ortho::Character> out;
  if (sys.kind() == ortho::ZeroEntropySystem::Kind::PeriodicCycle) {
    for (std::int64_t k = 1; k < static_cast<std::int64_t>(sys.period()); ++k) out.push_back({{k}});
    return out;
  }
  const int d = sys.dim();
  std::vector<std::int64_t> k(d, -bound);
  while (true) {
    if (std::any_of(k.begin(), k.end(), [](std::int64_t x) { return x != 0; })) out.push_back({k});
    int i = d - 1;
    while (i >= 0 && ++k[i] > bound) k[i--] = -bound;
    if (i < 0) break;
  }
  return out;
}

std::string char_label(const ortho::Character& c) {
  std::string s = "(";
  for (std::size_t i = 0; i < c.k.size(); ++i) s += (i ? "," : "") + std::to_string(c.k[i]);
  return s + ")";
}

std::string csv_quote(const std::string& s) { return '"' + s + '"'; }

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns an exit code and fills the run's outputs.

using Handler = std::function<int(Run&)>;

struct Command {
  CLI::App* app;
  Handler handler;
};

void add_common(CLI::App* app, Run& run, const std::string& out_help) {
  app->add_option("--seed", run.seed, "base seed for every random substream");
  app->add_option("--out", run.out, out_help);
  app->add_option("--json", run.json_out, "JSON report path");
  app->add_option("--manifest", run.manifest, "run manifest path (default <out>.manifest.json)");
}

int verdict(bool pass) { return pass ? kExitPass : kExitFail; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chowla and Sarnak diagnostics for unit-valued sequences", "chowla_lab"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config with one [subcommand] section per command");
  app.set_version_flag("--version", CHOWLA_LAB_VERSION);
  int threads = 0;
  app.add_option("--threads", threads, "worker thread cap (default: CHOWLA_LAB_THREADS or all cores)");

  Run run;
  run.stdout_ = &out;
  SourceOpts so;
  std::map<std::string, Command> commands;
  const auto add = [&](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    commands[name].app = sub;
    return sub;
  };

  // gen
  std::uint64_t N = 0;
  std::string gen_format = "csv";
  {
    auto* c = add("gen", "write a sequence to a file");
    add_common(c, run, "sequence file");
    add_source_options(c, so);
    c->add_option("--N", N, "number of terms")->required();
    c->add_option("--write-format", gen_format, "csv|stream-csv|stream-bin")
        ->check(CLI::IsMember({"csv", "stream-csv", "stream-bin"}));
    commands["gen"].handler = [&](Run& r) {
      if (r.out.empty()) bad("--out", "gen needs --out");
      const auto b = build_source(so, r, N);
      std::ostringstream os;
      if (gen_format == "csv") {
        gen::write_csv(os, *b.src, N);
      } else {
        if (!b.stream) bad("--write-format", "stream formats need --source beta");
        if (gen_format == "stream-csv") bigphase::write_stream_csv(os, *b.stream);
        else bigphase::write_stream_binary(os, *b.stream);
      }
      r.write(r.out, os.str());
      out << "wrote " << N << " terms of " << b.src->describe() << " to " << r.out << "\n";
      r.write_json({{"source", b.info}, {"N", N}});
      return kExitPass;
    };
  }

  // index
  std::int64_t m_max = 64;
  double tol_phase = 1e-9, density_cut = 1e-3;
  {
    auto* c = add("index", "estimate the index of a sequence");
    add_common(c, run, "JSON report path");
    add_source_options(c, so);
    c->add_option("--N", N, "terms to inspect (default: file length or 100000)");
    c->add_option("--m-max", m_max);
    c->add_option("--tol-phase", tol_phase);
    c->add_option("--cut", density_cut, "density cut");
    commands["index"].handler = [&](Run& r) {
      const std::uint64_t n = default_terms(so, N);
      const auto b = build_source(so, r, n);
      const auto e = correlate::estimate_index(*b.src, n, m_max, tol_phase, density_cut);
      out << "index: " << e.bound.to_string() << "\n";
      json j = correlate::to_json(e);
      j["source"] = b.info;
      j["N"] = n;
      r.write(r.out, j.dump(2) + "\n");
      r.write_json(j);
      return kExitPass;
    };
  }

  // battery
  int max_shift = 3;
  std::string exps = "-2,-1,1,2";
  double tol = -1;
  std::uint64_t cap = 100000;
  {
    auto* c = add("battery", "Chowla battery over all small patterns");
    add_common(c, run, "CSV of pattern moduli");
    add_source_options(c, so);
    c->add_option("--N", N, "averaging length");
    c->add_option("--max-shift", max_shift);
    c->add_option("--exps", exps, "exponent set, e.g. -2,-1,1,2");
    c->add_option("--tol", tol, "modulus tolerance (default max(0.05, 5/sqrt(N)))");
    c->add_option("--pattern-cap", cap);
    commands["battery"].handler = [&](Run& r) {
      const std::uint64_t n = default_terms(so, N);
      const auto b = build_source(so, r, n + static_cast<std::uint64_t>(max_shift));
      const auto e = int_list("--exps", exps);
      const double t = tol > 0 ? tol : correlate::default_tolerance(n);
      correlate::EnumerationOptions eo;
      eo.pattern_cap = cap;
      const auto res = correlate::chowla_battery(*b.src, max_shift, e, n, t, eo);
      std::ostringstream os;
      correlate::write_reports_csv(os, res.reports);
      r.write(r.out, os.str());
      json j = correlate::to_json(res);
      j["source"] = b.info;
      r.write_json(j);
      const auto& w = res.worst_offender();
      out << "patterns: " << res.reports.size() << "  worst: " << w.pattern.to_string() << " |avg| = "
          << fmt(w.modulus()) << "  tol: " << t << "\nverdict: " << (res.pass ? "pass" : "fail") << "\n";
      return verdict(res.pass);
    };
  }

  // disc
  {
    auto* c = add("disc", "star discrepancy of the phases");
    add_common(c, run, "JSON report path");
    add_source_options(c, so);
    c->add_option("--N", N);
    c->add_option("--tol", tol, "pass when D* <= tol (no verdict when unset)");
    commands["disc"].handler = [&](Run& r) {
      const std::uint64_t n = default_terms(so, N);
      const auto b = build_source(so, r, n);
      std::vector<double> pts;
      for (const auto& z : materialize(*b.src, 0, n))
        if (!z.is_zero()) pts.push_back(z.phase());
      const double d = equidist::star_discrepancy(pts);
      json j{{"source", b.info}, {"N", n}, {"points", pts.size()}, {"star_discrepancy", d}};
      if (tol > 0) j["pass"] = d <= tol;
      r.write(r.out, j.dump(2) + "\n");
      r.write_json(j);
      out << "D* = " << fmt(d) << " over " << pts.size() << " points\n";
      if (tol <= 0) return kExitPass;
      out << "verdict: " << (d <= tol ? "pass" : "fail") << "\n";
      return verdict(d <= tol);
    };
  }

  // weyl
  std::string poly = "0";
  {
    auto* c = add("weyl", "Weyl sum (1/N) sum z(n) e(P(n))");
    add_common(c, run, "JSON report path");
    add_source_options(c, so);
    c->add_option("--N", N);
    c->add_option("--poly", poly, "coefficients c0,c1,... of P");
    c->add_option("--tol", tol, "pass when |sum| <= tol (no verdict when unset)");
    commands["weyl"].handler = [&](Run& r) {
      const std::uint64_t n = default_terms(so, N);
      const auto b = build_source(so, r, n);
      const auto coeffs = real_list("--poly", poly);
      const auto s = equidist::weyl_sum(*b.src, coeffs, n);
      json j{{"source", b.info}, {"N", n}, {"poly", coeffs}, {"re", s.real()}, {"im", s.imag()},
             {"modulus", std::abs(s)}};
      if (tol > 0) j["pass"] = std::abs(s) <= tol;
      r.write(r.out, j.dump(2) + "\n");
      r.write_json(j);
      out << "|weyl| = " << fmt(std::abs(s)) << "\n";
      if (tol <= 0) return kExitPass;
      out << "verdict: " << (std::abs(s) <= tol ? "pass" : "fail") << "\n";
      return verdict(std::abs(s) <= tol);
    };
  }

  // generic
  int k_max = 3;
  std::string gen_alphabet = "2";
  std::uint32_t bins = 8;
  {
    auto* c = add("generic", "genericity test against the hat measure");
    add_common(c, run, "CSV of cylinder frequencies");
    add_source_options(c, so);
    c->add_option("--N", N);
    c->add_option("--k-max", k_max);
    c->add_option("--tol", tol, "largest allowed cylinder deviation (default 0.01)");
    c->add_option("--alphabet", gen_alphabet, "U(m) alphabet of the test, or circle");
    c->add_option("--bins", bins, "circle bins");
    commands["generic"].handler = [&](Run& r) {
      const std::uint64_t n = default_terms(so, N);
      const auto b = build_source(so, r, n);
      equidist::GenericityOptions go;
      go.m = alphabet("--alphabet", gen_alphabet);
      go.circle_bins = bins;
      const auto rep = equidist::genericity_test(*b.src, k_max, n, tol > 0 ? tol : 0.01, go);
      std::ostringstream os;
      equidist::write_genericity_csv(os, rep);
      r.write(r.out, os.str());
      json j = equidist::to_json(rep);
      j["source"] = b.info;
      r.write_json(j);
      out << "cylinders: " << rep.rows.size() << "  max deviation: " << fmt(rep.max_deviation)
          << "\nverdict: " << (rep.pass ? "pass" : "fail") << "\n";
      return verdict(rep.pass);
    };
  }

  // sarnak
  std::vector<std::string> systems;
  std::string chi;
  int char_bound = 1;
  std::string x0;
  {
    auto* c = add("sarnak", "correlations with zero-entropy observables");
    add_common(c, run, "CSV of test values");
    add_source_options(c, so);
    c->add_option("--N", N);
    c->add_option("--system", systems,
                  "rotation:a1,a2,..., unipotent, cycle:p or a catalog JSON (repeatable)");
    c->add_option("--char", chi, "character k1,k2,... (default: all non-zero |k_i| <= bound)");
    c->add_option("--char-bound", char_bound);
    c->add_option("--x0", x0, "start point coordinates (default origin)");
    c->add_option("--tol", tol, "pass when every modulus <= tol (default 0.05)");
    commands["sarnak"].handler = [&](Run& r) {
      const std::uint64_t n = default_terms(so, N);
      const auto b = build_source(so, r, n);
      std::vector<ortho::ZeroEntropySystem> sys;
      for (const auto& s : systems.empty() ? std::vector<std::string>{"rotation:sqrt(2)", "rotation:sqrt(2),sqrt(3)", "unipotent"} : systems)
        for (auto& z : parse_system(s)) sys.push_back(std::move(z));
      const double t = tol > 0 ? tol : 0.05;
      std::ostringstream os;
      os << "system,character,re,im,modulus\n";
      json rows = json::array();
      bool pass = true;
      double worst = 0;
      for (const auto& s : sys) {
        ortho::Point p;
        if (s.kind() == ortho::ZeroEntropySystem::Kind::PeriodicCycle) p = s.cycle_point(0);
        else if (x0.empty()) p = ortho::Point(s.dim(), 0);
        else p = ortho::make_point(real_list("--x0", x0));
        for (const auto& k : characters(s, chi, char_bound)) {
          const auto v = ortho::sarnak_test(*b.src, s, k, p, n);
          os << csv_quote(s.describe()) << ',' << csv_quote(char_label(k)) << ',' << fmt(v.real()) << ','
             << fmt(v.imag()) << ',' << fmt(std::abs(v)) << "\n";
          rows.push_back({{"system", s.describe()}, {"character", k.k}, {"re", v.real()}, {"im", v.imag()},
                          {"modulus", std::abs(v)}});
          pass = pass && std::abs(v) <= t;
          worst = std::max(worst, std::abs(v));
        }
      }
      r.write(r.out, os.str());
      r.write_json({{"source", b.info}, {"N", n}, {"tol", t}, {"pass", pass}, {"tests", rows}});
      out << "tests: " << rows.size() << "  worst modulus: " << fmt(worst) << "  tol: " << t
          << "\nverdict: " << (pass ? "pass" : "fail") << "\n";
      return verdict(pass);
    };
  }

  // momo
  std::uint64_t total = 100000;
  std::string momo_system = "rotation:sqrt(2)";
  {
    auto* c = add("momo", "(strong) orthogonality on moving orbits");
    add_common(c, run, "CSV of block sums");
    add_source_options(c, so);
    c->add_option("--total", total, "largest b_K of the triangular schedule");
    c->add_option("--system", momo_system, "rotation:..., unipotent or cycle:p");
    c->add_option("--char", chi, "character (default all ones)");
    c->add_option("--tol", tol, "pass when the strong value <= tol (default 0.05)");
    commands["momo"].handler = [&](Run& r) {
      const auto sys = parse_system(momo_system).at(0);
      const auto sched = ortho::BlockSchedule::triangular_up_to(total);
      const std::size_t K = sched.blocks();
      const auto b = build_source(so, r, sched.b.back());
      const ortho::Character k =
          chi.empty() ? ortho::Character{std::vector<std::int64_t>(sys.dim(), 1)} : ortho::Character{int_list("--char", chi)};
      const auto pts = ortho::random_points(sys, K, r.stream("cli.momo"));
      const auto rep = ortho::momo_test(*b.src, sys, k, sched, pts, K);
      const double t = tol > 0 ? tol : 0.05;
      std::ostringstream os;
      os << "block,b_k,re,im,modulus\n";
      for (std::size_t i = 0; i < rep.block_sums.size(); ++i)
        os << i << ',' << sched.b[i] << ',' << fmt(rep.block_sums[i].real()) << ',' << fmt(rep.block_sums[i].imag())
           << ',' << fmt(std::abs(rep.block_sums[i])) << "\n";
      r.write(r.out, os.str());
      const bool pass = rep.strong <= t;
      r.write_json({{"source", b.info}, {"system", sys.describe()}, {"character", k.k}, {"K", K},
                    {"length", rep.length}, {"plain", std::abs(rep.plain)}, {"strong", rep.strong},
                    {"tol", t}, {"pass", pass}});
      out << "K = " << K << "  b_K = " << rep.length << "  plain: " << fmt(std::abs(rep.plain))
          << "  strong: " << fmt(rep.strong) << "\nverdict: " << (pass ? "pass" : "fail") << "\n";
      return verdict(pass);
    };
  }

  // tree
  int depth = 6;
  std::size_t node_cap = 1u << 22;
  std::string dot;
  {
    auto* c = add("tree", "colored tree of a block map and its homogeneity");
    add_common(c, run, "JSON with the tree and the type counts");
    c->add_option("--map", so.map, "block map JSON")->required();
    c->add_option("--depth", depth);
    c->add_option("--node-cap", node_cap);
    c->add_option("--dot", dot, "Graphviz output path");
    commands["tree"].handler = [&](Run& r) {
      const auto bm = gen::BlockMap::load(so.map);
      const auto tree = momentcheck::build_tree(bm, depth, node_cap);
      const auto rep = momentcheck::homogeneity_check(tree, depth);
      const json report = momentcheck::to_json(rep, bm.m, bm.l);
      r.write(r.out, json{{"map", bm.name}, {"report", report}, {"tree", momentcheck::to_json(tree)}}.dump(2) + "\n");
      r.write_json(report);
      if (!dot.empty()) {
        std::ostringstream os;
        momentcheck::write_dot(os, tree);
        r.write(dot, os.str());
      }
      out << "map " << bm.name << ", " << tree.node_count() << " vertices to depth " << depth << "\n";
      for (const auto& lv : report["levels"]) {
        out << "level " << lv["level"].get<int>() << ":";
        for (const auto& [type, count] : lv["types"].items()) out << "  [" << type << "] " << count.get<std::uint64_t>();
        out << (lv["homogeneous"].get<bool>() ? "" : "  (unequal)") << "\n";
      }
      out << "homogeneous = " << (rep.homogeneous ? "true" : "false") << "\n";
      return verdict(rep.homogeneous);
    };
  }

  // moments
  std::vector<std::string> patterns;
  std::string indep;
  bool modulus = false;
  int word_cap = momentcheck::kWordCap;
  std::uint64_t samples = 100000, runs = 10;
  {
    auto* c = add("moments", "exact or Monte-Carlo pattern moments");
    add_common(c, run, "CSV of moments");
    add_source_options(c, so);
    c->add_option("--pattern", patterns, "pattern (a_1,...),(i_1,...) (repeatable)");
    c->add_option("--max-shift", max_shift, "enumerate patterns when no --pattern is given");
    c->add_option("--exps", exps, "exponent set for enumeration (default 0..m-1 for a map)");
    c->add_option("--independence", indep, "shifts for the factorization check");
    c->add_flag("--modulus", modulus, "factorize moduli instead of raw moments");
    c->add_option("--word-cap", word_cap);
    c->add_option("--samples", samples, "Monte-Carlo samples per run");
    c->add_option("--runs", runs, "Monte-Carlo runs");
    run.flags.insert("modulus");
    commands["moments"].handler = [&](Run& r) {
      std::optional<gen::BlockMap> bm;
      if (!so.map.empty() && (so.kind.empty() || so.kind == "blockmap")) bm = gen::BlockMap::load(so.map);
      std::ostringstream os;
      json j = json::object();
      bool pass = true;
      if (!indep.empty()) {
        if (!bm) bad("--independence", "needs --map");
        const auto shifts = int_list("--independence", indep);
        const auto rep = momentcheck::independence_factor_check(*bm, shifts, modulus, word_cap);
        os << "exponents,joint,product,holds\n";
        json rows = json::array();
        for (const auto& fc : rep.checks) {
          const std::string e = char_label(ortho::Character{fc.exponents});
          os << csv_quote(e) << ',' << csv_quote(fc.joint.to_string()) << ',' << csv_quote(fc.product.to_string())
             << ',' << (fc.holds ? "true" : "false") << "\n";
          rows.push_back({{"exponents", fc.exponents}, {"joint", fc.joint.to_string()},
                          {"product", fc.product.to_string()}, {"holds", fc.holds}});
          if (!fc.holds || rep.checks.size() <= 8)
            out << e << ": joint " << fc.joint.to_string() << " vs product " << fc.product.to_string() << "\n";
        }
        pass = rep.independent;
        j = {{"map", bm->name}, {"shifts", shifts}, {"use_modulus", modulus}, {"independent", pass}, {"checks", rows}};
        out << "independent = " << (pass ? "true" : "false") << "\n";
      } else {
        std::vector<Pattern> ps;
        for (const auto& s : patterns) ps.push_back(parse_pattern(s));
        std::optional<Built> b;
        if (!bm) b = build_source(so, r, samples * runs + static_cast<std::uint64_t>(64));
        if (ps.empty()) {
          std::vector<std::int64_t> e;
          if (bm && !r.app->get_option("--exps")->count()) {
            for (std::int64_t k = 0; k < static_cast<std::int64_t>(bm->m); ++k) e.push_back(k);
          } else {
            e = int_list("--exps", exps);
          }
          const std::optional<IndexBound> idx = bm ? std::optional<IndexBound>(IndexBound::finite(bm->m))
                                                   : b->src->declared_index();
          ps = correlate::enumerate_patterns(max_shift, e, idx);
        }
        os << "pattern,method,re,im,exact,stderr\n";
        json rows = json::array();
        for (const auto& p : ps) {
          const bool exact = bm && p.max_shift() + bm->l <= word_cap;
          std::complex<double> v;
          std::string text;
          double se = 0;
          bool zero = false;
          if (exact) {
            const auto cs = momentcheck::exact_moment(*bm, p, word_cap);
            v = cs.value();
            text = cs.to_string();
            zero = cs.is_zero();
          } else {
            const auto src = bm ? gen::blockmap_source(*bm, r.stream("cli.blockmap")) : b->src;
            const auto mc = momentcheck::mc_moment(*src, p, samples, runs, r.stream("cli.moments"));
            v = mc.mean;
            se = mc.std_error;
            zero = std::abs(v) <= 3 * se;
          }
          pass = pass && zero;
          os << csv_quote(p.to_string()) << ',' << (exact ? "exact" : "statistical") << ',' << fmt(v.real()) << ','
             << fmt(v.imag()) << ',' << csv_quote(text) << ',' << fmt(se) << "\n";
          rows.push_back({{"pattern", p.to_string()}, {"method", exact ? "exact" : "statistical"}, {"re", v.real()},
                          {"im", v.imag()}, {"exact", text}, {"stderr", se}, {"vanishes", zero}});
          if (ps.size() <= 16 || !zero)
            out << p.to_string() << " = " << (exact ? text : fmt(std::abs(v)) + " +- " + fmt(se))
                << (exact ? "" : " (statistical)") << "\n";
        }
        j = {{"moments", rows}, {"all_vanish", pass}};
        out << "patterns: " << ps.size() << "  all vanish = " << (pass ? "true" : "false") << "\n";
      }
      r.write(r.out, os.str());
      r.write_json(j);
      return verdict(pass);
    };
  }

  // koksma
  std::string kg = "one";
  double ka = 1.1, kb = 2.5;
  int m_start = 1, pairs = 200, grid = 2001;
  {
    auto* c = add("koksma", "numeric evidence for the Koksma hypotheses on x^n g(x)");
    add_common(c, run, "JSON report path");
    c->add_option("--g", kg);
    c->add_option("--a", ka);
    c->add_option("--b", kb);
    c->add_option("--m-start", m_start);
    c->add_option("--pairs", pairs, "pair budget");
    c->add_option("--grid", grid, "grid points");
    commands["koksma"].handler = [&](Run& r) {
      const auto rep = bigphase::koksma_check(bigphase::GFunc::parse(kg), ka, kb, m_start, pairs, grid);
      json j{{"label", rep.label}, {"a", rep.a}, {"b", rep.b}, {"m_start", rep.m_start}, {"m_end", rep.m_end},
             {"grid_points", rep.grid_points}, {"pairs", rep.pairs}, {"min_abs_d1", rep.min_abs_d1},
             {"argmin", {rep.argmin_m, rep.argmin_n, rep.argmin_x}},
             {"condition2_positive", rep.condition2_positive}, {"monotone_pairs", rep.monotone_pairs},
             {"all_monotone", rep.all_monotone}};
      j["bound_m"] = rep.bound_m ? json(*rep.bound_m) : json(nullptr);
      const bool pass = rep.condition2_positive && rep.all_monotone;
      j["pass"] = pass;
      r.write(r.out, j.dump(2) + "\n");
      r.write_json(j);
      out << rep.label << ": pairs " << rep.pairs << "  min |d1| = " << fmt(rep.min_abs_d1) << "  monotone "
          << rep.monotone_pairs << "/" << rep.pairs << "\nverdict: " << (pass ? "pass" : "fail") << "\n";
      return verdict(pass);
    };
  }

  // replay
  std::string replay_path, replay_out, replay_json, replay_manifest;
  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("path", replay_path, "manifest JSON")->required();
  replay->add_option("--out", replay_out, "override the primary output path");
  replay->add_option("--json", replay_json, "override the JSON report path");
  replay->add_option("--manifest", replay_manifest, "override the manifest path");

  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--threads" || a == "--config") {
      ++i;
      continue;
    }
    if (a.empty() || a[0] == '-') continue;
    if (!commands.count(a) && a != "replay") {
      err << "usage error: unknown subcommand '" << a << "'\n";
      return kExitUsage;
    }
    break;
  }

  std::vector<const char*> argv{"chowla_lab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitPass;
  } catch (const CLI::CallForVersion&) {
    out << CHOWLA_LAB_VERSION << "\n";
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (threads <= 0)
    if (const char* env = std::getenv("CHOWLA_LAB_THREADS")) threads = std::atoi(env);
  set_thread_limit(threads);

  if (replay->parsed()) {
    try {
      std::ifstream is(replay_path);
      if (!is) throw Error(ErrorCode::IoError, "cannot read " + replay_path);
      const json m = json::parse(is);
      json cfg = m.at("config");
      if (!replay_out.empty()) cfg["out"] = replay_out;
      if (!replay_json.empty()) cfg["json"] = replay_json;
      if (!replay_manifest.empty()) cfg["manifest"] = replay_manifest;
      std::vector<std::string> again;
      if (threads > 0) again.push_back("--threads=" + std::to_string(threads));
      again.push_back(m.at("command").get<std::string>());
      for (const auto& [key, value] : cfg.items()) {
        if (value.is_boolean()) {
          if (value.get<bool>()) again.push_back("--" + key);
        } else if (value.is_array()) {
          for (const auto& v : value) again.push_back("--" + key + "=" + v.get<std::string>());
        } else {
          again.push_back("--" + key + "=" + value.get<std::string>());
        }
      }
      return cli::run(again, out, err);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitError;
    }
  }

  for (auto& [name, cmd] : commands) {
    if (!cmd.app->parsed()) continue;
    run.command = name;
    run.app = cmd.app;
    const auto t0 = std::chrono::steady_clock::now();
    int code = kExitError;
    try {
      code = cmd.handler(run);
    } catch (const CLI::ParseError& e) {
      err << "usage error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return kExitError;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitError;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string mpath = run.manifest;
    if (mpath.empty() && !run.out.empty()) mpath = run.out + ".manifest.json";
    if (!mpath.empty() && mpath != "none") {
      json cfg = run.config();
      cfg.erase("config");
      cfg.erase("manifest");
      const json man{{"tool", "chowla_lab"},
                     {"version", CHOWLA_LAB_VERSION},
                     {"command", run.command},
                     {"config", cfg},
                     {"seed", run.seed},
                     {"substreams", run.substreams},
                     {"source", run.source},
                     {"precision", run.precision},
                     {"threads", thread_limit()},
                     {"wall_time_s", wall},
                     {"exit_code", code},
                     {"outputs", run.outputs}};
      try {
        run.write(mpath, man.dump(2) + "\n");
      } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
      }
    }
    return code;
  }
  return kExitUsage;
}

}  // namespace chowla::cli
