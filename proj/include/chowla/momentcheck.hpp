#pragma once

// The colored tree T_G of a block map and its homogeneity check, exact
// stationary moments over Q(zeta_m), moment factorization, and Monte-Carlo
// moments for sources without a block-map form.

#include <gmpxx.h>

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chowla/core.hpp"
#include "chowla/generators.hpp"

namespace chowla::momentcheck {

/// sum_j c_j zeta_m^j with rational c_j, zeta_m = e(1/m).
class CycloSum {
 public:
  explicit CycloSum(std::uint32_t m = 1);
  static CycloSum rational(const mpq_class& q, std::uint32_t m = 1);

  std::uint32_t m() const { return m_; }
  const std::vector<mpq_class>& coeffs() const { return c_; }
  mpq_class& operator[](std::size_t j) { return c_.at(j); }

  /// Exact, by reduction modulo the cyclotomic polynomial Phi_m.
  bool is_zero() const;
  /// The value as a rational when it lies in Q.
  std::optional<mpq_class> as_rational() const;
  std::complex<double> value() const;
  std::string to_string() const;

  friend CycloSum operator+(const CycloSum& a, const CycloSum& b);
  friend CycloSum operator-(const CycloSum& a, const CycloSum& b);
  friend CycloSum operator*(const CycloSum& a, const CycloSum& b);
  friend bool operator==(const CycloSum& a, const CycloSum& b) { return (a - b).is_zero(); }

 private:
  /// Coefficients reduced modulo Phi_m, degree < phi(m).
  std::vector<mpq_class> reduced() const;
  std::uint32_t m_;
  std::vector<mpq_class> c_;
};

/// Phi_m with integer coefficients, constant term first.
std::vector<mpz_class> cyclotomic(std::uint32_t m);

inline constexpr int kBlack = -1;

struct TreeVertex {
  std::uint32_t symbol = 0;
  std::int64_t parent = -1;
  /// Root index k of the incoming edge value e(k/m), or kBlack.
  int color = kBlack;
};

struct ColoredTree {
  std::vector<std::string> alphabet;
  int l = 1;
  std::uint32_t m = 2;
  int depth = 0;
  /// levels[k] holds the vertices at depth k; levels[0] is the root.
  std::vector<std::vector<TreeVertex>> levels;

  std::vector<std::uint32_t> word(int level, std::size_t v) const;
  /// Colors of the edges into levels l..level along the branch.
  std::vector<int> branch_type(int level, std::size_t v) const;
  std::size_t node_count() const;
};

/// Throws NodeCapExceeded once more than `node_cap` vertices are built.
ColoredTree build_tree(const gen::BlockMap& bm, int depth, std::size_t node_cap = 1u << 22);

struct LevelTypes {
  int level = 0;
  /// counts[t] for type t encoded base m, first edge most significant.
  std::vector<std::uint64_t> counts;
  std::uint64_t branches = 0;
  bool homogeneous = true;
};

struct HomogeneityReport {
  bool homogeneous = true;
  std::vector<LevelTypes> levels;
};

/// Per level k in [l, depth]: every color word over U(m) of length k-l+1
/// occurs, all equally often. Levels without branches pass.
HomogeneityReport homogeneity_check(const ColoredTree& tree, int depth);

nlohmann::json to_json(const ColoredTree& tree);
nlohmann::json to_json(const HomogeneityReport& r, std::uint32_t m, int l);
/// Graphviz digraph with one node per vertex and colored edges.
void write_dot(std::ostream& os, const ColoredTree& tree);

inline constexpr int kWordCap = 12;

/// E[prod_s Z_{a_s}^(i_s)] under the product measure of the symbol weights,
/// exponents reduced mod m. Throws WordCapExceeded when a_r + l > word_cap.
CycloSum exact_moment(const gen::BlockMap& bm, const Pattern& p, int word_cap = kWordCap);

namespace serial {
CycloSum exact_moment(const gen::BlockMap& bm, const Pattern& p, int word_cap = kWordCap);
}

struct FactorCheck {
  std::vector<std::int64_t> exponents;
  CycloSum joint;
  CycloSum product;
  bool holds = true;
};

struct IndependenceReport {
  std::vector<std::int64_t> shifts;
  bool use_modulus = false;
  bool independent = true;
  std::vector<FactorCheck> checks;
  std::vector<FactorCheck> violations() const;
};

/// use_modulus: E[prod |Z_{a_s}|] against prod E[|Z_{a_s}|]. Otherwise every
/// exponent tuple in {0..m-1}^r.
IndependenceReport independence_factor_check(const gen::BlockMap& bm,
                                             std::span<const std::int64_t> shifts,
                                             bool use_modulus, int word_cap = kWordCap);

struct McMoment {
  std::complex<double> mean;
  double std_error = 0;
  std::uint64_t samples = 0;
  std::uint64_t runs = 0;
  /// Runs came from reseeded copies; otherwise disjoint windows of one
  /// deterministic sequence.
  bool reseeded = true;
};

/// Mean over `runs` draws of the time average of the pattern product over
/// `samples` terms, with the standard error of the run means (within-run
/// term variance when runs == 1).
McMoment mc_moment(const SequenceSource& src, const Pattern& p, std::uint64_t samples,
                   std::uint64_t runs, std::uint64_t seed);

}  // namespace chowla::momentcheck
