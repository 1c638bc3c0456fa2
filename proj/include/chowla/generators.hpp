#pragma once

// Concrete sequence sources: power phases, i.i.d. roots of unity, the hat
// sampler, block maps over product measures, the piecewise circle map and
// file replay.

#include <gmpxx.h>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chowla/bigphase.hpp"
#include "chowla/core.hpp"

namespace chowla::gen {

/// Finite m, or the whole circle when nullopt.
using Alphabet = std::optional<std::uint32_t>;

/// z(n) = e(frac(beta^(n + burn_in) g(beta))).
SourcePtr power_phase_source(std::shared_ptr<const bigphase::PhaseStream> stream,
                             std::uint64_t burn_in = 0);

/// z(n) = 0 with probability zero_prob, otherwise uniform on U(m) (or S^1).
SourcePtr iid_source(Alphabet m, double zero_prob, std::uint64_t seed);

/// z(n) = x(n) y(n): x i.i.d. uniform on U(m), y the {0,1}-valued support.
/// Finite supports are checked up front, unbounded ones on evaluation.
SourcePtr hat_source(SourcePtr support, Alphabet m, std::uint64_t seed);

/// e(n alpha), exact in 2^-128 turn arithmetic.
SourcePtr linear_phase_source(double alpha);
SourcePtr constant_source(UnitValue v);
/// (-1)^n.
SourcePtr alternating_source();
/// 1, 0, 1, 0, ...
SourcePtr alternating_support_source();

struct BlockMap {
  std::string name = "blockmap";
  std::vector<std::string> alphabet;
  int l = 1;
  /// Row-major over words x_0 ... x_{l-1} with x_0 most significant.
  std::vector<UnitValue> table;
  std::vector<mpq_class> weights;
  /// Values lie in U(m) ∪ {0}.
  std::uint32_t m = 2;

  std::size_t symbols() const { return alphabet.size(); }
  std::size_t words() const;
  std::size_t word_index(std::span<const std::uint32_t> word) const;
  const UnitValue& value(std::span<const std::uint32_t> word) const {
    return table[word_index(word)];
  }
  /// Root index k of value = e(k/m); nullopt for the zero value.
  std::optional<std::uint32_t> root_index(std::size_t word_idx) const;
  bool uniform_weights() const;
  std::uint32_t symbol(const std::string& name) const;

  /// Throws InvalidArgument on a partial table, bad weights or values
  /// outside U(m) ∪ {0}.
  void validate() const;

  /// {"name", "alphabet", "l", "m"?, "weights"?, "table": [[word, phase, is_zero], ...]}.
  /// Weights may be numbers or "p/q" strings; phases likewise. Omitted
  /// weights mean uniform; omitted words map to 0.
  static BlockMap from_json(const nlohmann::json& doc);
  static BlockMap load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// The star map on U(m) ∪ {0, *}: g(a, b) = a if a ∈ U(m) and b = *, else 0,
/// with weights 1/(2m) on each root, 0 on 0 and 1/2 on *.
BlockMap star_map(std::uint32_t m);
/// Alphabet {0,1,2}: g(0,1) = 1, g(1,2) = -1, 0 otherwise; uniform weights.
BlockMap sarnak_not_chowla_map();

/// Symbols x_n drawn i.i.d. from the weights; z(n) = table(x_n ... x_{n+l-1}).
SourcePtr blockmap_source(const BlockMap& bm, std::uint64_t seed);

/// The four-piece map on [0,1).
double piecewise_h(double t);
/// e(h(t_n)) with t_n i.i.d. uniform.
SourcePtr piecewise_circle_source(std::uint64_t seed);

enum class FileFormat { Auto, Csv, Binary };

/// CSV: optional "# length=N" line, optional header; columns (phase, is_zero),
/// (n, phase, is_zero) or the phase-stream layout (n, frac, err_bound). Binary:
/// the phase-stream layout. Phases within 2^-60 of a fraction with
/// denominator <= 2^16 are stored exactly.
SourcePtr file_source(const std::filesystem::path& path, FileFormat format = FileFormat::Auto);
SourcePtr csv_source(std::istream& is, const std::string& label = "csv");

/// Writes "n,phase,is_zero" rows with 20-digit phases.
void write_csv(std::ostream& os, const SequenceSource& src, std::uint64_t n);

}  // namespace chowla::gen
