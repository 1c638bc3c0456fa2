#pragma once

// Random block maps for the tree/moment equivalence checks.

#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "chowla/generators.hpp"
#include "chowla/rng.hpp"

namespace chowla::testing {

inline gen::BlockMap uniform_map(std::uint32_t a, int l, std::uint32_t m) {
  gen::BlockMap bm;
  for (std::uint32_t i = 0; i < a; ++i) bm.alphabet.push_back(std::to_string(i));
  bm.l = l;
  bm.m = m;
  bm.table.assign(static_cast<std::size_t>(std::pow(a, l)), UnitValue::zero());
  bm.weights.assign(a, mpq_class(1, a));
  return bm;
}

/// Every row over the last symbol carries c non-zero entries of each color.
inline gen::BlockMap balanced_map(const CounterRng& rng, std::uint64_t trial, std::uint32_t a, int l,
                                  std::uint32_t m) {
  gen::BlockMap bm = uniform_map(a, l, m);
  const std::uint32_t c = 1 + static_cast<std::uint32_t>(rng.below(a / m, trial, 1));
  const std::size_t rows = bm.table.size() / a;
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::uint32_t> perm(a);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::uint32_t i = a - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.below(i + 1, trial * 1000 + r, 10 + i)]);
    for (std::uint32_t j = 0; j < c * m; ++j)
      bm.table[r * a + perm[j]] = UnitValue::root_of_unity(j % m, m);
  }
  return bm;
}

inline gen::BlockMap random_map(const CounterRng& rng, std::uint64_t trial, std::uint32_t a, int l,
                                std::uint32_t m) {
  gen::BlockMap bm = uniform_map(a, l, m);
  for (std::size_t i = 0; i < bm.table.size(); ++i) {
    const auto v = rng.below(m + 1, trial, 100 + i);
    if (v < m) bm.table[i] = UnitValue::root_of_unity(static_cast<std::int64_t>(v), m);
  }
  return bm;
}

/// Thirds: free random tables, balanced maps, balanced maps with one entry
/// flipped. |A| <= 4, l <= 2, m in {2, 3}.
inline gen::BlockMap mixed_map(const CounterRng& rng, std::uint64_t trial) {
  const std::uint32_t m = 2 + static_cast<std::uint32_t>(rng.below(2, trial, 0));
  const std::uint32_t a = m + static_cast<std::uint32_t>(rng.below(5 - m, trial, 2));
  const int l = 1 + static_cast<int>(rng.below(2, trial, 3));
  switch (trial % 3) {
    case 0: return random_map(rng, trial, a, l, m);
    case 1: return balanced_map(rng, trial, a, l, m);
    default: {
      auto bm = balanced_map(rng, trial, a, l, m);
      const auto i = rng.below(bm.table.size(), trial, 4);
      bm.table[i] = bm.table[i].is_zero() ? UnitValue::root_of_unity(1, m) : UnitValue::zero();
      return bm;
    }
  }
}

}  // namespace chowla::testing
