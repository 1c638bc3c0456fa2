#pragma once

// Hot loops in two flavours. The serial versions are the reference; the omp
// versions partition work into the same kReduceBlock blocks and merge in
// block order, so both return bit-identical results.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "chowla/core.hpp"

namespace chowla::kernels {

using Complex = std::complex<double>;

namespace serial {

/// Per-block sums of prod_s z[n + a_s]^(i_s) over n < n_terms.
std::vector<Complex> correlation_blocks(std::span<const UnitValue> z, const Pattern& p,
                                        std::uint64_t n_terms);
Complex correlation_sum(std::span<const UnitValue> z, const Pattern& p, std::uint64_t n_terms);

/// sum_n a[n] * b[n] over min(|a|, |b|) terms.
Complex product_sum(std::span<const UnitValue> a, std::span<const UnitValue> b);

/// Histogram of the base-`base` codes of windows codes[n .. n+k), n < n_windows.
std::vector<std::uint64_t> cylinder_counts(std::span<const std::uint32_t> codes, int k,
                                           std::uint32_t base, std::uint64_t n_windows);

/// sum_{bounds[j] <= n < bounds[j+1]} z[n] * f[n] for each j.
std::vector<Complex> block_sums(std::span<const UnitValue> z, std::span<const UnitValue> f,
                                std::span<const std::uint64_t> bounds);

}  // namespace serial

namespace omp {

std::vector<Complex> correlation_blocks(std::span<const UnitValue> z, const Pattern& p,
                                        std::uint64_t n_terms);
Complex correlation_sum(std::span<const UnitValue> z, const Pattern& p, std::uint64_t n_terms);
Complex product_sum(std::span<const UnitValue> a, std::span<const UnitValue> b);
std::vector<std::uint64_t> cylinder_counts(std::span<const std::uint32_t> codes, int k,
                                           std::uint32_t base, std::uint64_t n_windows);
std::vector<Complex> block_sums(std::span<const UnitValue> z, std::span<const UnitValue> f,
                                std::span<const std::uint64_t> bounds);

}  // namespace omp

/// Ordered sum of block partials.
Complex sum_blocks(std::span<const Complex> blocks);

/// Number of cells base^k, or 0 when it exceeds `cap`.
std::uint64_t cell_count(std::uint32_t base, int k, std::uint64_t cap);

}  // namespace chowla::kernels
