#include "chowla/kernels.hpp"

#include <algorithm>
#include <string>

#include "chowla/parallel.hpp"

namespace chowla::kernels {

namespace {

std::uint64_t block_count(std::uint64_t n) { return (n + kReduceBlock - 1) / kReduceBlock; }

void check_window(std::span<const UnitValue> z, const Pattern& p, std::uint64_t n_terms) {
  if (n_terms > 0 && z.size() < n_terms + static_cast<std::uint64_t>(p.max_shift()))
    throw Error(ErrorCode::SourceTooShort,
                "correlation needs " + std::to_string(n_terms + p.max_shift()) + " terms, have " +
                    std::to_string(z.size()));
}

Complex correlation_block(std::span<const UnitValue> z, const Pattern& p, std::uint64_t lo,
                          std::uint64_t hi) {
  Complex acc = 0;
  const std::size_t r = p.size();
  for (std::uint64_t n = lo; n < hi; ++n) {
    UnitValue t = z[n + p.shifts[0]].pow(p.exponents[0]);
    for (std::size_t s = 1; s < r && !t.is_zero(); ++s)
      t = t * z[n + p.shifts[s]].pow(p.exponents[s]);
    if (!t.is_zero()) acc += t.value();
  }
  return acc;
}

Complex product_block(std::span<const UnitValue> a, std::span<const UnitValue> b,
                      std::uint64_t lo, std::uint64_t hi) {
  Complex acc = 0;
  for (std::uint64_t n = lo; n < hi; ++n) {
    const UnitValue t = a[n] * b[n];
    if (!t.is_zero()) acc += t.value();
  }
  return acc;
}

std::uint64_t window_code(std::span<const std::uint32_t> codes, std::uint64_t n, int k,
                          std::uint32_t base) {
  std::uint64_t c = 0;
  for (int j = 0; j < k; ++j) c = c * base + codes[n + j];
  return c;
}

void check_cylinders(std::span<const std::uint32_t> codes, int k, std::uint32_t base,
                     std::uint64_t n_windows) {
  if (k < 1 || base < 1) throw Error(ErrorCode::InvalidArgument, "cylinder depth and base must be positive");
  if (n_windows > 0 && codes.size() < n_windows + k - 1)
    throw Error(ErrorCode::SourceTooShort, "not enough codes for the requested windows");
}

void check_bounds(std::span<const UnitValue> z, std::span<const UnitValue> f,
                  std::span<const std::uint64_t> bounds) {
  for (std::size_t j = 1; j < bounds.size(); ++j)
    if (bounds[j] < bounds[j - 1]) throw Error(ErrorCode::InvalidArgument, "block bounds must increase");
  if (!bounds.empty() && (z.size() < bounds.back() || f.size() < bounds.back()))
    throw Error(ErrorCode::SourceTooShort, "block bounds exceed the data");
}

}  // namespace

Complex sum_blocks(std::span<const Complex> blocks) {
  Complex acc = 0;
  for (const Complex& b : blocks) acc += b;
  return acc;
}

std::uint64_t cell_count(std::uint32_t base, int k, std::uint64_t cap) {
  std::uint64_t cells = 1;
  for (int j = 0; j < k; ++j) {
    if (cells > cap / std::max<std::uint32_t>(base, 1)) return 0;
    cells *= base;
  }
  return cells <= cap ? cells : 0;
}

namespace serial {

std::vector<Complex> correlation_blocks(std::span<const UnitValue> z, const Pattern& p,
                                        std::uint64_t n_terms) {
  check_window(z, p, n_terms);
  std::vector<Complex> out(block_count(n_terms));
  for (std::uint64_t b = 0; b < out.size(); ++b) {
    const std::uint64_t lo = b * kReduceBlock;
    out[b] = correlation_block(z, p, lo, std::min(lo + kReduceBlock, n_terms));
  }
  return out;
}

Complex correlation_sum(std::span<const UnitValue> z, const Pattern& p, std::uint64_t n_terms) {
  return sum_blocks(correlation_blocks(z, p, n_terms));
}

Complex product_sum(std::span<const UnitValue> a, std::span<const UnitValue> b) {
  const std::uint64_t n = std::min(a.size(), b.size());
  Complex acc = 0;
  for (std::uint64_t lo = 0; lo < n; lo += kReduceBlock)
    acc += product_block(a, b, lo, std::min(lo + kReduceBlock, n));
  return acc;
}

std::vector<std::uint64_t> cylinder_counts(std::span<const std::uint32_t> codes, int k,
                                           std::uint32_t base, std::uint64_t n_windows) {
  check_cylinders(codes, k, base, n_windows);
  std::vector<std::uint64_t> counts(cell_count(base, k, UINT64_MAX));
  for (std::uint64_t n = 0; n < n_windows; ++n) ++counts[window_code(codes, n, k, base)];
  return counts;
}

std::vector<Complex> block_sums(std::span<const UnitValue> z, std::span<const UnitValue> f,
                                std::span<const std::uint64_t> bounds) {
  check_bounds(z, f, bounds);
  std::vector<Complex> out(bounds.empty() ? 0 : bounds.size() - 1);
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = product_block(z, f, bounds[j], bounds[j + 1]);
  return out;
}

}  // namespace serial

namespace omp {

std::vector<Complex> correlation_blocks(std::span<const UnitValue> z, const Pattern& p,
                                        std::uint64_t n_terms) {
  check_window(z, p, n_terms);
  std::vector<Complex> out(block_count(n_terms));
  const auto blocks = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::uint64_t lo = static_cast<std::uint64_t>(b) * kReduceBlock;
    out[b] = correlation_block(z, p, lo, std::min(lo + kReduceBlock, n_terms));
  }
  return out;
}

Complex correlation_sum(std::span<const UnitValue> z, const Pattern& p, std::uint64_t n_terms) {
  return sum_blocks(correlation_blocks(z, p, n_terms));
}

Complex product_sum(std::span<const UnitValue> a, std::span<const UnitValue> b) {
  const std::uint64_t n = std::min(a.size(), b.size());
  return blocked_reduce(n, Complex(0), [&](std::uint64_t lo, std::uint64_t hi) {
    return product_block(a, b, lo, hi);
  });
}

std::vector<std::uint64_t> cylinder_counts(std::span<const std::uint32_t> codes, int k,
                                           std::uint32_t base, std::uint64_t n_windows) {
  check_cylinders(codes, k, base, n_windows);
  const std::uint64_t cells = cell_count(base, k, UINT64_MAX);
  std::vector<std::uint64_t> counts(cells);
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(cells);
#pragma omp for schedule(static)
    for (std::int64_t n = 0; n < static_cast<std::int64_t>(n_windows); ++n)
      ++local[window_code(codes, static_cast<std::uint64_t>(n), k, base)];
#pragma omp critical
    for (std::uint64_t c = 0; c < cells; ++c) counts[c] += local[c];
  }
  return counts;
}

std::vector<Complex> block_sums(std::span<const UnitValue> z, std::span<const UnitValue> f,
                                std::span<const std::uint64_t> bounds) {
  check_bounds(z, f, bounds);
  std::vector<Complex> out(bounds.empty() ? 0 : bounds.size() - 1);
  const auto blocks = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t j = 0; j < blocks; ++j) out[j] = product_block(z, f, bounds[j], bounds[j + 1]);
  return out;
}

}  // namespace omp

}  // namespace chowla::kernels
