// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "axllm/quantizer.hpp"

namespace axllm {

/// Per-lane memo table: cell k holds k * X for the resident input X.
/// Product is int16_t for 8-bit inputs; the LoRA B pass feeds 32-bit
/// intermediates and uses a wider product type.
template <class Product>
class BasicResultCache {
 public:
  static constexpr std::size_t size() { return kCacheEntries; }

  void clear() { valid_.reset(); }
  bool valid(std::uint8_t index) const { return valid_.test(index); }
  Product product(std::uint8_t index) const { return products_[index]; }
  void fill(std::uint8_t index, Product p) {
    products_[index] = p;
    valid_.set(index);
  }
  std::size_t valid_count() const { return valid_.count(); }

 private:
  std::array<Product, kCacheEntries> products_{};
  std::bitset<kCacheEntries> valid_;
};

using ResultCache = BasicResultCache<std::int16_t>;

struct TileConfig {
  std::size_t tile_cols = 256;

  void validate() const;
};

struct ReuseStats {
  std::uint64_t multiplications = 0;
  std::uint64_t reuses = 0;
  /// unique_histogram[u] = number of (input element, tile) row passes that
  /// needed exactly u multiplications. Always kCacheEntries + 1 long.
  std::vector<std::uint64_t> unique_histogram = std::vector<std::uint64_t>(kCacheEntries + 1);

  std::uint64_t processed() const { return multiplications + reuses; }
  ReuseStats& operator+=(const ReuseStats& other);
  ReuseStats scaled(std::uint64_t factor) const;

  friend bool operator==(const ReuseStats&, const ReuseStats&) = default;
};

/// Fraction of partial products served from the cache. Rejects an empty tally.
double reuse_rate(const ReuseStats& stats);

struct RowProducts {
  std::vector<std::int16_t> products;
  ReuseStats stats;
};

/// One input element against one row segment. The cache must be clear or
/// already populated by the same x_elem.
RowProducts reuse_row(std::int8_t x_elem, std::span<const std::int8_t> w_row,
                      ResultCache& rc);

/// Same walk as reuse_row, accumulating x_elem * w_row into acc in place.
/// Returns the number of multiplications; reuses = w_row.size() - mults.
std::uint32_t reuse_row_accumulate(std::int8_t x_elem, std::span<const std::int8_t> w_row,
                                   ResultCache& rc, std::span<std::int32_t> acc);

struct MvmResult {
  std::vector<std::int32_t> output;
  ReuseStats stats;
};

/// Exact y[j] = sum_i x[i] * w[i][j], the comparison oracle.
std::vector<std::int32_t> naive_mvm(const QuantizedVector& x, const QuantizedMatrix& w);

/// Input-stationary, tiled, cache-backed vector-matrix product.
MvmResult reuse_mvm(const QuantizedVector& x, const QuantizedMatrix& w,
                    const TileConfig& tile = {});

/// Column-wise [W | A]. Both must share row count and scale.
QuantizedMatrix combine_lora(const QuantizedMatrix& w, const QuantizedMatrix& a);

struct LoraResult {
  std::vector<std::int64_t> output;
  ReuseStats fused_stats;    // x . [W | A]
  ReuseStats adaptor_stats;  // t . B
};

/// x W + (x A) B with [W | A] fused into one reuse pass and t = x A fed
/// through a second reuse pass over B.
LoraResult lora_mvm(const QuantizedVector& x, const QuantizedMatrix& w,
                    const QuantizedMatrix& a, const QuantizedMatrix& b,
                    const TileConfig& tile = {});

/// Exact x W + (x A) B in 64-bit arithmetic, the LoRA oracle.
std::vector<std::int64_t> naive_lora(const QuantizedVector& x, const QuantizedMatrix& w,
                                     const QuantizedMatrix& a, const QuantizedMatrix& b);

/// Mean over rows of the fraction of A's entries whose magnitude already
/// appears in the same row of W.
double row_overlap_rate(const QuantizedMatrix& w, const QuantizedMatrix& a);

}  // namespace axllm
