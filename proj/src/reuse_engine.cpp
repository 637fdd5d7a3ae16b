// SPDX-License-Identifier: Apache-2.0
#include "axllm/reuse_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "axllm/error.hpp"

namespace axllm {

void TileConfig::validate() const {
  if (tile_cols == 0) throw InvalidArgument("TileConfig: tile_cols must be >= 1");
}

ReuseStats& ReuseStats::operator+=(const ReuseStats& other) {
  multiplications += other.multiplications;
  reuses += other.reuses;
  for (std::size_t i = 0; i < unique_histogram.size(); ++i) {
    unique_histogram[i] += other.unique_histogram[i];
  }
  return *this;
}

ReuseStats ReuseStats::scaled(std::uint64_t factor) const {
  ReuseStats s = *this;
  s.multiplications *= factor;
  s.reuses *= factor;
  for (auto& h : s.unique_histogram) h *= factor;
  return s;
}

double reuse_rate(const ReuseStats& stats) {
  if (stats.processed() == 0) throw InvalidArgument("reuse_rate: no processed weights");
  return double(stats.reuses) / double(stats.processed());
}

namespace {

// Walks one row segment through the cache, adding sign * |u| * x into acc.
// Returns the multiplication count for the segment.
template <class In, class Product, class Acc>
std::uint32_t walk_row(In x, std::span<const std::int8_t> row, BasicResultCache<Product>& rc,
                       std::span<Acc> acc) {
  std::uint32_t mults = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const CacheSlot slot = rc_index(row[j]);
    if (!rc.valid(slot.index)) {
      rc.fill(slot.index, static_cast<Product>(Product(slot.index) * Product(x)));
      ++mults;
    }
    acc[j] += static_cast<Acc>(slot.sign) * static_cast<Acc>(rc.product(slot.index));
  }
  return mults;
}

void check_rows(std::size_t x_len, const QuantizedMatrix& w, const char* who) {
  w.validate();
  if (x_len != w.rows) {
    std::ostringstream os;
    os << who << ": input length " << x_len << " != weight rows " << w.rows;
    throw InvalidArgument(os.str());
  }
}

void record_pass(ReuseStats& stats, std::uint32_t mults, std::size_t width) {
  stats.multiplications += mults;
  stats.reuses += width - mults;
  ++stats.unique_histogram[mults];
}

// Tiled input-stationary pass shared by the 8-bit path and the wide B pass.
template <class In, class Product, class Acc>
ReuseStats tiled_pass(std::span<const In> x, const QuantizedMatrix& w, const TileConfig& tile,
                      std::span<Acc> out) {
  tile.validate();
  ReuseStats stats;
  BasicResultCache<Product> rc;
  for (std::size_t c0 = 0; c0 < w.cols; c0 += tile.tile_cols) {
    const std::size_t width = std::min(tile.tile_cols, w.cols - c0);
    for (std::size_t i = 0; i < w.rows; ++i) {
      rc.clear();
      const auto seg = w.row(i).subspan(c0, width);
      record_pass(stats, walk_row<In, Product, Acc>(x[i], seg, rc, out.subspan(c0, width)), width);
    }
  }
  return stats;
}

}  // namespace

RowProducts reuse_row(std::int8_t x_elem, std::span<const std::int8_t> w_row, ResultCache& rc) {
  if (x_elem == -128) throw InvalidArgument("reuse_row: input code -128");
  RowProducts r;
  std::vector<std::int32_t> acc(w_row.size(), 0);
  const auto mults = walk_row<std::int8_t, std::int16_t, std::int32_t>(x_elem, w_row, rc,
                                                                       std::span(acc));
  r.products.assign(acc.begin(), acc.end());
  record_pass(r.stats, mults, w_row.size());
  return r;
}

std::uint32_t reuse_row_accumulate(std::int8_t x_elem, std::span<const std::int8_t> w_row,
                                   ResultCache& rc, std::span<std::int32_t> acc) {
  if (acc.size() < w_row.size()) throw InvalidArgument("reuse_row_accumulate: short accumulator");
  return walk_row<std::int8_t, std::int16_t, std::int32_t>(x_elem, w_row, rc, acc);
}

std::vector<std::int32_t> naive_mvm(const QuantizedVector& x, const QuantizedMatrix& w) {
  check_rows(x.size(), w, "naive_mvm");
  std::vector<std::int32_t> y(w.cols, 0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const std::int32_t xi = x.data[i];
    for (std::size_t j = 0; j < w.cols; ++j) y[j] += xi * std::int32_t(w.at(i, j));
  }
  return y;
}

MvmResult reuse_mvm(const QuantizedVector& x, const QuantizedMatrix& w, const TileConfig& tile) {
  check_rows(x.size(), w, "reuse_mvm");
  if (std::find(x.data.begin(), x.data.end(), std::int8_t{-128}) != x.data.end()) {
    throw InvalidArgument("reuse_mvm: input code -128");
  }
  MvmResult r;
  r.output.assign(w.cols, 0);
  r.stats = tiled_pass<std::int8_t, std::int16_t, std::int32_t>(
      std::span<const std::int8_t>(x.data), w, tile, std::span(r.output));
  return r;
}

namespace {

bool same_scale(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

}  // namespace

QuantizedMatrix combine_lora(const QuantizedMatrix& w, const QuantizedMatrix& a) {
  w.validate();
  a.validate();
  if (w.rows != a.rows) {
    std::ostringstream os;
    os << "combine_lora: W has " << w.rows << " rows, A has " << a.rows;
    throw InvalidArgument(os.str());
  }
  if (!same_scale(w.scale, a.scale)) {
    throw InvalidArgument("combine_lora: W and A scales differ; requantize A to W's scale first");
  }
  QuantizedMatrix c;
  c.rows = w.rows;
  c.cols = w.cols + a.cols;
  c.scale = w.scale;
  c.data.reserve(c.rows * c.cols);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const auto wr = w.row(i);
    const auto ar = a.row(i);
    c.data.insert(c.data.end(), wr.begin(), wr.end());
    c.data.insert(c.data.end(), ar.begin(), ar.end());
  }
  return c;
}

namespace {

void check_lora_shapes(const QuantizedVector& x, const QuantizedMatrix& w,
                       const QuantizedMatrix& a, const QuantizedMatrix& b) {
  w.validate();
  a.validate();
  b.validate();
  std::ostringstream os;
  if (x.size() != w.rows || a.rows != w.rows) {
    os << "lora: input length " << x.size() << ", W rows " << w.rows << ", A rows " << a.rows
       << " must agree";
  } else if (a.cols != b.rows) {
    os << "lora: A cols " << a.cols << " != B rows " << b.rows;
  } else if (b.cols != w.cols) {
    os << "lora: B cols " << b.cols << " != W cols " << w.cols;
  } else {
    return;
  }
  throw InvalidArgument(os.str());
}

}  // namespace

LoraResult lora_mvm(const QuantizedVector& x, const QuantizedMatrix& w, const QuantizedMatrix& a,
                    const QuantizedMatrix& b, const TileConfig& tile) {
  check_lora_shapes(x, w, a, b);
  const QuantizedMatrix fused = combine_lora(w, a);
  MvmResult h = reuse_mvm(x, fused, tile);

  LoraResult r;
  r.fused_stats = h.stats;
  r.output.assign(h.output.begin(), h.output.begin() + std::ptrdiff_t(w.cols));
  const std::span<const std::int32_t> t(h.output.data() + w.cols, a.cols);
  if (b.rows > 0) {
    std::vector<std::int64_t> tb(b.cols, 0);
    r.adaptor_stats =
        tiled_pass<std::int32_t, std::int64_t, std::int64_t>(t, b, tile, std::span(tb));
    for (std::size_t j = 0; j < b.cols; ++j) r.output[j] += tb[j];
  }
  return r;
}

std::vector<std::int64_t> naive_lora(const QuantizedVector& x, const QuantizedMatrix& w,
                                     const QuantizedMatrix& a, const QuantizedMatrix& b) {
  check_lora_shapes(x, w, a, b);
  std::vector<std::int64_t> y(w.cols, 0);
  std::vector<std::int64_t> t(a.cols, 0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    for (std::size_t j = 0; j < w.cols; ++j) y[j] += std::int64_t(x.data[i]) * w.at(i, j);
    for (std::size_t k = 0; k < a.cols; ++k) t[k] += std::int64_t(x.data[i]) * a.at(i, k);
  }
  for (std::size_t k = 0; k < b.rows; ++k) {
    for (std::size_t j = 0; j < b.cols; ++j) y[j] += t[k] * b.at(k, j);
  }
  return y;
}

double row_overlap_rate(const QuantizedMatrix& w, const QuantizedMatrix& a) {
  w.validate();
  a.validate();
  if (w.rows != a.rows) throw InvalidArgument("row_overlap_rate: row count mismatch");
  if (a.cols == 0 || a.rows == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < w.rows; ++i) {
    std::bitset<kCacheEntries> present;
    for (auto v : w.row(i)) present.set(rc_index(v).index);
    std::size_t hits = 0;
    for (auto v : a.row(i)) hits += present.test(rc_index(v).index);
    sum += double(hits) / double(a.cols);
  }
  return sum / double(w.rows);
}

}  // namespace axllm
