// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace axllm {

/// Largest magnitude a weight code may take. -128 is never produced so that
/// every negative code has a positive twin.
inline constexpr int kMaxCode = 127;

/// Number of Result Cache cells after sign folding.
inline constexpr std::size_t kCacheEntries = 128;

struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c, std::vector<double> values);

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct QuantizedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> data;  // row-major, every element in [-127, 127]
  double scale = 1.0;             // real units per quantum

  QuantizedMatrix() = default;
  QuantizedMatrix(std::size_t r, std::size_t c, std::vector<std::int8_t> values,
                  double s = 1.0);

  std::int8_t at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const std::int8_t> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  /// Throws InvalidArgument if the shape, the code range or the scale is off.
  void validate() const;

  friend bool operator==(const QuantizedMatrix&, const QuantizedMatrix&) = default;
};

/// An 8-bit activation vector with its own scale.
struct QuantizedVector {
  std::vector<std::int8_t> data;
  double scale = 1.0;

  std::size_t size() const { return data.size(); }
};

/// A Result Cache cell address: magnitude plus the sign applied on read.
struct CacheSlot {
  std::uint8_t index = 0;  // [0, 127]
  std::int8_t sign = 1;    // +1 or -1; zero maps to +1

  friend bool operator==(const CacheSlot&, const CacheSlot&) = default;
};

/// Round half away from zero, then clamp to [-127, 127].
std::int8_t quantize_value(double real, double scale);

/// Per-tensor symmetric quantization: scale = max|x| / 127 (1.0 for an
/// all-zero matrix). Non-finite elements are rejected with their index.
QuantizedMatrix quantize_symmetric(const RealMatrix& m);

/// Same rounding and clamping as quantize_symmetric but against a caller
/// chosen scale. Used to place two matrices in one code space.
QuantizedMatrix quantize_with_scale(const RealMatrix& m, double scale);

QuantizedVector quantize_symmetric(std::span<const double> v);

RealMatrix dequantize(const QuantizedMatrix& q);

/// Re-express q's codes on target_scale (dequantize then quantize_with_scale).
QuantizedMatrix requantize(const QuantizedMatrix& q, double target_scale);

/// Sign-folded cache address of a weight code. Rejects -128 and anything
/// outside the int8 range.
CacheSlot rc_index(int w);

}  // namespace axllm
