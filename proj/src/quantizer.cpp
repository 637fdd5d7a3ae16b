// SPDX-License-Identifier: Apache-2.0
#include "axllm/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "axllm/error.hpp"

namespace axllm {

RealMatrix::RealMatrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (r == 0 || c == 0) throw InvalidArgument("RealMatrix: rows and cols must be positive");
  if (data.size() != r * c) {
    std::ostringstream os;
    os << "RealMatrix: data length " << data.size() << " != " << r << "x" << c;
    throw InvalidArgument(os.str());
  }
}

QuantizedMatrix::QuantizedMatrix(std::size_t r, std::size_t c,
                                 std::vector<std::int8_t> values, double s)
    : rows(r), cols(c), data(std::move(values)), scale(s) {
  validate();
}

void QuantizedMatrix::validate() const {
  if (data.size() != rows * cols) {
    std::ostringstream os;
    os << "QuantizedMatrix: data length " << data.size() << " != " << rows << "x" << cols;
    throw InvalidArgument(os.str());
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgument("QuantizedMatrix: scale must be positive and finite");
  }
  auto bad = std::find(data.begin(), data.end(), std::int8_t{-128});
  if (bad != data.end()) {
    std::ostringstream os;
    os << "QuantizedMatrix: code -128 at element " << (bad - data.begin());
    throw InvalidArgument(os.str());
  }
}

std::int8_t quantize_value(double real, double scale) {
  // std::round is half-away-from-zero.
  double q = std::round(real / scale);
  q = std::clamp(q, -double(kMaxCode), double(kMaxCode));
  return static_cast<std::int8_t>(q);
}

namespace {

void check_finite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream os;
      os << "non-finite value at element " << i;
      throw InvalidArgument(os.str());
    }
  }
}

double max_abs_of(std::span<const double> values) {
  double max_abs = 0.0;
  for (double v : values) max_abs = std::max(max_abs, std::abs(v));
  return max_abs;
}

// Normalizing by max|x| first keeps exact ties exact: x = max/2 maps to
// 63.5 on the nose and rounds to 64.
std::int8_t quantize_against_max(double real, double max_abs) {
  double q = std::round(real / max_abs * kMaxCode);
  return static_cast<std::int8_t>(std::clamp(q, -double(kMaxCode), double(kMaxCode)));
}

}  // namespace

QuantizedMatrix quantize_with_scale(const RealMatrix& m, double scale) {
  if (m.data.size() != m.rows * m.cols || m.rows == 0 || m.cols == 0) {
    throw InvalidArgument("quantize: malformed RealMatrix");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgument("quantize: scale must be positive and finite");
  }
  check_finite(m.data);
  QuantizedMatrix q;
  q.rows = m.rows;
  q.cols = m.cols;
  q.scale = scale;
  q.data.resize(m.data.size());
  std::transform(m.data.begin(), m.data.end(), q.data.begin(),
                 [scale](double v) { return quantize_value(v, scale); });
  return q;
}

QuantizedMatrix quantize_symmetric(const RealMatrix& m) {
  if (m.data.size() != m.rows * m.cols || m.rows == 0 || m.cols == 0) {
    throw InvalidArgument("quantize: malformed RealMatrix");
  }
  check_finite(m.data);
  const double max_abs = max_abs_of(m.data);
  QuantizedMatrix q;
  q.rows = m.rows;
  q.cols = m.cols;
  q.data.assign(m.data.size(), 0);
  if (max_abs == 0.0) return q;  // scale stays 1.0
  q.scale = max_abs / kMaxCode;
  std::transform(m.data.begin(), m.data.end(), q.data.begin(),
                 [max_abs](double v) { return quantize_against_max(v, max_abs); });
  return q;
}

QuantizedVector quantize_symmetric(std::span<const double> v) {
  check_finite(v);
  const double max_abs = max_abs_of(v);
  QuantizedVector q;
  q.data.assign(v.size(), 0);
  if (max_abs == 0.0) return q;
  q.scale = max_abs / kMaxCode;
  std::transform(v.begin(), v.end(), q.data.begin(),
                 [max_abs](double x) { return quantize_against_max(x, max_abs); });
  return q;
}

RealMatrix dequantize(const QuantizedMatrix& q) {
  q.validate();
  std::vector<double> out(q.data.size());
  std::transform(q.data.begin(), q.data.end(), out.begin(),
                 [s = q.scale](std::int8_t v) { return v * s; });
  return RealMatrix(q.rows, q.cols, std::move(out));
}

QuantizedMatrix requantize(const QuantizedMatrix& q, double target_scale) {
  return quantize_with_scale(dequantize(q), target_scale);
}

CacheSlot rc_index(int w) {
  if (w < -kMaxCode || w > kMaxCode) {
    std::ostringstream os;
    os << "rc_index: weight code " << w << " outside [-127, 127]";
    throw InvalidArgument(os.str());
  }
  return CacheSlot{static_cast<std::uint8_t>(w < 0 ? -w : w),
                   static_cast<std::int8_t>(w < 0 ? -1 : 1)};
}

}  // namespace axllm
