// SPDX-License-Identifier: Apache-2.0
// Test-side generators and oracles. Nothing here calls into the library's
// arithmetic, so agreement with it means something.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "axllm/quantizer.hpp"

namespace testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  int code() { return int_in(-127, 127); }
  int int_in(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::size_t size_in(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  double real_in(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  /// Uniform over the 128 magnitudes with a random sign: the model behind
  /// the 128(1 - (127/128)^n) closed form.
  int folded_uniform() {
    const int mag = int_in(0, 127);
    return int_in(0, 1) ? -mag : mag;
  }

  /// Codes drawn from a narrow pool, to force heavy reuse.
  int from_pool(const std::vector<int>& pool) {
    return pool[size_in(0, pool.size() - 1)];
  }

  axllm::QuantizedMatrix matrix(std::size_t rows, std::size_t cols, int max_mag = 127) {
    std::vector<std::int8_t> d(rows * cols);
    for (auto& v : d) v = std::int8_t(int_in(-max_mag, max_mag));
    return axllm::QuantizedMatrix(rows, cols, std::move(d), 1.0);
  }

  axllm::QuantizedVector vec(std::size_t n) {
    axllm::QuantizedVector x;
    for (std::size_t i = 0; i < n; ++i) x.data.push_back(std::int8_t(code()));
    return x;
  }

  std::vector<std::int8_t> row(std::size_t n) {
    std::vector<std::int8_t> r(n);
    for (auto& v : r) v = std::int8_t(code());
    return r;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Column-major triple loop in 64-bit arithmetic.
inline std::vector<std::int64_t> oracle_mvm(const std::vector<std::int8_t>& x,
                                            const axllm::QuantizedMatrix& w) {
  std::vector<std::int64_t> y(w.cols, 0);
  for (std::size_t j = 0; j < w.cols; ++j) {
    std::int64_t s = 0;
    for (std::size_t i = 0; i < w.rows; ++i) s += std::int64_t(x[i]) * w.data[i * w.cols + j];
    y[j] = s;
  }
  return y;
}

/// x W + (x A) B, with t = x A formed explicitly.
inline std::vector<std::int64_t> oracle_lora(const std::vector<std::int8_t>& x,
                                             const axllm::QuantizedMatrix& w,
                                             const axllm::QuantizedMatrix& a,
                                             const axllm::QuantizedMatrix& b) {
  auto y = oracle_mvm(x, w);
  std::vector<std::int64_t> t(a.cols, 0);
  for (std::size_t r = 0; r < a.cols; ++r) {
    for (std::size_t i = 0; i < a.rows; ++i) t[r] += std::int64_t(x[i]) * a.data[i * a.cols + r];
  }
  for (std::size_t j = 0; j < b.cols; ++j) {
    for (std::size_t r = 0; r < b.rows; ++r) y[j] += t[r] * b.data[r * b.cols + j];
  }
  return y;
}

/// Distinct magnitudes in a span.
template <class It>
std::size_t distinct_magnitudes(It begin, It end) {
  std::set<int> s;
  for (auto it = begin; it != end; ++it) s.insert(std::abs(int(*it)));
  return s.size();
}

/// Multiplications the tiled reuse walk must perform: distinct magnitudes
/// per (row, tile).
inline std::uint64_t oracle_tiled_mults(const axllm::QuantizedMatrix& w, std::size_t tile) {
  std::uint64_t m = 0;
  for (std::size_t i = 0; i < w.rows; ++i) {
    const auto* row = w.data.data() + i * w.cols;
    for (std::size_t c0 = 0; c0 < w.cols; c0 += tile) {
      m += distinct_magnitudes(row + c0, row + std::min(w.cols, c0 + tile));
    }
  }
  return m;
}

/// Expected distinct values among n draws from a distribution over magnitudes.
inline double expected_uniques(const std::vector<double>& p, std::size_t n) {
  double e = 0.0;
  for (double pk : p) e += 1.0 - std::pow(1.0 - pk, double(n));
  return e;
}

inline double expected_uniques_uniform(std::size_t n) {
  return 128.0 * (1.0 - std::pow(127.0 / 128.0, double(n)));
}

/// Folded magnitude probabilities of round(N(0, sigma)) clamped to 127.
inline std::vector<double> gaussian_magnitude_probs(double sigma) {
  auto cdf = [sigma](double v) { return 0.5 * std::erfc(-v / (sigma * std::sqrt(2.0))); };
  std::vector<double> p(128);
  p[0] = cdf(0.5) - cdf(-0.5);
  for (int k = 1; k < 127; ++k) p[std::size_t(k)] = 2.0 * (cdf(k + 0.5) - cdf(k - 0.5));
  p[127] = 2.0 * (1.0 - cdf(126.5));
  return p;
}

}  // namespace testing
