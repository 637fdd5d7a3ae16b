// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <numeric>

#include "axllm/error.hpp"
#include "axllm/reuse_engine.hpp"
#include "support.hpp"

using namespace axllm;

namespace {

QuantizedVector vec(std::vector<std::int8_t> v) {
  QuantizedVector x;
  x.data = std::move(v);
  return x;
}

std::vector<std::int64_t> widen(const std::vector<std::int32_t>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("naive_mvm small cases") {
  CHECK(naive_mvm(vec({2}), QuantizedMatrix(1, 3, {3, 3, 5})) ==
        std::vector<std::int32_t>{6, 6, 10});
  CHECK(naive_mvm(vec({1, 1}), QuantizedMatrix(2, 2, {1, 0, 0, 1})) ==
        std::vector<std::int32_t>{1, 1});
  CHECK_THROWS_AS(naive_mvm(vec({1}), QuantizedMatrix(2, 2, {1, 0, 0, 1})), InvalidArgument);

  testing::Gen g(3);
  const auto w = g.matrix(16, 16);
  const auto x = g.vec(16);
  CHECK(widen(naive_mvm(x, w)) == testing::oracle_mvm(x.data, w));
}

TEST_CASE("reuse_row hand traces") {
  ResultCache rc;
  const std::vector<std::int8_t> row{3, 3, 5};
  auto r = reuse_row(2, row, rc);
  CHECK(r.products == std::vector<std::int16_t>{6, 6, 10});
  CHECK(r.stats.multiplications == 2);
  CHECK(r.stats.reuses == 1);

  ResultCache rc2;
  const std::vector<std::int8_t> folded{3, -3, 5};
  r = reuse_row(2, folded, rc2);
  CHECK(r.products == std::vector<std::int16_t>{6, -6, 10});
  CHECK(r.stats.multiplications == 2);
  CHECK(r.stats.reuses == 1);
  CHECK(rc2.product(3) == 6);  // magnitude product, sign applied on read

  ResultCache rc3;
  const std::vector<std::int8_t> same(9, -7);
  r = reuse_row(-4, same, rc3);
  CHECK(r.stats.multiplications == 1);
  CHECK(r.stats.reuses == 8);
  CHECK(r.products == std::vector<std::int16_t>(9, 28));

  ResultCache rc4;
  const std::vector<std::int8_t> bad{1, -128};
  CHECK_THROWS_AS(reuse_row(1, bad, rc4), InvalidArgument);
}

TEST_CASE("zero weights take slot 0 like any other value") {
  ResultCache rc;
  const std::vector<std::int8_t> row{0, 0, 4};
  auto r = reuse_row(9, row, rc);
  CHECK(r.products == std::vector<std::int16_t>{0, 0, 36});
  CHECK(r.stats.multiplications == 2);
  CHECK(rc.valid(0));
}

TEST_CASE("cache extremes stay inside 16 bits") {
  ResultCache rc;
  const std::vector<std::int8_t> row{127, -127};
  auto r = reuse_row(-127, row, rc);
  CHECK(r.products == std::vector<std::int16_t>{-16129, 16129});
}

TEST_CASE("reuse_rate") {
  ReuseStats s;
  s.multiplications = 2;
  s.reuses = 1;
  CHECK(reuse_rate(s) == doctest::Approx(1.0 / 3));
  s.multiplications = 1;
  s.reuses = 255;
  CHECK(reuse_rate(s) == doctest::Approx(255.0 / 256));
  CHECK_THROWS_AS(reuse_rate(ReuseStats{}), InvalidArgument);
}

TEST_CASE("property: reuse_mvm equals the oracle bitwise, counters match distinct sets") {
  testing::Gen g(2024);
  for (int trial = 0; trial < 400; ++trial) {
    const auto rows = g.size_in(1, 24);
    const auto cols = g.size_in(1, 1024);
    const auto tile = g.size_in(1, cols + 8);
    // Narrow magnitudes on some trials so the reuse path dominates.
    const int max_mag = trial % 3 == 0 ? g.int_in(0, 6) : 127;
    const auto w = g.matrix(rows, cols, max_mag);
    const auto x = g.vec(rows);
    const auto r = reuse_mvm(x, w, {tile});
    REQUIRE(widen(r.output) == testing::oracle_mvm(x.data, w));
    REQUIRE(r.stats.multiplications == testing::oracle_tiled_mults(w, tile));
    REQUIRE(r.stats.processed() == rows * cols);  // conservation
    // Cache bound per (input element, tile).
    for (std::size_t u = std::min<std::size_t>(128, tile) + 1; u < r.stats.unique_histogram.size();
         ++u) {
      REQUIRE(r.stats.unique_histogram[u] == 0);
    }
  }
}

TEST_CASE("property: negating a weight negates its products only") {
  testing::Gen g(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = g.size_in(1, 300);
    auto row = g.row(n);
    const auto x = std::int8_t(g.code());
    ResultCache a;
    const auto base = reuse_row(x, row, a);
    const auto k = g.size_in(0, n - 1);
    row[k] = std::int8_t(-row[k]);
    ResultCache b;
    const auto flipped = reuse_row(x, row, b);
    REQUIRE(flipped.stats == base.stats);
    for (std::size_t j = 0; j < n; ++j) {
      REQUIRE(flipped.products[j] == (j == k ? -base.products[j] : base.products[j]));
    }
  }
}

TEST_CASE("property: doubling the tile never lowers reuse") {
  testing::Gen g(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto cols = g.size_in(2, 700);
    const auto w = g.matrix(g.size_in(1, 6), cols, trial % 2 ? 127 : 30);
    const auto x = g.vec(w.rows);
    const auto k = g.size_in(1, cols);
    const auto narrow = reuse_mvm(x, w, {k}).stats;
    const auto wide = reuse_mvm(x, w, {2 * k}).stats;
    REQUIRE(wide.reuses >= narrow.reuses);
  }
}

TEST_CASE("closed-form reuse on folded-uniform rows") {
  testing::Gen g(7);
  for (std::size_t width : {256u, 512u}) {
    std::vector<std::int8_t> d(1000 * width);
    for (auto& v : d) v = std::int8_t(g.folded_uniform());
    const QuantizedMatrix w(1000, width, std::move(d));
    const auto r = reuse_mvm(g.vec(1000), w, {width});
    const double expect = 1.0 - testing::expected_uniques_uniform(width) / double(width);
    CHECK(reuse_rate(r.stats) == doctest::Approx(expect).epsilon(0.005 / expect));
  }
}

TEST_CASE("single tile matches naive") {
  testing::Gen g(8);
  const auto w = g.matrix(10, 40);
  const auto x = g.vec(10);
  CHECK(reuse_mvm(x, w, {40}).output == naive_mvm(x, w));
  CHECK(reuse_mvm(x, w, {4096}).output == naive_mvm(x, w));
  CHECK_THROWS_AS(reuse_mvm(x, w, {0}), InvalidArgument);
  CHECK_THROWS_AS(reuse_mvm(g.vec(9), w), InvalidArgument);
}

TEST_CASE("combine_lora") {
  const QuantizedMatrix w(4, 4, std::vector<std::int8_t>(16, 1), 0.5);
  const QuantizedMatrix a(4, 2, std::vector<std::int8_t>(8, 2), 0.5);
  const auto c = combine_lora(w, a);
  CHECK(c.rows == 4);
  CHECK(c.cols == 6);
  CHECK(c.at(2, 3) == 1);
  CHECK(c.at(2, 4) == 2);
  CHECK(combine_lora(w, QuantizedMatrix(4, 0, {}, 0.5)) == w);
  CHECK_THROWS_AS(combine_lora(w, QuantizedMatrix(3, 2, std::vector<std::int8_t>(6), 0.5)),
                  InvalidArgument);
  CHECK_THROWS_AS(combine_lora(w, QuantizedMatrix(4, 2, std::vector<std::int8_t>(8), 0.25)),
                  InvalidArgument);
}

TEST_CASE("lora_mvm hand cases") {
  testing::Gen g(12);
  const auto w = g.matrix(3, 3);
  const auto a = g.matrix(3, 2);
  const QuantizedMatrix zero_b(2, 3, std::vector<std::int8_t>(6, 0));
  const auto x = g.vec(3);
  const auto r = lora_mvm(x, w, a, zero_b);
  CHECK(r.output == widen(naive_mvm(x, w)));

  // Rank 1: A = e_1, B picks column 2 with weight 3, so y[2] += 3 * x[1].
  const QuantizedMatrix a1(3, 1, {0, 1, 0});
  const QuantizedMatrix b1(1, 3, {0, 0, 3});
  const auto x1 = vec({4, -5, 6});
  const QuantizedMatrix w1(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(lora_mvm(x1, w1, a1, b1).output == std::vector<std::int64_t>{4, -5, 6 - 15});

  CHECK_THROWS_AS(lora_mvm(x1, w1, QuantizedMatrix(2, 1, {0, 1}), b1), InvalidArgument);
  CHECK_THROWS_AS(lora_mvm(x1, w1, a1, QuantizedMatrix(2, 3, std::vector<std::int8_t>(6))),
                  InvalidArgument);
  CHECK_THROWS_AS(lora_mvm(x1, w1, a1, QuantizedMatrix(1, 2, {0, 0})), InvalidArgument);
}

TEST_CASE("property: lora_mvm equals xW + (xA)B and obeys the union bound") {
  testing::Gen g(77);
  for (int trial = 0; trial < 300; ++trial) {
    const auto rows = g.size_in(1, 40);
    const auto cols = g.size_in(1, 300);
    const auto rank = g.size_in(1, 16);
    const auto w = g.matrix(rows, cols, trial % 2 ? 127 : 20);
    const auto a = g.matrix(rows, rank, trial % 2 ? 127 : 20);
    const auto b = g.matrix(rank, cols);
    const auto x = g.vec(rows);
    const auto tile = g.size_in(1, cols + rank);
    const auto r = lora_mvm(x, w, a, b, {tile});
    REQUIRE(r.output == testing::oracle_lora(x.data, w, a, b));
    REQUIRE(r.output == naive_lora(x, w, a, b));

    const auto full = cols + rank;
    const auto fused = reuse_mvm(x, combine_lora(w, a), {full}).stats.multiplications;
    const auto alone = reuse_mvm(x, w, {cols}).stats.multiplications +
                       reuse_mvm(x, a, {rank}).stats.multiplications;
    REQUIRE(fused <= alone);
  }
}

TEST_CASE("row_overlap_rate") {
  const QuantizedMatrix w(2, 4, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(row_overlap_rate(w, QuantizedMatrix(2, 2, {1, -2, 5, 6})) == 1.0);
  CHECK(row_overlap_rate(w, QuantizedMatrix(2, 2, {9, 10, 11, -12})) == 0.0);
  CHECK(row_overlap_rate(w, QuantizedMatrix(2, 2, {1, 9, 9, 9})) == doctest::Approx(0.25));
  CHECK_THROWS_AS(row_overlap_rate(w, QuantizedMatrix(1, 1, {1})), InvalidArgument);

  // Folded-uniform W of width 512 against folded-uniform A: the chance a
  // magnitude was among 512 draws.
  testing::Gen g(31);
  std::vector<std::int8_t> wd(1000 * 512), ad(1000 * 16);
  for (auto& v : wd) v = std::int8_t(g.folded_uniform());
  for (auto& v : ad) v = std::int8_t(g.folded_uniform());
  const double expect = 1.0 - std::pow(127.0 / 128.0, 512);
  CHECK(row_overlap_rate(QuantizedMatrix(1000, 512, wd), QuantizedMatrix(1000, 16, ad)) ==
        doctest::Approx(expect).epsilon(0.005));
}
