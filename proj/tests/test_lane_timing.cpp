// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <map>

#include "axllm/error.hpp"
#include "axllm/lane_timing.hpp"
#include "axllm/reuse_engine.hpp"
#include "support.hpp"

using namespace axllm;

namespace {

std::vector<std::int8_t> distinct_row(std::size_t n) {
  std::vector<std::int8_t> r(n);
  for (std::size_t j = 0; j < n; ++j) r[j] = std::int8_t(j % 128);
  return r;
}

}  // namespace

TEST_CASE("all-distinct row is issue limited: 3n + 2 at II = 3") {
  // Stage table for n = 4: fetch 0..3, issue 1, 4, 7, 10, done +3, the last
  // write lands on cycle 13.
  for (std::size_t n : {1u, 2u, 4u, 17u, 128u}) {
    const auto row = distinct_row(n);
    const auto t = simulate_lane(5, row);
    CHECK(t.total_cycles == 3 * n + 2);
    CHECK(t.stall_cycles == 0);
    CHECK(t.mults_issued == n);
    CHECK(t.reuses_issued == 0);
  }
  // General closed form n * II + (L - II) + 2.
  LaneTimingConfig cfg;
  cfg.mult_latency = 5;
  cfg.mult_initiation_interval = 2;
  CHECK(simulate_lane(1, distinct_row(50), cfg).total_cycles == 50 * 2 + 3 + 2);
}

TEST_CASE("[v, v] stalls until the first product is written") {
  // Fetch 0 and 1. v0 issues at 1, done at 4, readable from 5; v1 waits
  // on cycles 2, 3, 4, reads at 5 and writes at 6.
  const std::vector<std::int8_t> row{9, -9};
  LaneEventLog log;
  const auto t = simulate_lane(3, row, {}, &log);
  CHECK(t.total_cycles == 7);
  CHECK(t.stall_cycles == 3);
  CHECK(t.hazard_events == 1);
  CHECK(t.mults_issued == 1);
  CHECK(t.reuses_issued == 1);
  CHECK(stall_fraction(t) == doctest::Approx(3.0 / 7));
}

TEST_CASE("all-same row of 8: one multiply, stalls only for the first repeat") {
  const std::vector<std::int8_t> row(8, 42);
  const auto t = simulate_lane(1, row);
  CHECK(t.mults_issued == 1);
  CHECK(t.reuses_issued == 7);
  CHECK(t.stall_cycles == 3);
  CHECK(t.hazard_events == 1);
  CHECK(t.total_cycles == 13);
}

TEST_CASE("empty rows") {
  const auto t = simulate_lane(1, {});
  CHECK(t == LaneTrace{});
  CHECK(simulate_baseline_lane(0).total_cycles == 0);
  CHECK_THROWS_AS(stall_fraction(t), InvalidArgument);
}

TEST_CASE("baseline lane closed form") {
  CHECK(simulate_baseline_lane(256).total_cycles == 768 + 2);
  CHECK(simulate_baseline_lane(256).mults_issued == 256);
  CHECK(simulate_baseline_lane(1).total_cycles == 5);
  LaneTimingConfig cfg;
  cfg.baseline_initiation_interval = 1;
  CHECK(simulate_baseline_lane(100, cfg).total_cycles == 100 + 2 + 2);
}

TEST_CASE("config validation") {
  LaneTimingConfig cfg;
  cfg.mult_latency = 0;
  CHECK_THROWS_AS(simulate_lane(1, distinct_row(3), cfg), InvalidArgument);
  cfg = {};
  cfg.out_queue_depth = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  const std::vector<std::int8_t> bad{-128};
  CHECK_THROWS_AS(simulate_lane(1, bad), InvalidArgument);
}

TEST_CASE("property: timing agrees with the functional engine and respects causality") {
  testing::Gen g(4242);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = g.size_in(1, 300);
    std::vector<std::int8_t> row(n);
    const int mag = trial % 4 == 0 ? 3 : (trial % 4 == 1 ? 20 : 127);
    for (auto& v : row) v = std::int8_t(g.int_in(-mag, mag));
    LaneTimingConfig cfg;
    cfg.mult_latency = std::uint32_t(g.int_in(1, 6));
    cfg.mult_initiation_interval = std::uint32_t(g.int_in(1, 4));
    cfg.out_queue_depth = std::uint32_t(g.int_in(1, 6));
    cfg.mult_queue_depth = std::uint32_t(g.int_in(1, 6));
    LaneEventLog log;
    const auto t = simulate_lane(7, row, cfg, &log);

    ResultCache rc;
    const auto f = reuse_row(7, row, rc);
    REQUIRE(t.mults_issued == f.stats.multiplications);
    REQUIRE(t.reuses_issued == f.stats.reuses);
    REQUIRE(t.stall_cycles <= t.total_cycles);
    REQUIRE(t.peak_out_queue <= cfg.out_queue_depth);

    // A hit may only read a slot whose multiply finished on an earlier cycle.
    std::map<int, std::uint64_t> done;
    std::uint64_t last_fetch_col = 0, writes = 0, last_write = 0;
    bool first_fetch = true;
    for (const auto& e : log) {
      switch (e.kind) {
        case LaneEventKind::MultDone:
          done.emplace(e.slot, e.cycle);
          break;
        case LaneEventKind::DispatchHit: {
          auto it = done.find(e.slot);
          REQUIRE(it != done.end());
          REQUIRE(it->second < e.cycle);
          break;
        }
        case LaneEventKind::Fetch:
          if (!first_fetch) REQUIRE(e.column == last_fetch_col + 1);
          first_fetch = false;
          last_fetch_col = e.column;
          break;
        case LaneEventKind::OutWrite:
          // One Out_buff write port.
          if (writes > 0) REQUIRE(e.cycle > last_write);
          last_write = e.cycle;
          ++writes;
          break;
        default:
          break;
      }
    }
    REQUIRE(writes == n);
    REQUIRE(t.total_cycles == last_write + 1);

    // Determinism.
    REQUIRE(simulate_lane(7, row, cfg) == t);
  }
}

TEST_CASE("property: a slower multiplier never shortens a row") {
  testing::Gen g(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto row = g.row(g.size_in(1, 256));
    std::uint64_t prev = 0;
    for (std::uint32_t ii = 1; ii <= 5; ++ii) {
      LaneTimingConfig cfg;
      cfg.mult_initiation_interval = ii;
      const auto c = simulate_lane(1, row, cfg).total_cycles;
      REQUIRE(c >= prev);
      prev = c;
    }
  }
}

TEST_CASE("property: baseline is never faster once something is reused") {
  testing::Gen g(18);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = g.size_in(2, 256);
    std::vector<std::int8_t> row(n);
    for (auto& v : row) v = std::int8_t(g.int_in(-60, 60));
    const auto t = simulate_lane(1, row);
    if (t.reuses_issued == 0) continue;
    REQUIRE(simulate_baseline_lane(n).total_cycles >= t.total_cycles);
  }
}
