// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace axllm {

/// Cycle parameters of one lane. Defaults: 3-cycle multiplier that accepts a
/// new operand every 3 cycles, 1-cycle buffer access, 4-deep queues.
struct LaneTimingConfig {
  std::uint32_t mult_latency = 3;
  std::uint32_t mult_initiation_interval = 3;
  std::uint32_t buffer_access_latency = 1;
  std::uint32_t out_queue_depth = 4;   // per producer queue in front of Out_buff
  std::uint32_t mult_queue_depth = 4;  // operands waiting for the multiplier
  std::uint32_t baseline_initiation_interval = 3;
  std::uint32_t baseline_multipliers = 1;

  void validate() const;
  friend bool operator==(const LaneTimingConfig&, const LaneTimingConfig&) = default;
};

struct LaneTrace {
  std::uint64_t total_cycles = 0;
  std::uint64_t stall_cycles = 0;             // dispatch blocked on an in-flight value
  std::uint64_t hazard_events = 0;            // weights that hit such a block
  std::uint64_t mult_wait_cycles = 0;         // blocked on a product still queued for the multiplier
  std::uint64_t structural_stall_cycles = 0;  // dispatch blocked on a full queue
  std::uint64_t writeback_conflicts = 0;      // results not written on arrival
  std::uint64_t mults_issued = 0;
  std::uint64_t reuses_issued = 0;
  std::uint64_t rc_reads = 0;
  std::uint64_t rc_writes = 0;
  std::uint64_t queue_transfers = 0;  // enqueues into any queue
  std::uint32_t peak_out_queue = 0;   // waiting results, either producer queue

  friend bool operator==(const LaneTrace&, const LaneTrace&) = default;
};

enum class LaneEventKind : std::uint8_t {
  Fetch,
  DispatchHit,
  DispatchMiss,
  HazardStall,
  MultIssue,
  MultDone,
  OutWrite,
};

struct LaneEvent {
  std::uint64_t cycle;
  LaneEventKind kind;
  std::uint32_t column;  // weight position in the row
  std::uint8_t slot;     // cache index of that weight
};

/// Optional per-event record for tests and debugging.
using LaneEventLog = std::vector<LaneEvent>;

/// Cycle-level model of one unsliced lane running x_elem against w_row.
/// First occurrences take the multiply path, repeats the reuse path; a
/// repeat whose product is still in flight holds dispatch in order.
LaneTrace simulate_lane(std::int8_t x_elem, std::span<const std::int8_t> w_row,
                        const LaneTimingConfig& cfg = {}, LaneEventLog* log = nullptr);

/// Same lane with the cache removed: every weight is multiplied.
LaneTrace simulate_baseline_lane(std::size_t row_len, const LaneTimingConfig& cfg = {});

double stall_fraction(const LaneTrace& trace);

}  // namespace axllm
