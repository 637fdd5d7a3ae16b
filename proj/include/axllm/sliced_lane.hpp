// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "axllm/lane_timing.hpp"
#include "axllm/quantizer.hpp"

namespace axllm {

enum class RcSliceMapping : std::uint8_t {
  Contiguous,  // slice = index / (128 / rc_slices); close values collide
  Modulo,      // slice = index % rc_slices
};

struct SliceConfig {
  std::uint32_t num_slices = 4;   // P: W_buff / Out_buff slices
  std::uint32_t slice_size = 64;  // entries per W_buff slice
  std::uint32_t queue_depth = 4;  // S: each RC-slice input queue
  std::uint32_t rc_slices = 0;    // 0 means "same as num_slices"
  RcSliceMapping mapping = RcSliceMapping::Contiguous;
  /// false: strict round robin, a blocked head idles its RC slice for the
  /// cycle. true: the arbiter passes over heads that cannot be granted
  /// (value in flight, no credit), a limited form of out-of-order issue.
  bool skip_blocked_heads = false;

  std::uint32_t effective_rc_slices() const { return rc_slices == 0 ? num_slices : rc_slices; }
  std::size_t lane_buffer() const { return std::size_t(num_slices) * slice_size; }
  void validate() const;
  friend bool operator==(const SliceConfig&, const SliceConfig&) = default;
};

std::uint32_t rc_slice_of(CacheSlot slot, const SliceConfig& cfg);

struct SlicedLaneTrace {
  std::uint64_t total_cycles = 0;
  std::uint64_t routed_requests = 0;
  std::uint64_t rc_collision_events = 0;  // requests that queued beside another slice's request
  std::uint64_t credit_stall_cycles = 0;  // slice-cycles a fetch was refused
  std::uint64_t hazard_stall_cycles = 0;  // RC-slice cycles idle on an in-flight value
  std::uint64_t hazard_events = 0;
  std::uint64_t mult_wait_cycles = 0;  // RC-slice cycles idle on a product not yet issued
  std::uint64_t structural_stall_cycles = 0;
  std::uint64_t writeback_conflicts = 0;
  std::uint64_t mults_issued = 0;
  std::uint64_t reuses_issued = 0;
  std::uint64_t rc_reads = 0;
  std::uint64_t rc_writes = 0;
  std::uint64_t queue_transfers = 0;
  std::uint32_t rc_slice_count = 0;
  std::uint32_t max_retired_per_cycle = 0;

  /// occupancy_histograms[r][k]: cycles on which RC slice r held k queued requests.
  std::vector<std::vector<std::uint64_t>> occupancy_histograms;
  /// Peak depth of every queue: RC input queues (r * P + s), then the
  /// multiplier feeds (one per RC slice), then Out_buff queues
  /// (i * (R + 1) + r for RC producers, i * (R + 1) + R for the multiplier).
  std::vector<std::uint32_t> peak_rc_queue;
  std::vector<std::uint32_t> peak_mult_queue;
  std::vector<std::uint32_t> peak_out_queue;

  friend bool operator==(const SlicedLaneTrace&, const SlicedLaneTrace&) = default;
};

struct GrantRecord {
  std::uint64_t cycle;
  std::uint32_t rc_slice;
  std::uint32_t source;
  std::uint32_t waiting_mask;  // sources with a head request in that RC slice
  std::uint32_t ready_mask;    // those whose head could have been granted
};

using GrantLog = std::vector<GrantRecord>;

/// Cycle-level model of a P-way sliced lane. Column j lives in W_buff slice
/// j mod P. Every request passes an RC-slice queue; hits read the cache,
/// misses move on to the shared multiplier. Producers only enqueue against a
/// credit, so no queue can overflow; an overflow throws SimulationError.
SlicedLaneTrace simulate_sliced_lane(std::int8_t x_elem, std::span<const std::int8_t> w_row,
                                     const SliceConfig& cfg = {},
                                     const LaneTimingConfig& timing = {},
                                     GrantLog* grants = nullptr);

/// Fraction of routed requests that collided with another one at their RC slice.
double collision_rate(const SlicedLaneTrace& trace);

/// Hazard-idle RC-slice cycles over all RC-slice cycles.
double stall_fraction(const SlicedLaneTrace& trace);

}  // namespace axllm
