// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "axllm/energy.hpp"
#include "axllm/lane_timing.hpp"
#include "axllm/reuse_engine.hpp"
#include "axllm/sliced_lane.hpp"
#include "axllm/workload.hpp"

namespace axllm {

struct AcceleratorConfig {
  std::uint32_t lanes = 64;
  SliceConfig slices;
  LaneTimingConfig timing;
  TileConfig tile;
  std::uint32_t adder_tree_stage_latency = 1;
  /// Output columns the tree reduces per cycle; 0 charges only the tree depth.
  std::uint32_t adder_tree_columns_per_cycle = 1;
  EnergyModel energy;

  std::uint32_t adder_tree_depth() const;  // ceil(log2 lanes)
  /// Cycles between the last lane finishing a wave and the next wave starting.
  std::uint64_t drain_cycles(std::size_t wave_cols) const;
  /// Also requires tile_cols <= the lane buffer (num_slices * slice_size).
  void validate() const;
  friend bool operator==(const AcceleratorConfig&, const AcceleratorConfig&) = default;
};

struct RunOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  bool verify = true;    // check outputs and counters against the oracles
};

/// Timing of one matrix pass for a single token.
struct PassTiming {
  std::uint64_t cycles = 0;
  std::uint64_t row_passes = 0;
  std::uint64_t col_tiles = 0;
  std::uint64_t waves = 0;
  std::uint64_t lane_runs = 0;
  std::uint64_t hazard_stall_cycles = 0;
  std::uint64_t hazard_events = 0;
  std::uint64_t rc_slice_cycles = 0;  // rc_slice_count * lane cycles, summed
  std::uint64_t rc_collision_events = 0;
  std::uint64_t routed_requests = 0;
  std::uint64_t mult_wait_cycles = 0;
  std::uint64_t mults_issued = 0;
  std::uint64_t reuses_issued = 0;
  std::uint32_t peak_rc_queue = 0;
  std::uint32_t peak_mult_queue = 0;
  std::uint32_t peak_out_queue = 0;
  EventCounters events;

  PassTiming& operator+=(const PassTiming& o);
  PassTiming scaled(std::uint64_t factor) const;
  friend bool operator==(const PassTiming&, const PassTiming&) = default;
};

/// Sliced-lane timing of w, rows dealt L at a time, columns tile by tile.
/// The schedule does not depend on the input values.
PassTiming time_axllm_pass(const QuantizedMatrix& w, const AcceleratorConfig& cfg,
                           unsigned threads = 1);
/// Same dataflow with multiplier-only lanes.
PassTiming time_baseline_pass(std::size_t rows, std::size_t cols, const AcceleratorConfig& cfg);

/// Element-wise sum of L equally long partial-sum sequences.
std::vector<std::int64_t> accumulate_adder_tree(
    std::span<const std::vector<std::int32_t>> lane_partials);

/// Functional lane-by-lane x W: each lane walks its row segment through its
/// own cache, the adder tree combines every wave.
MvmResult lane_mvm(const QuantizedVector& x, const QuantizedMatrix& w,
                   const AcceleratorConfig& cfg);

struct MatrixReport {
  std::string layer;
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t lora_rank = 0;
  std::uint64_t row_passes = 0;  // of the first pass ([W | A] under LoRA)
  std::uint64_t col_tiles = 0;
  std::uint64_t cycles = 0;  // all tokens
  std::uint64_t baseline_cycles = 0;
  ReuseStats reuse;  // all tokens
  PassTiming timing;  // all tokens
  EventCounters baseline_events;
  std::uint64_t output_checksum = 0;
  // LoRA only.
  std::uint64_t separate_cycles = 0;  // W and A in separate passes, then B
  double overlap_rate = 0.0;
};

struct RunReport {
  std::string machine;  // "axllm" or "baseline"
  WorkloadSpec workload;
  AcceleratorConfig config;
  std::uint64_t total_cycles = 0;
  std::uint64_t baseline_cycles = 0;
  double speedup = 1.0;
  ReuseStats reuse;
  double reuse_rate = 0.0;
  double stall_fraction = 0.0;
  double collision_rate = 0.0;
  EventCounters events;
  EventCounters baseline_events;
  double energy = 0.0;
  double energy_baseline = 0.0;
  std::uint64_t flow_control_violations = 0;
  bool verified = false;
  std::vector<MatrixReport> matrices;
};

RunReport run_axllm(const MaterializedWorkload& workload, const AcceleratorConfig& cfg,
                    const RunOptions& opts = {});
RunReport run_axllm(const WorkloadSpec& workload, const AcceleratorConfig& cfg,
                    const RunOptions& opts = {});
RunReport run_baseline(const MaterializedWorkload& workload, const AcceleratorConfig& cfg,
                       const RunOptions& opts = {});
RunReport run_baseline(const WorkloadSpec& workload, const AcceleratorConfig& cfg,
                       const RunOptions& opts = {});

struct Comparison {
  double speedup = 1.0;
  double energy_ratio = 1.0;
  double energy_reduction = 0.0;  // 1 - energy_ratio
  double reuse_rate = 0.0;
  double stall_fraction = 0.0;
  double collision_rate = 0.0;
  std::uint64_t axllm_cycles = 0;
  std::uint64_t baseline_cycles = 0;
};

/// Rejects reports of different workloads or seeds.
Comparison compare_reports(const RunReport& axllm, const RunReport& baseline);

/// Input vector for (layer, matrix, token) of a workload.
QuantizedVector workload_input(const WorkloadSpec& spec, std::size_t layer_index,
                               std::size_t matrix_index, std::uint64_t token,
                               std::size_t length);

}  // namespace axllm
