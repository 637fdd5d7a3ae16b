// SPDX-License-Identifier: Apache-2.0
#include "axllm/accelerator.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "axllm/error.hpp"

namespace axllm {

std::uint32_t AcceleratorConfig::adder_tree_depth() const {
  return lanes <= 1 ? 0 : std::uint32_t(std::bit_width(lanes - 1));
}

std::uint64_t AcceleratorConfig::drain_cycles(std::size_t wave_cols) const {
  std::uint64_t serial = 0;
  if (adder_tree_columns_per_cycle > 0) {
    serial = (wave_cols + adder_tree_columns_per_cycle - 1) / adder_tree_columns_per_cycle;
  }
  return serial + std::uint64_t(adder_tree_depth()) * adder_tree_stage_latency;
}

void AcceleratorConfig::validate() const {
  if (lanes < 1) throw InvalidArgument("accelerator: lanes must be >= 1");
  slices.validate();
  timing.validate();
  tile.validate();
  energy.validate();
  if (tile.tile_cols > slices.lane_buffer()) {
    std::ostringstream os;
    os << "accelerator: tile_cols " << tile.tile_cols << " exceeds the lane buffer ("
       << slices.num_slices << " slices x " << slices.slice_size << ")";
    throw InvalidArgument(os.str());
  }
}

PassTiming& PassTiming::operator+=(const PassTiming& o) {
  cycles += o.cycles;
  row_passes += o.row_passes;
  col_tiles += o.col_tiles;
  waves += o.waves;
  lane_runs += o.lane_runs;
  hazard_stall_cycles += o.hazard_stall_cycles;
  hazard_events += o.hazard_events;
  rc_slice_cycles += o.rc_slice_cycles;
  rc_collision_events += o.rc_collision_events;
  routed_requests += o.routed_requests;
  mult_wait_cycles += o.mult_wait_cycles;
  mults_issued += o.mults_issued;
  reuses_issued += o.reuses_issued;
  peak_rc_queue = std::max(peak_rc_queue, o.peak_rc_queue);
  peak_mult_queue = std::max(peak_mult_queue, o.peak_mult_queue);
  peak_out_queue = std::max(peak_out_queue, o.peak_out_queue);
  events += o.events;
  return *this;
}

PassTiming PassTiming::scaled(std::uint64_t f) const {
  PassTiming t = *this;
  t.cycles *= f;
  t.row_passes *= f;
  t.col_tiles *= f;
  t.waves *= f;
  t.lane_runs *= f;
  t.hazard_stall_cycles *= f;
  t.hazard_events *= f;
  t.rc_slice_cycles *= f;
  t.rc_collision_events *= f;
  t.routed_requests *= f;
  t.mult_wait_cycles *= f;
  t.mults_issued *= f;
  t.reuses_issued *= f;
  t.events = events.scaled(f);
  return t;
}

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// rethrown on the caller, lowest index first.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
  threads = unsigned(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Per-lane counters that are not timing: W_buff read, Out_buff write and
// drain read per weight; one add per weight in the tree plus accumulation.
EventCounters dataflow_events(std::size_t lanes_active, std::size_t wave_cols) {
  EventCounters e;
  e.buffer_accesses = 3 * lanes_active * wave_cols;
  e.adds = lanes_active * wave_cols;
  return e;
}

PassTiming time_wave(const QuantizedMatrix& w, std::size_t row0, std::size_t col0,
                     const AcceleratorConfig& cfg) {
  const std::size_t rows = std::min<std::size_t>(cfg.lanes, w.rows - row0);
  const std::size_t cols = std::min(cfg.tile.tile_cols, w.cols - col0);
  PassTiming t;
  t.waves = 1;
  std::uint64_t slowest = 0;
  for (std::size_t i = row0; i < row0 + rows; ++i) {
    // The schedule is independent of the resident input, so any code works.
    const auto tr = simulate_sliced_lane(1, w.row(i).subspan(col0, cols), cfg.slices, cfg.timing);
    slowest = std::max(slowest, tr.total_cycles);
    t.lane_runs += 1;
    t.hazard_stall_cycles += tr.hazard_stall_cycles;
    t.hazard_events += tr.hazard_events;
    t.rc_slice_cycles += tr.total_cycles * tr.rc_slice_count;
    t.rc_collision_events += tr.rc_collision_events;
    t.routed_requests += tr.routed_requests;
    t.mult_wait_cycles += tr.mult_wait_cycles;
    t.mults_issued += tr.mults_issued;
    t.reuses_issued += tr.reuses_issued;
    for (auto p : tr.peak_rc_queue) t.peak_rc_queue = std::max(t.peak_rc_queue, p);
    for (auto p : tr.peak_mult_queue) t.peak_mult_queue = std::max(t.peak_mult_queue, p);
    for (auto p : tr.peak_out_queue) t.peak_out_queue = std::max(t.peak_out_queue, p);
    t.events.mults += tr.mults_issued;
    t.events.rc_accesses += tr.rc_reads + tr.rc_writes;
    t.events.queue_transfers += tr.queue_transfers;
  }
  t.events += dataflow_events(rows, cols);
  t.cycles = slowest + cfg.drain_cycles(cols);
  return t;
}

}  // namespace

PassTiming time_axllm_pass(const QuantizedMatrix& w, const AcceleratorConfig& cfg,
                           unsigned threads) {
  cfg.validate();
  w.validate();
  const std::size_t passes = ceil_div(w.rows, cfg.lanes);
  const std::size_t tiles = ceil_div(w.cols, cfg.tile.tile_cols);
  std::vector<PassTiming> waves(passes * tiles);
  parallel_for(waves.size(), resolve_threads(threads), [&](std::size_t k) {
    waves[k] = time_wave(w, (k / tiles) * cfg.lanes, (k % tiles) * cfg.tile.tile_cols, cfg);
  });
  PassTiming total;
  for (const auto& wv : waves) total += wv;
  total.row_passes = passes;
  total.col_tiles = tiles;
  return total;
}

PassTiming time_baseline_pass(std::size_t rows, std::size_t cols, const AcceleratorConfig& cfg) {
  cfg.validate();
  if (rows == 0 || cols == 0) throw InvalidArgument("time_baseline_pass: empty matrix");
  const std::size_t passes = ceil_div(rows, cfg.lanes);
  const std::size_t tiles = ceil_div(cols, cfg.tile.tile_cols);
  std::map<std::size_t, LaneTrace> by_width;
  PassTiming total;
  for (std::size_t p = 0; p < passes; ++p) {
    const std::size_t active = std::min<std::size_t>(cfg.lanes, rows - p * cfg.lanes);
    for (std::size_t t = 0; t < tiles; ++t) {
      const std::size_t width = std::min(cfg.tile.tile_cols, cols - t * cfg.tile.tile_cols);
      auto it = by_width.find(width);
      if (it == by_width.end()) {
        it = by_width.emplace(width, simulate_baseline_lane(width, cfg.timing)).first;
      }
      const LaneTrace& tr = it->second;
      total.waves += 1;
      total.lane_runs += active;
      total.cycles += tr.total_cycles + cfg.drain_cycles(width);
      total.mults_issued += active * tr.mults_issued;
      total.events.mults += active * tr.mults_issued;
      total.events.queue_transfers += active * tr.queue_transfers;
      total.events += dataflow_events(active, width);
      total.peak_out_queue = std::max(total.peak_out_queue, tr.peak_out_queue);
    }
  }
  total.row_passes = passes;
  total.col_tiles = tiles;
  return total;
}

std::vector<std::int64_t> accumulate_adder_tree(
    std::span<const std::vector<std::int32_t>> lane_partials) {
  if (lane_partials.empty()) return {};
  const std::size_t n = lane_partials.front().size();
  for (const auto& p : lane_partials) {
    if (p.size() != n) throw InvalidArgument("accumulate_adder_tree: partial lengths differ");
  }
  std::vector<std::int64_t> sum(n, 0);
  for (const auto& p : lane_partials) {
    for (std::size_t j = 0; j < n; ++j) sum[j] += p[j];
  }
  return sum;
}

MvmResult lane_mvm(const QuantizedVector& x, const QuantizedMatrix& w,
                   const AcceleratorConfig& cfg) {
  if (x.size() != w.rows) throw InvalidArgument("lane_mvm: len(x) != rows");
  cfg.tile.validate();
  if (cfg.lanes < 1) throw InvalidArgument("lane_mvm: lanes must be >= 1");
  const std::size_t tile = cfg.tile.tile_cols;
  std::vector<std::int64_t> acc(w.cols, 0);
  MvmResult out;
  std::vector<std::vector<std::int32_t>> partials;
  for (std::size_t row0 = 0; row0 < w.rows; row0 += cfg.lanes) {
    const std::size_t rows = std::min<std::size_t>(cfg.lanes, w.rows - row0);
    for (std::size_t col0 = 0; col0 < w.cols; col0 += tile) {
      const std::size_t cols = std::min(tile, w.cols - col0);
      partials.assign(rows, {});
      for (std::size_t l = 0; l < rows; ++l) {
        ResultCache rc;
        auto r = reuse_row(x.data[row0 + l], w.row(row0 + l).subspan(col0, cols), rc);
        partials[l].assign(r.products.begin(), r.products.end());
        out.stats += r.stats;
      }
      const auto wave = accumulate_adder_tree(partials);
      for (std::size_t j = 0; j < cols; ++j) acc[col0 + j] += wave[j];
    }
  }
  out.output.resize(w.cols);
  for (std::size_t j = 0; j < w.cols; ++j) {
    if (acc[j] < std::numeric_limits<std::int32_t>::min() ||
        acc[j] > std::numeric_limits<std::int32_t>::max()) {
      throw SimulationError("lane_mvm: 32-bit accumulator overflow");
    }
    out.output[j] = std::int32_t(acc[j]);
  }
  return out;
}

QuantizedVector workload_input(const WorkloadSpec& spec, std::size_t layer_index,
                               std::size_t matrix_index, std::uint64_t token,
                               std::size_t length) {
  return gen_input(spec.input, length, derive_seed(spec.seed, {4, layer_index, matrix_index, token}));
}

namespace {

// FNV-1a over the little-endian bytes of every output element.
struct Checksum {
  std::uint64_t h = 0xcbf29ce484222325ull;
  template <class T>
  void add(const std::vector<T>& v) {
    for (T e : v) {
      auto u = std::uint64_t(std::int64_t(e));
      for (int b = 0; b < 8; ++b) {
        h ^= (u >> (8 * b)) & 0xff;
        h *= 0x100000001b3ull;
      }
    }
  }
};

struct Functional {
  std::uint64_t checksum = 0;
  ReuseStats stats;  // axllm only
};

// Output checksum over all tokens. axllm runs the lane-by-lane engine, the
// baseline the plain oracle; with verify the axllm result is also held
// against the oracle.
Functional run_functional(const MaterializedWorkload& wl, const MaterializedMatrix& m,
                          std::size_t li, std::size_t mi, const AcceleratorConfig& cfg,
                          bool axllm, const RunOptions& opts) {
  const auto tokens = wl.spec.tokens;
  std::vector<std::uint64_t> sums(tokens);
  std::vector<ReuseStats> stats(tokens);
  parallel_for(tokens, resolve_threads(opts.threads), [&](std::size_t t) {
    const auto x = workload_input(wl.spec, li, mi, t, m.weights.rows);
    Checksum cs;
    if (m.lora_a) {
      if (axllm) {
        auto r = lora_mvm(x, m.weights, *m.lora_a, *m.lora_b, cfg.tile);
        if (opts.verify && r.output != naive_lora(x, m.weights, *m.lora_a, *m.lora_b)) {
          throw SimulationError("run: LoRA output differs from the oracle at " + m.layer + "." +
                                m.name);
        }
        stats[t] = r.fused_stats;
        stats[t] += r.adaptor_stats;
        cs.add(r.output);
      } else {
        cs.add(naive_lora(x, m.weights, *m.lora_a, *m.lora_b));
      }
    } else if (axllm) {
      auto r = lane_mvm(x, m.weights, cfg);
      if (opts.verify && r.output != naive_mvm(x, m.weights)) {
        throw SimulationError("run: output differs from the oracle at " + m.layer + "." + m.name);
      }
      stats[t] = r.stats;
      cs.add(std::vector<std::int64_t>(r.output.begin(), r.output.end()));
    } else {
      auto y = naive_mvm(x, m.weights);
      cs.add(std::vector<std::int64_t>(y.begin(), y.end()));
    }
    sums[t] = cs.h;
  });
  Functional f;
  Checksum all;
  all.add(sums);
  f.checksum = all.h;
  for (const auto& s : stats) f.stats += s;
  return f;
}

RunReport run_machine(const MaterializedWorkload& wl, const AcceleratorConfig& cfg,
                      const RunOptions& opts, bool axllm) {
  cfg.validate();
  wl.spec.validate();
  const unsigned threads = resolve_threads(opts.threads);
  RunReport rep;
  rep.machine = axllm ? "axllm" : "baseline";
  rep.workload = wl.spec;
  rep.config = cfg;
  const std::uint64_t tokens = wl.spec.tokens;

  PassTiming all_timing;
  std::size_t k = 0;
  for (std::size_t li = 0; li < wl.spec.layers.size(); ++li) {
    const auto& layer = wl.spec.layers[li];
    for (std::size_t mi = 0; mi < layer.matrices.size(); ++mi, ++k) {
      if (k >= wl.matrices.size()) throw InvalidArgument("run: workload is not materialized");
      const auto& m = wl.matrices[k];
      MatrixReport mr;
      mr.layer = m.layer;
      mr.name = m.name;
      mr.rows = m.weights.rows;
      mr.cols = m.weights.cols;

      PassTiming tm, base;
      if (m.lora_a) {
        const auto fused = combine_lora(m.weights, *m.lora_a);
        mr.lora_rank = m.lora_a->cols;
        mr.overlap_rate = row_overlap_rate(m.weights, *m.lora_a);
        base = time_baseline_pass(fused.rows, fused.cols, cfg);
        base += time_baseline_pass(m.lora_b->rows, m.lora_b->cols, cfg);
        if (axllm) {
          tm = time_axllm_pass(fused, cfg, threads);
          mr.row_passes = tm.row_passes;
          mr.col_tiles = tm.col_tiles;
          const auto b_pass = time_axllm_pass(*m.lora_b, cfg, threads);
          tm += b_pass;
          mr.separate_cycles = (time_axllm_pass(m.weights, cfg, threads).cycles +
                                time_axllm_pass(*m.lora_a, cfg, threads).cycles + b_pass.cycles) *
                               tokens;
        } else {
          tm = base;
          mr.row_passes = ceil_div(fused.rows, cfg.lanes);
          mr.col_tiles = ceil_div(fused.cols, cfg.tile.tile_cols);
        }
      } else {
        base = time_baseline_pass(m.weights.rows, m.weights.cols, cfg);
        tm = axllm ? time_axllm_pass(m.weights, cfg, threads) : base;
        mr.row_passes = tm.row_passes;
        mr.col_tiles = tm.col_tiles;
      }

      const auto func = run_functional(wl, m, li, mi, cfg, axllm, opts);
      mr.output_checksum = func.checksum;
      if (axllm) {
        mr.reuse = func.stats;
        // Work conservation: the schedule issued exactly the engine's work.
        if (opts.verify && (tm.mults_issued * tokens != mr.reuse.multiplications ||
                            tm.reuses_issued * tokens != mr.reuse.reuses)) {
          throw SimulationError("run: timing and functional counters disagree at " + m.layer +
                                "." + m.name);
        }
      } else {
        mr.reuse.multiplications = base.mults_issued * tokens;
        mr.reuse.unique_histogram.assign(kCacheEntries + 1, 0);
      }
      mr.timing = tm.scaled(tokens);
      mr.cycles = mr.timing.cycles;
      mr.baseline_cycles = base.cycles * tokens;
      mr.baseline_events = base.events.scaled(tokens);

      all_timing += mr.timing;
      rep.reuse += mr.reuse;
      rep.baseline_events += mr.baseline_events;
      rep.baseline_cycles += mr.baseline_cycles;
      rep.matrices.push_back(std::move(mr));
    }
  }
  const std::uint64_t overhead = wl.spec.layer_overhead_cycles * wl.spec.layers.size() * tokens;
  rep.total_cycles = all_timing.cycles + overhead;
  rep.baseline_cycles += overhead;
  rep.speedup = double(rep.baseline_cycles) / double(rep.total_cycles);
  rep.events = all_timing.events;
  rep.reuse_rate = rep.reuse.processed() ? reuse_rate(rep.reuse) : 0.0;
  if (all_timing.rc_slice_cycles > 0) {
    rep.stall_fraction = double(all_timing.hazard_stall_cycles) / double(all_timing.rc_slice_cycles);
  }
  if (all_timing.routed_requests > 0) {
    rep.collision_rate =
        double(all_timing.rc_collision_events) / double(all_timing.routed_requests);
  }
  // The simulators throw on overflow; the peaks are checked here as well so
  // the report states it.
  if (all_timing.peak_rc_queue > cfg.slices.queue_depth) ++rep.flow_control_violations;
  if (all_timing.peak_mult_queue > cfg.timing.mult_queue_depth) ++rep.flow_control_violations;
  if (all_timing.peak_out_queue >
      cfg.timing.out_queue_depth * (axllm ? 1 : cfg.timing.baseline_multipliers)) {
    ++rep.flow_control_violations;
  }
  rep.energy = estimate_energy(rep.events, cfg.energy);
  rep.energy_baseline = estimate_energy(rep.baseline_events, cfg.energy);
  rep.verified = opts.verify && axllm;
  return rep;
}

}  // namespace

RunReport run_axllm(const MaterializedWorkload& workload, const AcceleratorConfig& cfg,
                    const RunOptions& opts) {
  return run_machine(workload, cfg, opts, true);
}

RunReport run_axllm(const WorkloadSpec& workload, const AcceleratorConfig& cfg,
                    const RunOptions& opts) {
  return run_machine(materialize(workload), cfg, opts, true);
}

RunReport run_baseline(const MaterializedWorkload& workload, const AcceleratorConfig& cfg,
                       const RunOptions& opts) {
  return run_machine(workload, cfg, opts, false);
}

RunReport run_baseline(const WorkloadSpec& workload, const AcceleratorConfig& cfg,
                       const RunOptions& opts) {
  return run_machine(materialize(workload), cfg, opts, false);
}

Comparison compare_reports(const RunReport& axllm, const RunReport& baseline) {
  if (!(axllm.workload == baseline.workload)) {
    throw InvalidArgument("compare: reports describe different workloads or seeds");
  }
  if (axllm.total_cycles == 0 || baseline.total_cycles == 0) {
    throw InvalidArgument("compare: zero-cycle report");
  }
  Comparison c;
  c.axllm_cycles = axllm.total_cycles;
  c.baseline_cycles = baseline.total_cycles;
  c.speedup = double(baseline.total_cycles) / double(axllm.total_cycles);
  c.energy_ratio = baseline.energy > 0.0 ? axllm.energy / baseline.energy : 1.0;
  c.energy_reduction = 1.0 - c.energy_ratio;
  c.reuse_rate = axllm.reuse_rate;
  c.stall_fraction = axllm.stall_fraction;
  c.collision_rate = axllm.collision_rate;
  return c;
}

}  // namespace axllm
