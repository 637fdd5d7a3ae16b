// SPDX-License-Identifier: Apache-2.0
#include "axllm/lane_timing.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <optional>
#include <sstream>

#include "axllm/error.hpp"
#include "axllm/quantizer.hpp"

namespace axllm {

void LaneTimingConfig::validate() const {
  if (mult_latency < 1 || mult_initiation_interval < 1 || buffer_access_latency < 1 ||
      baseline_initiation_interval < 1) {
    throw InvalidArgument("LaneTimingConfig: latencies and intervals must be >= 1");
  }
  if (out_queue_depth < 1 || mult_queue_depth < 1) {
    throw InvalidArgument("LaneTimingConfig: queue depths must be >= 1");
  }
  if (baseline_multipliers < 1) {
    throw InvalidArgument("LaneTimingConfig: baseline_multipliers must be >= 1");
  }
}

namespace {

enum class SlotState : std::uint8_t { Absent, Queued, InFlight, Valid };

struct Held {
  std::uint32_t column;
  std::uint8_t slot;
  std::uint64_t fetched;
  bool hazard_seen = false;
};

struct InFlight {
  std::uint64_t done;
  std::uint32_t column;
  std::uint8_t slot;
};

struct Waiting {
  std::uint64_t arrived;
  std::uint32_t column;
};

// Generous bound on a lane's run time; exceeding it means the model deadlocked.
std::uint64_t cycle_limit(std::size_t n, const LaneTimingConfig& cfg) {
  const std::uint64_t per = std::uint64_t(cfg.mult_latency) + cfg.mult_initiation_interval +
                            cfg.baseline_initiation_interval + cfg.buffer_access_latency + 4;
  return (std::uint64_t(n) + 8) * per * 4;
}

void emit(LaneEventLog* log, std::uint64_t c, LaneEventKind k, std::uint32_t col,
          std::uint8_t slot) {
  if (log) log->push_back({c, k, col, slot});
}

}  // namespace

LaneTrace simulate_lane(std::int8_t x_elem, std::span<const std::int8_t> w_row,
                        const LaneTimingConfig& cfg, LaneEventLog* log) {
  cfg.validate();
  if (x_elem == -128) throw InvalidArgument("simulate_lane: input code -128");
  LaneTrace t;
  const std::size_t n = w_row.size();
  if (n == 0) return t;

  std::array<SlotState, kCacheEntries> state{};
  std::array<std::uint64_t, kCacheEntries> written_at{};

  std::optional<Held> held;
  std::deque<Held> mult_feed;
  std::deque<InFlight> in_flight;
  std::deque<Waiting> reuse_pipe;
  std::deque<Waiting> mult_out, reuse_out;
  std::uint32_t mult_credits_used = 0;
  std::uint32_t reuse_credits_used = 0;
  std::uint64_t next_issue = 0;
  std::uint64_t last_write = 0;
  std::size_t next_col = 0;
  const std::uint64_t limit = cycle_limit(n, cfg);

  for (std::uint64_t c = 0;; ++c) {
    if (c > limit) throw SimulationError("simulate_lane: no forward progress");

    // Multiply writeback fills the cache; the reuse path lands its reads.
    int written_slot = -1;
    while (!in_flight.empty() && in_flight.front().done == c) {
      const auto f = in_flight.front();
      in_flight.pop_front();
      state[f.slot] = SlotState::Valid;
      written_at[f.slot] = c;
      written_slot = f.slot;
      ++t.rc_writes;
      mult_out.push_back({c, f.column});
      ++t.queue_transfers;
      emit(log, c, LaneEventKind::MultDone, f.column, f.slot);
    }
    while (!reuse_pipe.empty() && reuse_pipe.front().arrived == c) {
      reuse_out.push_back(reuse_pipe.front());
      reuse_pipe.pop_front();
      ++t.queue_transfers;
    }
    if (mult_out.size() > cfg.out_queue_depth || reuse_out.size() > cfg.out_queue_depth) {
      throw SimulationError("simulate_lane: out-queue overflow");
    }
    t.peak_out_queue = std::max<std::uint32_t>(
        t.peak_out_queue, std::uint32_t(std::max(mult_out.size(), reuse_out.size())));

    // One Out_buff write per cycle; multiplier results go first.
    auto* port = !mult_out.empty() ? &mult_out : (!reuse_out.empty() ? &reuse_out : nullptr);
    if (port) {
      const auto w = port->front();
      port->pop_front();
      (port == &mult_out ? mult_credits_used : reuse_credits_used) -= 1;
      if (w.arrived < c) ++t.writeback_conflicts;
      last_write = c;
      emit(log, c, LaneEventKind::OutWrite, w.column, 0);
    }

    // Dispatch: cache lookup for the held weight.
    if (held && held->fetched < c) {
      const std::uint8_t slot = held->slot;
      const bool readable = state[slot] == SlotState::Valid && written_at[slot] < c;
      if (readable) {
        if (reuse_credits_used < cfg.out_queue_depth) {
          if (written_slot == slot) throw SimulationError("simulate_lane: RC read/write same slot");
          ++reuse_credits_used;
          reuse_pipe.push_back({c + cfg.buffer_access_latency, held->column});
          ++t.rc_reads;
          ++t.reuses_issued;
          emit(log, c, LaneEventKind::DispatchHit, held->column, slot);
          held.reset();
        } else {
          ++t.structural_stall_cycles;
        }
      } else if (state[slot] == SlotState::Queued) {
        // Product not even issued yet: the multiplier is the bottleneck.
        ++t.mult_wait_cycles;
      } else if (state[slot] != SlotState::Absent) {
        ++t.stall_cycles;
        if (!held->hazard_seen) {
          held->hazard_seen = true;
          ++t.hazard_events;
        }
        emit(log, c, LaneEventKind::HazardStall, held->column, slot);
      } else if (mult_feed.size() < cfg.mult_queue_depth) {
        state[slot] = SlotState::Queued;
        mult_feed.push_back(*held);
        ++t.queue_transfers;
        ++t.mults_issued;
        emit(log, c, LaneEventKind::DispatchMiss, held->column, slot);
        held.reset();
      } else {
        ++t.structural_stall_cycles;
      }
    }

    // Multiplier issue.
    if (c >= next_issue && !mult_feed.empty() && mult_credits_used < cfg.out_queue_depth) {
      const auto h = mult_feed.front();
      mult_feed.pop_front();
      state[h.slot] = SlotState::InFlight;
      ++mult_credits_used;
      in_flight.push_back({c + cfg.mult_latency, h.column, h.slot});
      next_issue = c + cfg.mult_initiation_interval;
      emit(log, c, LaneEventKind::MultIssue, h.column, h.slot);
    }

    // Fetch into the free register.
    if (!held && next_col < n) {
      const std::uint32_t col = std::uint32_t(next_col++);
      const auto slot = rc_index(w_row[col]).index;
      held = Held{col, slot, c};
      emit(log, c, LaneEventKind::Fetch, col, slot);
    }

    if (next_col == n && !held && mult_feed.empty() && in_flight.empty() && reuse_pipe.empty() &&
        mult_out.empty() && reuse_out.empty()) {
      break;
    }
  }
  t.total_cycles = last_write + 1;
  return t;
}

LaneTrace simulate_baseline_lane(std::size_t row_len, const LaneTimingConfig& cfg) {
  cfg.validate();
  LaneTrace t;
  if (row_len == 0) return t;

  // Fetch width, multiplier count and Out_buff write ports all equal m.
  const std::uint32_t m = cfg.baseline_multipliers;
  const std::size_t feed_depth = std::size_t(cfg.mult_queue_depth) * m;
  const std::uint32_t out_depth = cfg.out_queue_depth * m;

  std::deque<std::uint64_t> held;  // fetch cycles
  std::deque<std::uint64_t> feed;
  std::deque<std::uint64_t> in_flight;  // completion cycles, sorted
  std::deque<std::uint64_t> out;        // arrival cycles
  std::vector<std::uint64_t> next_issue(m, 0);
  std::uint32_t credits_used = 0;
  std::uint64_t last_write = 0;
  std::size_t fetched = 0;
  const std::uint64_t limit = cycle_limit(row_len, cfg);

  for (std::uint64_t c = 0;; ++c) {
    if (c > limit) throw SimulationError("simulate_baseline_lane: no forward progress");
    while (!in_flight.empty() && in_flight.front() == c) {
      in_flight.pop_front();
      out.push_back(c);
      ++t.queue_transfers;
    }
    if (out.size() > out_depth) throw SimulationError("simulate_baseline_lane: out-queue overflow");
    t.peak_out_queue = std::max<std::uint32_t>(t.peak_out_queue, std::uint32_t(out.size()));
    for (std::uint32_t p = 0; p < m && !out.empty(); ++p) {
      if (out.front() < c) ++t.writeback_conflicts;
      out.pop_front();
      --credits_used;
      last_write = c;
    }
    for (std::uint32_t p = 0; p < m && !held.empty() && held.front() < c; ++p) {
      if (feed.size() >= feed_depth) {
        ++t.structural_stall_cycles;
        break;
      }
      held.pop_front();
      feed.push_back(c);
      ++t.queue_transfers;
      ++t.mults_issued;
    }
    for (std::uint32_t p = 0; p < m; ++p) {
      if (c < next_issue[p] || feed.empty() || credits_used >= out_depth) continue;
      feed.pop_front();
      ++credits_used;
      in_flight.push_back(c + cfg.mult_latency);
      next_issue[p] = c + cfg.baseline_initiation_interval;
    }
    std::sort(in_flight.begin(), in_flight.end());
    while (held.size() < m && fetched < row_len) {
      held.push_back(c);
      ++fetched;
    }
    if (fetched == row_len && held.empty() && feed.empty() && in_flight.empty() && out.empty()) {
      break;
    }
  }
  t.total_cycles = last_write + 1;
  return t;
}

double stall_fraction(const LaneTrace& trace) {
  if (trace.total_cycles == 0) throw InvalidArgument("stall_fraction: zero-cycle trace");
  return double(trace.stall_cycles) / double(trace.total_cycles);
}

}  // namespace axllm
