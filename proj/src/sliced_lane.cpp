// SPDX-License-Identifier: Apache-2.0
#include "axllm/sliced_lane.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <sstream>

#include "axllm/error.hpp"

namespace axllm {

void SliceConfig::validate() const {
  if (num_slices < 1 || slice_size < 1 || queue_depth < 1) {
    throw InvalidArgument("SliceConfig: slices, slice size and queue depth must be >= 1");
  }
  if (num_slices > 32) throw InvalidArgument("SliceConfig: at most 32 slices");
  const auto r = effective_rc_slices();
  if (r < 1 || kCacheEntries % r != 0) {
    std::ostringstream os;
    os << "SliceConfig: rc_slices " << r << " must divide " << kCacheEntries;
    throw InvalidArgument(os.str());
  }
}

std::uint32_t rc_slice_of(CacheSlot slot, const SliceConfig& cfg) {
  const auto r = cfg.effective_rc_slices();
  if (cfg.mapping == RcSliceMapping::Modulo) return slot.index % r;
  return slot.index / std::uint32_t(kCacheEntries / r);
}

namespace {

enum class SlotState : std::uint8_t { Absent, Queued, InFlight, Valid };

struct Request {
  std::uint32_t column;
  std::uint8_t slot;
  std::uint8_t source;
  std::uint64_t fetched;
  bool hazard_seen = false;
  bool contention_seen = false;
};

struct InFlight {
  std::uint64_t done;
  Request req;
};

struct ReuseResult {
  std::uint64_t arrives;
  std::uint32_t source;
  std::uint32_t rc_slice;
};

struct OutSlice {
  std::deque<std::uint64_t> from_mult;            // arrival cycles
  std::vector<std::deque<std::uint64_t>> from_rc;  // one per RC slice
  std::uint32_t mult_credits = 0;
  std::vector<std::uint32_t> rc_credits;
  std::uint32_t rr = 0;
};

void check_depth(std::size_t size, std::uint32_t depth, const char* what) {
  if (size > depth) {
    std::ostringstream os;
    os << "simulate_sliced_lane: " << what << " holds " << size << " > depth " << depth;
    throw SimulationError(os.str());
  }
}

}  // namespace

SlicedLaneTrace simulate_sliced_lane(std::int8_t x_elem, std::span<const std::int8_t> w_row,
                                     const SliceConfig& cfg, const LaneTimingConfig& timing,
                                     GrantLog* grants) {
  cfg.validate();
  timing.validate();
  if (x_elem == -128) throw InvalidArgument("simulate_sliced_lane: input code -128");
  if (w_row.size() > cfg.lane_buffer()) {
    std::ostringstream os;
    os << "simulate_sliced_lane: row of " << w_row.size() << " exceeds lane buffer of "
       << cfg.lane_buffer();
    throw InvalidArgument(os.str());
  }

  const std::uint32_t P = cfg.num_slices;
  const std::uint32_t R = cfg.effective_rc_slices();
  const std::uint32_t S = cfg.queue_depth;

  SlicedLaneTrace t;
  t.rc_slice_count = R;
  t.occupancy_histograms.assign(R, std::vector<std::uint64_t>(std::size_t(P) * S + 1, 0));
  t.peak_rc_queue.assign(std::size_t(R) * P, 0);
  t.peak_mult_queue.assign(R, 0);
  t.peak_out_queue.assign(std::size_t(P) * (R + 1), 0);
  const std::size_t n = w_row.size();
  if (n == 0) return t;

  // Pre-decode W_buff slices: column j goes to slice j mod P.
  std::vector<std::vector<Request>> wbuf(P);
  for (std::uint32_t j = 0; j < n; ++j) {
    const auto slot = rc_index(w_row[j]);
    wbuf[j % P].push_back(Request{j, slot.index, std::uint8_t(j % P), 0});
  }
  std::vector<std::size_t> wpos(P, 0);

  std::array<SlotState, kCacheEntries> state{};
  std::array<std::uint64_t, kCacheEntries> written_at{};

  std::vector<std::deque<Request>> rcq(std::size_t(R) * P);  // index r * P + s
  std::vector<std::uint32_t> rc_rr(R, 0);
  std::vector<std::deque<Request>> mult_feed(R);
  std::uint32_t mult_rr = 0;
  std::uint64_t next_issue = 0;
  std::deque<InFlight> in_flight;
  std::deque<ReuseResult> reuse_pipe;
  std::vector<OutSlice> outs(P);
  for (auto& o : outs) {
    o.from_rc.resize(R);
    o.rc_credits.assign(R, 0);
  }

  const std::uint32_t D = timing.out_queue_depth;
  const std::uint32_t MD = timing.mult_queue_depth;
  std::uint64_t last_write = 0;
  std::size_t retired = 0;
  const std::uint64_t limit =
      (std::uint64_t(n) + 8) *
      (timing.mult_latency + timing.mult_initiation_interval + timing.buffer_access_latency + 4) * 4;

  std::array<bool, kCacheEntries> written_now{};
  for (std::uint64_t c = 0;; ++c) {
    if (c > limit) throw SimulationError("simulate_sliced_lane: no forward progress");
    written_now.fill(false);

    // Multiplier writeback (RC write port) and reuse-read arrivals.
    while (!in_flight.empty() && in_flight.front().done == c) {
      const auto f = in_flight.front();
      in_flight.pop_front();
      state[f.req.slot] = SlotState::Valid;
      written_at[f.req.slot] = c;
      written_now[f.req.slot] = true;
      ++t.rc_writes;
      auto& o = outs[f.req.source];
      o.from_mult.push_back(c);
      ++t.queue_transfers;
      check_depth(o.from_mult.size(), D, "Out_buff multiplier queue");
      auto& peak = t.peak_out_queue[std::size_t(f.req.source) * (R + 1) + R];
      peak = std::max<std::uint32_t>(peak, std::uint32_t(o.from_mult.size()));
    }
    while (!reuse_pipe.empty() && reuse_pipe.front().arrives == c) {
      const auto r = reuse_pipe.front();
      reuse_pipe.pop_front();
      auto& q = outs[r.source].from_rc[r.rc_slice];
      q.push_back(c);
      ++t.queue_transfers;
      check_depth(q.size(), D, "Out_buff RC queue");
      auto& peak = t.peak_out_queue[std::size_t(r.source) * (R + 1) + r.rc_slice];
      peak = std::max<std::uint32_t>(peak, std::uint32_t(q.size()));
    }

    // Out_buff: one write per slice per cycle, multiplier queue first.
    std::uint32_t retired_now = 0;
    for (auto& o : outs) {
      std::deque<std::uint64_t>* q = nullptr;
      std::uint32_t* credit = nullptr;
      if (!o.from_mult.empty()) {
        q = &o.from_mult;
        credit = &o.mult_credits;
      } else {
        for (std::uint32_t k = 0; k < R; ++k) {
          const std::uint32_t r = (o.rr + k) % R;
          if (!o.from_rc[r].empty()) {
            q = &o.from_rc[r];
            credit = &o.rc_credits[r];
            o.rr = (r + 1) % R;
            break;
          }
        }
      }
      if (!q) continue;
      if (q->front() < c) ++t.writeback_conflicts;
      q->pop_front();
      --*credit;
      ++retired_now;
      last_write = c;
    }
    retired += retired_now;
    t.max_retired_per_cycle = std::max(t.max_retired_per_cycle, retired_now);

    // RC slices: round-robin over the P source queues, one grant per slice.
    for (std::uint32_t r = 0; r < R; ++r) {
      std::uint32_t waiting = 0;
      for (std::uint32_t s = 0; s < P; ++s) {
        const auto& q = rcq[std::size_t(r) * P + s];
        if (!q.empty() && q.front().fetched < c) {
          waiting |= 1u << s;
        }
      }
      std::uint32_t ready = 0;
      if (grants) {
        for (std::uint32_t s = 0; s < P; ++s) {
          if (!(waiting & (1u << s))) continue;
          const auto& head = rcq[std::size_t(r) * P + s].front();
          const std::uint8_t slot = head.slot;
          const bool hit_ok = state[slot] == SlotState::Valid && written_at[slot] < c &&
                              outs[head.source].rc_credits[r] < D;
          const bool miss_ok = state[slot] == SlotState::Absent && mult_feed[r].size() < MD;
          if (hit_ok || miss_ok) ready |= 1u << s;
        }
      }

      bool granted = false;
      bool hazard = false;
      bool mult_wait = false;
      bool tried = false;
      for (std::uint32_t k = 0; k < P && !granted; ++k) {
        const std::uint32_t s = (rc_rr[r] + k) % P;
        if (!(waiting & (1u << s))) continue;
        // Strict round robin stops at the first waiting head, granted or not.
        if (tried && !cfg.skip_blocked_heads) break;
        tried = true;
        auto& q = rcq[std::size_t(r) * P + s];
        auto& head = q.front();
        const std::uint8_t slot = head.slot;
        if (state[slot] == SlotState::Valid && written_at[slot] < c) {
          auto& o = outs[head.source];
          if (o.rc_credits[r] >= D) continue;
          if (written_now[slot]) throw SimulationError("simulate_sliced_lane: RC read/write same slot");
          ++o.rc_credits[r];
          reuse_pipe.push_back({c + timing.buffer_access_latency, head.source, r});
          ++t.rc_reads;
          ++t.reuses_issued;
          granted = true;
        } else if (state[slot] == SlotState::Queued) {
          mult_wait = true;
          continue;
        } else if (state[slot] != SlotState::Absent) {
          hazard = true;
          if (!head.hazard_seen) {
            head.hazard_seen = true;
            ++t.hazard_events;
          }
          continue;
        } else {
          if (mult_feed[r].size() >= MD) continue;
          state[slot] = SlotState::Queued;
          mult_feed[r].push_back(head);
          ++t.queue_transfers;
          ++t.mults_issued;
          check_depth(mult_feed[r].size(), MD, "multiplier feed queue");
          t.peak_mult_queue[r] =
              std::max<std::uint32_t>(t.peak_mult_queue[r], std::uint32_t(mult_feed[r].size()));
          granted = true;
        }
        if (granted) {
          if (grants) grants->push_back({c, r, s, waiting, ready});
          q.pop_front();
          rc_rr[r] = (s + 1) % P;
        }
      }
      if (!granted && waiting != 0) {
        if (hazard) {
          ++t.hazard_stall_cycles;
        } else if (mult_wait) {
          ++t.mult_wait_cycles;
        } else {
          ++t.structural_stall_cycles;
        }
      }
    }

    // Shared multiplier, fed round-robin by the RC slices.
    if (c >= next_issue) {
      for (std::uint32_t k = 0; k < R; ++k) {
        const std::uint32_t r = (mult_rr + k) % R;
        if (mult_feed[r].empty()) continue;
        auto& o = outs[mult_feed[r].front().source];
        if (o.mult_credits >= D) continue;
        ++o.mult_credits;
        state[mult_feed[r].front().slot] = SlotState::InFlight;
        in_flight.push_back({c + timing.mult_latency, mult_feed[r].front()});
        mult_feed[r].pop_front();
        next_issue = c + timing.mult_initiation_interval;
        mult_rr = (r + 1) % R;
        break;
      }
    }

    // Fetch: each W_buff slice routes its next weight if it holds a credit.
    for (std::uint32_t s = 0; s < P; ++s) {
      if (wpos[s] == wbuf[s].size()) continue;
      Request req = wbuf[s][wpos[s]];
      const std::uint32_t r = rc_slice_of(CacheSlot{req.slot, 1}, cfg);
      auto& q = rcq[std::size_t(r) * P + s];
      if (q.size() >= S) {
        ++t.credit_stall_cycles;
        continue;
      }
      req.fetched = c;
      q.push_back(req);
      ++wpos[s];
      ++t.routed_requests;
      ++t.queue_transfers;
      check_depth(q.size(), S, "RC slice queue");
      auto& peak = t.peak_rc_queue[std::size_t(r) * P + s];
      peak = std::max<std::uint32_t>(peak, std::uint32_t(q.size()));
    }

    for (std::uint32_t r = 0; r < R; ++r) {
      std::size_t occ = 0;
      std::uint32_t sources = 0;
      for (std::uint32_t s = 0; s < P; ++s) {
        const auto size = rcq[std::size_t(r) * P + s].size();
        occ += size;
        sources += size > 0;
      }
      ++t.occupancy_histograms[r][occ];
      // Requests from two or more W_buff slices share this RC slice: every
      // one of them has met a rival.
      if (sources >= 2) {
        for (std::uint32_t s = 0; s < P; ++s) {
          for (auto& req : rcq[std::size_t(r) * P + s]) {
            if (!req.contention_seen) {
              req.contention_seen = true;
              ++t.rc_collision_events;
            }
          }
        }
      }
    }

    if (retired == n) break;
  }
  t.total_cycles = last_write + 1;
  return t;
}

double collision_rate(const SlicedLaneTrace& trace) {
  if (trace.routed_requests == 0) throw InvalidArgument("collision_rate: no routed requests");
  return double(trace.rc_collision_events) / double(trace.routed_requests);
}

double stall_fraction(const SlicedLaneTrace& trace) {
  if (trace.total_cycles == 0) throw InvalidArgument("stall_fraction: zero-cycle trace");
  return double(trace.hazard_stall_cycles) /
         (double(trace.total_cycles) * double(std::max<std::uint32_t>(1, trace.rc_slice_count)));
}

}  // namespace axllm
