// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace axllm {

/// Event tallies that feed the energy proxy.
struct EventCounters {
  std::uint64_t mults = 0;
  std::uint64_t rc_accesses = 0;      // reads + writes
  std::uint64_t buffer_accesses = 0;  // W_buff reads, Out_buff writes and drain reads
  std::uint64_t adds = 0;             // adder tree and output accumulation
  std::uint64_t queue_transfers = 0;

  EventCounters& operator+=(const EventCounters& o);
  EventCounters scaled(std::uint64_t factor) const;
  friend bool operator==(const EventCounters&, const EventCounters&) = default;
};

/// Energy per event in arbitrary units. kCalibratedMultEnergy replaces the
/// nominal 9.0 multiplier cost; see docs/energy.md for how it was obtained.
inline constexpr double kNominalMultEnergy = 9.0;
inline constexpr double kCalibratedMultEnergy = 5.8043;

struct EnergyModel {
  double e_mult = kCalibratedMultEnergy;
  double e_rc_access = 1.0;
  double e_buffer_access = 1.0;
  double e_add = 1.0;
  double e_queue = 0.25;

  /// Every coefficient finite and >= 0. Throws InvalidArgument.
  void validate() const;
  friend bool operator==(const EnergyModel&, const EnergyModel&) = default;
};

double estimate_energy(const EventCounters& c, const EnergyModel& model);

/// The e_mult that makes energy(axllm) / energy(baseline) equal target_ratio
/// with every other coefficient held at model's values. Throws
/// InvalidArgument if no non-negative solution exists.
double calibrate_mult_energy(const EventCounters& axllm, const EventCounters& baseline,
                             double target_ratio, const EnergyModel& model);

}  // namespace axllm
