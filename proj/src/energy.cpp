// SPDX-License-Identifier: Apache-2.0
#include "axllm/energy.hpp"

#include <cmath>

#include "axllm/error.hpp"

namespace axllm {

EventCounters& EventCounters::operator+=(const EventCounters& o) {
  mults += o.mults;
  rc_accesses += o.rc_accesses;
  buffer_accesses += o.buffer_accesses;
  adds += o.adds;
  queue_transfers += o.queue_transfers;
  return *this;
}

EventCounters EventCounters::scaled(std::uint64_t factor) const {
  return {mults * factor, rc_accesses * factor, buffer_accesses * factor, adds * factor,
          queue_transfers * factor};
}

void EnergyModel::validate() const {
  for (double e : {e_mult, e_rc_access, e_buffer_access, e_add, e_queue}) {
    if (!std::isfinite(e) || e < 0.0) {
      throw InvalidArgument("energy model: coefficients must be finite and >= 0");
    }
  }
}

namespace {

double rest_energy(const EventCounters& c, const EnergyModel& m) {
  return double(c.rc_accesses) * m.e_rc_access + double(c.buffer_accesses) * m.e_buffer_access +
         double(c.adds) * m.e_add + double(c.queue_transfers) * m.e_queue;
}

}  // namespace

double estimate_energy(const EventCounters& c, const EnergyModel& model) {
  return double(c.mults) * model.e_mult + rest_energy(c, model);
}

double calibrate_mult_energy(const EventCounters& axllm, const EventCounters& baseline,
                             double target_ratio, const EnergyModel& model) {
  model.validate();
  if (!(target_ratio > 0.0)) throw InvalidArgument("calibration: target ratio must be > 0");
  // mults_a e + rest_a = r (mults_b e + rest_b), solved for e.
  const double denom = double(axllm.mults) - target_ratio * double(baseline.mults);
  const double numer = target_ratio * rest_energy(baseline, model) - rest_energy(axllm, model);
  if (denom == 0.0) throw InvalidArgument("calibration: multiplier counts give no leverage");
  const double e = numer / denom;
  if (!std::isfinite(e) || e < 0.0) {
    throw InvalidArgument("calibration: target ratio unreachable with a non-negative e_mult");
  }
  return e;
}

}  // namespace axllm
