#include "sparsegaze/duplex_timing.hpp"

#include <algorithm>
#include <set>

namespace sparsegaze {

void LedElectrical::validate() const {
  if (!(sensing_wavelength < emission_wavelength))
    throw InvalidArgument("LED must sense at a shorter wavelength than it emits");
  if (!(exposure > 0.0)) throw InvalidArgument("exposure must be positive");
  if (!(max_exposure >= exposure)) throw InvalidArgument("max_exposure must be >= exposure");
  if (!(reverse_voltage > 0.0)) throw InvalidArgument("reverse_voltage must be positive");
  if (!(discharge_gain > 0.0)) throw InvalidArgument("discharge_gain must be positive");
  if (!(cone_angle > 0.0 && cone_angle <= 180.0))
    throw InvalidArgument("cone_angle must lie in (0, 180] deg");
}

double duplex_measure(const LedElectrical& led, double irradiance) {
  led.validate();
  if (!(irradiance >= 0.0)) throw InvalidArgument("irradiance must be non-negative");
  const double v = led.reverse_voltage - led.discharge_gain * irradiance * led.exposure;
  return std::clamp(v, 0.0, led.reverse_voltage);
}

double adapt_exposure(double measured_voltage, const LedElectrical& led,
                      const ExposurePolicy& policy) {
  if (measured_voltage < policy.saturation_fraction * led.reverse_voltage)
    return 0.5 * led.exposure;
  if (measured_voltage > policy.underexposure_fraction * led.reverse_voltage)
    return std::min(policy.growth * led.exposure, led.max_exposure);
  return led.exposure;
}

bool spectrally_visible(const LedElectrical& receiver, double emitter_wavelength) {
  return emitter_wavelength >= receiver.sensing_wavelength;
}

std::string_view to_string(SlotRole role) {
  switch (role) {
    case SlotRole::Emit: return "emit";
    case SlotRole::Sense: return "sense";
    case SlotRole::Idle: return "idle";
  }
  return "idle";
}

double Schedule::busy_time() const {
  double t = 0.0;
  for (const Slot& s : slots) t += s.duration;
  return t;
}

double Schedule::active_time() const {
  // Everything up to the trailing idle padding.
  double t = busy_time();
  if (!slots.empty() && slots.back().role == SlotRole::Idle && pulses_per_emitter > 0)
    t -= slots.back().duration;
  return t;
}

void Schedule::audit() const {
  if (!(frame_period > 0.0)) throw InvalidArgument("schedule frame period must be positive");
  std::set<int> sensed;
  for (const Slot& s : slots) {
    if (s.duration < 0.0) throw InvalidArgument("schedule slot with negative duration");
    if (s.role == SlotRole::Sense && !sensed.insert(s.device).second)
      throw InvalidArgument("device " + std::to_string(s.device) + " senses twice in one frame");
  }
  if (busy_time() > frame_period * (1.0 + 1e-12))
    throw InvalidArgument("schedule slots overrun the frame period");
}

Schedule plan_round_robin(int n_leds, double sense_duration, double settle_gap) {
  if (n_leds < 2) throw InvalidArgument("round robin needs at least two LEDs");
  if (!(sense_duration > 0.0) || settle_gap < 0.0)
    throw InvalidArgument("sense duration must be positive and the gap non-negative");
  Schedule sched;
  for (int i = 0; i < n_leds; ++i) {
    Slot sense{SlotRole::Sense, i, sense_duration, {}};
    for (int j = 0; j < n_leds; ++j)
      if (j != i) sense.partners.push_back(j);
    sched.slots.push_back(std::move(sense));
    if (settle_gap > 0.0) sched.slots.push_back(Slot{SlotRole::Idle, -1, settle_gap, {}});
  }
  sched.frame_period = n_leds * (sense_duration + settle_gap);
  sched.audit();
  return sched;
}

Schedule plan_pulsed(int n_emitters, int pulses_per_emitter, double pulse_on, double pulse_period,
                     double target_rate, int sensors_per_emitter) {
  if (n_emitters < 1) throw InvalidArgument("pulsed schedule needs at least one emitter");
  if (pulses_per_emitter < 1) throw InvalidArgument("pulses_per_emitter must be at least 1");
  if (!(pulse_on > 0.0 && pulse_on <= pulse_period))
    throw InvalidArgument("pulse_on must lie in (0, pulse_period]");
  if (!(target_rate > 0.0)) throw InvalidArgument("target rate must be positive");
  const double active = n_emitters * pulses_per_emitter * pulse_period;
  const double period = 1.0 / target_rate;
  if (active > period * (1.0 + 1e-12))
    throw InvalidArgument("target rate infeasible: active time " + std::to_string(active * 1e6) +
                          " us exceeds the frame period " + std::to_string(period * 1e6) + " us");
  Schedule sched;
  sched.pulses_per_emitter = pulses_per_emitter;
  int next_sensor = n_emitters;  // photodiode ids follow the emitter ids
  for (int e = 0; e < n_emitters; ++e) {
    std::vector<int> sensors;
    for (int k = 0; k < sensors_per_emitter; ++k) sensors.push_back(next_sensor++);
    for (int p = 0; p < pulses_per_emitter; ++p) {
      sched.slots.push_back(Slot{SlotRole::Emit, e, pulse_on, sensors});
      if (pulse_period > pulse_on)
        sched.slots.push_back(Slot{SlotRole::Idle, -1, pulse_period - pulse_on, {}});
    }
  }
  sched.slots.push_back(Slot{SlotRole::Idle, -1, period - active, {}});
  sched.frame_period = period;
  sched.audit();
  return sched;
}

double power_estimate(const Schedule& schedule, std::span<const DrivePoint> drive,
                      double front_end_baseline) {
  double energy = 0.0;
  auto charge = [&](int device, double duration) {
    if (device < 0 || static_cast<std::size_t>(device) >= drive.size())
      throw InvalidArgument("power_estimate: no drive point for device " + std::to_string(device));
    const DrivePoint& d = drive[static_cast<std::size_t>(device)];
    energy += d.voltage * d.current * duration;
  };
  for (const Slot& s : schedule.slots) {
    if (s.role == SlotRole::Emit) charge(s.device, s.duration);
    if (s.role == SlotRole::Sense)
      for (int e : s.partners) charge(e, s.duration);
  }
  if (schedule.slots.empty()) return front_end_baseline;
  return energy / schedule.frame_period + front_end_baseline;
}

}  // namespace sparsegaze
