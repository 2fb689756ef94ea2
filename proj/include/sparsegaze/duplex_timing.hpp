#pragma once

#include "sparsegaze/core.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace sparsegaze {

/// Electrical/optical parameters of one LED that can both emit and sense.
struct LedElectrical {
  double forward_voltage = 1.5;        // V_DC
  double reverse_voltage = 5.0;        // V_reverse
  double emission_wavelength = 940.0;  // lambda_out, nm
  double sensing_wavelength = 850.0;   // lambda_in, nm
  double exposure = 200e-6;            // dt_exp, s
  double max_exposure = 2e-3;          // upper bound for adapt_exposure, s
  double discharge_gain = 1.0;         // V per (irradiance * s)
  double drive_current = 0.067;        // A
  double cone_angle = 120.0;           // deg

  void validate() const;
};

/// Voltage left on the reverse-charged junction after discharging for
/// the exposure time under `irradiance`: clamp(V_rev - k E dt, 0, V_rev).
/// A result of 0 means the junction fully discharged (saturated).
double duplex_measure(const LedElectrical& led, double irradiance);

/// Dead-band exposure controller thresholds, as fractions of V_reverse.
struct ExposurePolicy {
  double saturation_fraction = 0.1;
  double underexposure_fraction = 0.8;
  double growth = 1.5;
};

/// Halves the exposure near saturation, grows it (up to max_exposure) when
/// underexposed, otherwise keeps it.
double adapt_exposure(double measured_voltage, const LedElectrical& led,
                      const ExposurePolicy& policy = {});

/// True if light from an emitter at `emitter_wavelength` registers on the
/// receiving LED (its sensing band lies at or below the emission).
bool spectrally_visible(const LedElectrical& receiver, double emitter_wavelength);

enum class SlotRole { Emit, Sense, Idle };

std::string_view to_string(SlotRole role);

struct Slot {
  SlotRole role = SlotRole::Idle;
  int device = -1;
  double duration = 0.0;
  /// Sense slots: devices emitting meanwhile. Emit slots: sensors
  /// integrating meanwhile.
  std::vector<int> partners;
};

struct Schedule {
  std::vector<Slot> slots;
  double frame_period = 0.0;
  int pulses_per_emitter = 0;

  double frame_rate() const { return 1.0 / frame_period; }
  double busy_time() const;
  /// Time spent in emit/sense slots before the idle padding.
  double active_time() const;
  /// Throws InvalidArgument if a device senses twice in a frame or the
  /// slots overrun the frame period.
  void audit() const;
};

/// One sense slot per LED, the other LEDs emitting meanwhile, followed by
/// a settle gap. frame_period = n (sense + gap).
Schedule plan_round_robin(int n_leds, double sense_duration, double settle_gap = 0.0);

/// Pulsed illumination: each emitter fires `pulses_per_emitter` pulses of
/// `pulse_on` once every `pulse_period`, then the frame idles to hit
/// `target_rate` exactly. `sensors_per_emitter` photodiodes integrate
/// during each emitter's pulses.
Schedule plan_pulsed(int n_emitters, int pulses_per_emitter, double pulse_on, double pulse_period,
                     double target_rate, int sensors_per_emitter = 4);

struct DrivePoint {
  double voltage = 0.0;
  double current = 0.0;
};

/// Average power in watts: sum over emitting time of V I / frame_period,
/// plus the front-end baseline. `drive` is indexed by device id.
double power_estimate(const Schedule& schedule, std::span<const DrivePoint> drive,
                      double front_end_baseline = 0.0);

/// Reference figures of the two prototypes.
namespace prototype {
inline constexpr double kPdPulseOn = 3e-6;
inline constexpr double kPdPulsePeriod = 24e-6;
inline constexpr int kPdPulsesPerEmitter = 4;
inline constexpr int kPdEmitters = 2;
inline constexpr double kPdRate = 400.0;
inline constexpr double kPdLedCurrent = 0.067;
inline constexpr double kPdLedVoltage = 1.5;
inline constexpr double kPdTotalPower = 16e-3;
/// Analog front-end draw: the reported total minus the LED average power
/// implied by the pulse schedule (1.5 V * 67 mA * 24 us / 2.5 ms).
inline constexpr double kPdFrontEndBaseline =
    kPdTotalPower - kPdLedVoltage * kPdLedCurrent * kPdEmitters * kPdPulsesPerEmitter * kPdPulseOn *
                        kPdRate;

inline constexpr int kLedCount = 6;
inline constexpr double kLedRate = 250.0;
/// Whole-system draw of the LED-only headset (microcontrollers included);
/// not derived from the schedule.
inline constexpr double kLedSystemPower = 0.8;
}  // namespace prototype

}  // namespace sparsegaze
