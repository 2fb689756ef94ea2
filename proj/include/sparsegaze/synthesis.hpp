#pragma once

#include "sparsegaze/duplex_timing.hpp"
#include "sparsegaze/protocol.hpp"
#include "sparsegaze/sensor_sim.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sparsegaze {

/// Sensor/emitter layout of one prototype around the default eye.
///
/// NextGaze: photodiodes on a ring below the brow, two LEDs left and
/// right, each photodiode read under the LED on its side.
/// LED2Gaze: a ring of duplexed LEDs; each LED senses while the others
/// whose emission it can register are lit.
struct Rig {
  Mode mode = Mode::NextGaze;
  std::vector<Sensor> sensors;
  std::vector<Emitter> emitters;
  ActiveEmitters active;
  std::vector<LedElectrical> leds;  // LED2Gaze only, indexed like sensors

  std::size_t channels() const { return sensors.size(); }
  void validate() const;
};

struct RigConfig {
  int resolution = 32;
  double distance = 28.0;      // sensor ring radius from the eyeball centre, mm
  double ring_polar = 30.0;    // ring angle off the forward axis, deg
  double camera_fov = 40.0;
  double acceptance = 60.0;    // detector acceptance half-angle, deg
  double emitter_azimuth = 35.0;
  double intensity = 1000.0;
};

RigConfig led2gaze_rig_defaults();

Rig nextgaze_rig(const EyeScene& scene, const RigConfig& config = {});
Rig led2gaze_rig(const EyeScene& scene, const RigConfig& config = led2gaze_rig_defaults());
Rig make_rig(Mode mode, const EyeScene& scene, const RigConfig& config);

/// Sets each LED's discharge gain so that its reading at centre gaze
/// discharges `fraction` of V_reverse at the initial exposure.
void calibrate_discharge_gain(Rig& rig, const EyeScene& scene, double fraction,
                              const RenderSettings& settings = {});

/// Scales all emitter intensities so the brightest pixel over a grid of
/// probe gazes reaches `target` of full scale. Returns the scale applied.
double calibrate_intensity(Rig& rig, const EyeScene& scene, double probe_fov, int probe_points,
                           double target, const RenderSettings& settings = {});

/// Blink events: the lid closes linearly over `close`, stays shut for
/// `hold`, and reopens over `open`. Onsets follow a seeded renewal
/// process with exponential gaps on top of `min_interval`.
struct BlinkConfig {
  bool enabled = true;
  double mean_interval = 4.0;
  double min_interval = 1.0;
  double close = 0.05;
  double hold = 0.05;
  double open = 0.05;
};

struct BlinkSchedule {
  std::vector<double> onsets;
  BlinkConfig config;

  static BlinkSchedule generate(const BlinkConfig& config, double end_time, std::uint64_t seed);
  /// Lid aperture in [0, 1] at time t.
  double eyelid_open(double t) const;
};

struct SynthConfig {
  Mode mode = Mode::NextGaze;
  std::uint64_t seed = 0;
  double sample_rate = 50.0;
  double dwell = 2.0;
  double settle = 0.5;
  /// Multiplicative Gaussian reading noise (standard deviation); off by
  /// default, renders are deterministic.
  double noise = 0.0;
  BlinkConfig blinks;
  RenderSettings render;
  RigConfig rig;
  /// Peak pixel over the probe grid, as a fraction of full scale.
  double exposure_target = 0.2;
  int probe_points = 7;
  /// LED2Gaze: discharge at centre gaze as a fraction of V_reverse, used
  /// to set each LED's discharge gain.
  double centre_discharge = 0.5;
  ExposurePolicy exposure_policy;

  void validate() const;
  ProtocolConfig protocol() const;
  static SynthConfig defaults(Mode mode);
};

/// One stimulus unit with its simulated sensor stream.
struct DatasetUnit {
  UnitKind kind = UnitKind::Pursuit;
  int index = 0;
  int session = 0;
  Eigen::Index settle = 0;
  bool degraded = false;
  Segment data;
  /// Ground truth: lid not fully open at that sample.
  std::vector<bool> blink;

  Eigen::Index size() const { return data.size(); }
  SegmentRole role() const { return data.role; }
};

struct GazeDataset {
  Mode mode = Mode::NextGaze;
  std::uint64_t seed = 0;
  double sample_rate = 0.0;
  std::vector<int> sensor_ids;
  std::vector<DatasetUnit> units;
  std::string config_hash;

  Eigen::Index channels() const { return static_cast<Eigen::Index>(sensor_ids.size()); }
  Eigen::Index sample_count() const;
  std::size_t count(UnitKind kind, SegmentRole role) const;
  void validate() const;
};

using Progress = std::function<void(std::size_t done, std::size_t total)>;

/// Runs the mode's protocol through the rig: poses the eye per sample
/// (lid driven by the blink schedule), renders every sensor under its
/// scheduled emitters and integrates. LED2Gaze readings go through the
/// duplex discharge model with per-LED exposure adaptation and are
/// reported as recovered irradiance. Poses repeat during fixation dwells
/// and are rendered once.
GazeDataset synthesize(const EyeScene& scene, const SynthConfig& config,
                       const Progress& progress = {});

/// Same with a prepared rig (its intensities are used as given).
GazeDataset synthesize(const EyeScene& scene, const Rig& rig, const SynthConfig& config,
                       const Progress& progress = {});

}  // namespace sparsegaze
