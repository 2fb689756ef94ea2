#include "sparsegaze/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>

namespace sparsegaze {

namespace {

Vec3 ring_point(const EyeScene& scene, double distance, double polar, double azimuth_deg) {
  const double a = deg2rad(azimuth_deg);
  return scene.geometry().eyeball_center +
         distance * gaze_direction(polar * std::cos(a), polar * std::sin(a));
}

Vec3 aim_point(const EyeScene& scene) {
  return scene.geometry().eyeball_center + Vec3(0.0, 0.0, scene.geometry().cornea_center_offset);
}

std::vector<Emitter> active_set(const Rig& rig, std::size_t sensor) {
  std::vector<Emitter> out;
  for (int e : rig.active[sensor]) out.push_back(rig.emitters[static_cast<std::size_t>(e)]);
  return out;
}

}  // namespace

void Rig::validate() const {
  if (sensors.empty()) throw InvalidArgument("rig has no sensors");
  if (active.size() != sensors.size())
    throw InvalidArgument("rig needs one emitter set per sensor");
  for (const auto& set : active)
    for (int e : set)
      if (e < 0 || static_cast<std::size_t>(e) >= emitters.size())
        throw InvalidArgument("rig schedule references an unknown emitter");
  for (const Emitter& e : emitters) e.validate();
  if (mode == Mode::Led2Gaze) {
    if (leds.size() != sensors.size() || emitters.size() != sensors.size())
      throw InvalidArgument("LED2Gaze rig needs one LED per sensing channel");
    for (const LedElectrical& led : leds) led.validate();
  }
}

RigConfig led2gaze_rig_defaults() {
  RigConfig c;
  c.distance = 25.0;
  c.ring_polar = 35.0;
  c.camera_fov = 50.0;
  return c;
}

Rig nextgaze_rig(const EyeScene& scene, const RigConfig& config) {
  Rig rig;
  rig.mode = Mode::NextGaze;
  const Vec3 aim = aim_point(scene);
  const Vec3 c = scene.geometry().eyeball_center;
  rig.emitters.push_back(Emitter::aimed_at(
      c + config.distance * gaze_direction(-config.emitter_azimuth, 0.0), aim, config.intensity));
  rig.emitters.push_back(Emitter::aimed_at(
      c + config.distance * gaze_direction(config.emitter_azimuth, 0.0), aim, config.intensity));
  for (int k = 0; k < 8; ++k) {
    const double az = 22.5 + 45.0 * k;
    const Vec3 p = ring_point(scene, config.distance, config.ring_polar, az);
    rig.sensors.push_back(Sensor::make(
        k, Camera::looking_at(p, aim, config.camera_fov, config.resolution), config.acceptance));
    rig.active.push_back({std::cos(deg2rad(az)) < 0.0 ? 0 : 1});
  }
  rig.validate();
  return rig;
}

Rig led2gaze_rig(const EyeScene& scene, const RigConfig& config) {
  Rig rig;
  rig.mode = Mode::Led2Gaze;
  const Vec3 aim = aim_point(scene);
  const int n = prototype::kLedCount;
  for (int i = 0; i < n; ++i) {
    const Vec3 p = ring_point(scene, config.distance, config.ring_polar, 30.0 + 60.0 * i);
    LedElectrical led;
    rig.leds.push_back(led);
    rig.emitters.push_back(
        Emitter::aimed_at(p, aim, config.intensity, led.cone_angle, led.emission_wavelength));
    rig.sensors.push_back(Sensor::make(
        i, Camera::looking_at(p, aim, config.camera_fov, config.resolution), config.acceptance));
  }
  for (int i = 0; i < n; ++i) {
    std::vector<int> lit;
    for (int j = 0; j < n; ++j)
      if (j != i && spectrally_visible(rig.leds[static_cast<std::size_t>(i)],
                                       rig.emitters[static_cast<std::size_t>(j)].wavelength))
        lit.push_back(j);
    rig.active.push_back(std::move(lit));
  }
  rig.validate();
  return rig;
}

Rig make_rig(Mode mode, const EyeScene& scene, const RigConfig& config) {
  return mode == Mode::NextGaze ? nextgaze_rig(scene, config) : led2gaze_rig(scene, config);
}

double calibrate_intensity(Rig& rig, const EyeScene& scene, double probe_fov, int probe_points,
                           double target, const RenderSettings& settings) {
  rig.validate();
  if (probe_points < 1) throw InvalidArgument("calibrate_intensity: need at least one probe");
  if (!(target > 0.0 && target <= 1.0))
    throw InvalidArgument("calibrate_intensity: target must lie in (0, 1]");
  double peak = 0.0;
  for (int r = 0; r < probe_points; ++r) {
    for (int c = 0; c < probe_points; ++c) {
      EyeState state;
      if (probe_points > 1) {
        state.gaze_h = -probe_fov + 2.0 * probe_fov * c / (probe_points - 1);
        state.gaze_v = probe_fov - 2.0 * probe_fov * r / (probe_points - 1);
      }
      const PosedScene posed(scene, state);
      for (std::size_t s = 0; s < rig.sensors.size(); ++s) {
        const std::vector<Emitter> lit = active_set(rig, s);
        if (lit.empty()) continue;
        peak = std::max(peak, render(posed, rig.sensors[s].camera, lit, settings).max_value);
      }
    }
  }
  if (!(peak > 0.0)) throw NumericalError("calibrate_intensity: every probe render is dark");
  const double scale = target * RadianceImage::kFullScale / peak;
  for (Emitter& e : rig.emitters) e.radiant_intensity *= scale;
  return scale;
}

void calibrate_discharge_gain(Rig& rig, const EyeScene& scene, double fraction,
                              const RenderSettings& settings) {
  rig.validate();
  if (rig.mode != Mode::Led2Gaze) throw InvalidArgument("discharge gain applies to LED2Gaze rigs");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw InvalidArgument("calibrate_discharge_gain: fraction must lie in (0, 1)");
  const PosedScene posed(scene, EyeState{});
  const SignalFrame f = simulate_frame(posed, rig.sensors, rig.emitters, rig.active, settings);
  for (std::size_t i = 0; i < rig.leds.size(); ++i) {
    const double e = f.readings[static_cast<Eigen::Index>(i)];
    if (!(e > 0.0))
      throw NumericalError("calibrate_discharge_gain: LED " + std::to_string(i) +
                           " receives no light at centre gaze");
    LedElectrical& led = rig.leds[i];
    led.discharge_gain = fraction * led.reverse_voltage / (e * led.exposure);
  }
}

BlinkSchedule BlinkSchedule::generate(const BlinkConfig& config, double end_time,
                                      std::uint64_t seed) {
  BlinkSchedule s;
  s.config = config;
  if (!config.enabled) return s;
  if (!(config.mean_interval > 0.0) || config.min_interval < 0.0 || config.close < 0.0 ||
      config.hold < 0.0 || config.open < 0.0)
    throw InvalidArgument("blink timing must be non-negative with a positive mean interval");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(1.0 / config.mean_interval);
  for (double t = config.min_interval + gap(rng); t < end_time;
       t += config.min_interval + gap(rng))
    s.onsets.push_back(t);
  return s;
}

double BlinkSchedule::eyelid_open(double t) const {
  const auto it = std::upper_bound(onsets.begin(), onsets.end(), t);
  if (it == onsets.begin()) return 1.0;
  const double dt = t - *std::prev(it);
  const BlinkConfig& c = config;
  if (dt < c.close) return 1.0 - dt / c.close;
  if (dt < c.close + c.hold) return 0.0;
  if (dt < c.close + c.hold + c.open) return (dt - c.close - c.hold) / c.open;
  return 1.0;
}

void SynthConfig::validate() const {
  if (!(sample_rate > 0.0)) throw InvalidArgument("sample rate must be positive");
  if (!(dwell > 0.0) || settle < 0.0 || settle >= dwell)
    throw InvalidArgument("fixation dwell must exceed the settle time");
  if (!(noise >= 0.0)) throw InvalidArgument("noise must be non-negative");
  if (!(exposure_target > 0.0 && exposure_target <= 1.0))
    throw InvalidArgument("exposure target must lie in (0, 1]");
  if (probe_points < 1) throw InvalidArgument("need at least one probe gaze");
  if (!(centre_discharge > 0.0 && centre_discharge < 1.0))
    throw InvalidArgument("centre discharge must lie in (0, 1)");
  render.validate();
}

ProtocolConfig SynthConfig::protocol() const {
  ProtocolConfig p;
  p.pursuit.sample_rate = sample_rate;
  p.fixation.sample_rate = sample_rate;
  p.fixation.dwell = dwell;
  p.fixation.settle = settle;
  p.seed = seed;
  return p;
}

SynthConfig SynthConfig::defaults(Mode mode) {
  SynthConfig c;
  c.mode = mode;
  if (mode == Mode::Led2Gaze) c.rig = led2gaze_rig_defaults();
  return c;
}

Eigen::Index GazeDataset::sample_count() const {
  Eigen::Index n = 0;
  for (const auto& u : units) n += u.size();
  return n;
}

std::size_t GazeDataset::count(UnitKind kind, SegmentRole role) const {
  return static_cast<std::size_t>(std::count_if(units.begin(), units.end(), [&](const auto& u) {
    return u.kind == kind && u.role() == role;
  }));
}

void GazeDataset::validate() const {
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& u : units) {
    u.data.validate();
    if (u.data.channels() != channels())
      throw InvalidArgument("dataset unit " + std::to_string(u.data.id) + " has the wrong channel count");
    if (static_cast<Eigen::Index>(u.blink.size()) != u.size())
      throw InvalidArgument("dataset unit " + std::to_string(u.data.id) + ": blink flags misaligned");
    if (u.size() > 0) {
      if (!(u.data.t(0) > last)) throw InvalidArgument("dataset units overlap in time");
      last = u.data.t(u.size() - 1);
    }
  }
}

GazeDataset synthesize(const EyeScene& scene, const SynthConfig& config, const Progress& progress) {
  config.validate();
  Rig rig = make_rig(config.mode, scene, config.rig);
  calibrate_intensity(rig, scene, mode_figures(config.mode).fov, config.probe_points,
                      config.exposure_target, config.render);
  if (rig.mode == Mode::Led2Gaze)
    calibrate_discharge_gain(rig, scene, config.centre_discharge, config.render);
  return synthesize(scene, rig, config, progress);
}

GazeDataset synthesize(const EyeScene& scene, const Rig& rig, const SynthConfig& config,
                       const Progress& progress) {
  config.validate();
  rig.validate();
  if (rig.mode != config.mode) throw InvalidArgument("rig and synthesis mode differ");
  const StimulusTrack track = build_split(config.mode, config.protocol());
  const BlinkSchedule blinks =
      BlinkSchedule::generate(config.blinks, track.end_time() + 1.0, config.seed ^ 0x9e3779b97f4a7c15ull);
  std::mt19937_64 noise_rng(config.seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  GazeDataset ds;
  ds.mode = config.mode;
  ds.seed = config.seed;
  ds.sample_rate = config.sample_rate;
  for (const Sensor& s : rig.sensors) ds.sensor_ids.push_back(s.id);
  const auto channels = static_cast<Eigen::Index>(rig.sensors.size());

  std::vector<LedElectrical> leds = rig.leds;
  std::map<std::tuple<double, double, double>, Eigen::VectorXd> cache;
  std::size_t done = 0;
  int id = 0;
  for (const StimulusUnit& su : track.units) {
    DatasetUnit unit;
    unit.kind = su.kind;
    unit.index = su.index;
    unit.session = su.session;
    unit.settle = su.settle;
    unit.degraded = su.degraded;
    unit.data.id = id++;
    unit.data.role = su.role;
    unit.data.t = su.t;
    unit.data.gaze = su.gaze;
    unit.data.readings.resize(su.size(), channels);
    unit.data.masked.assign(static_cast<std::size_t>(su.size()), false);
    unit.blink.assign(static_cast<std::size_t>(su.size()), false);
    for (Eigen::Index i = 0; i < su.size(); ++i) {
      EyeState state;
      state.gaze_h = su.gaze(i, 0);
      state.gaze_v = su.gaze(i, 1);
      state.eyelid_open = blinks.eyelid_open(su.t(i));
      unit.blink[static_cast<std::size_t>(i)] = state.eyelid_open < 1.0;
      // Fixation poses repeat for the whole dwell; render them once.
      const bool repeats = su.kind != UnitKind::Pursuit;
      const auto key = std::make_tuple(state.gaze_h, state.gaze_v, state.eyelid_open);
      if (auto it = cache.find(key); repeats && it != cache.end()) {
        unit.data.readings.row(i) = it->second.transpose();
      } else {
        const PosedScene posed(scene, state);
        SignalFrame frame;
        try {
          frame = simulate_frame(posed, rig.sensors, rig.emitters, rig.active, config.render, su.t(i));
        } catch (const SaturationError& e) {
          throw SaturationError(std::string(e.what()) + " at t=" + std::to_string(su.t(i)) + " s",
                                e.sensor, e.emitter, state.gaze_h, state.gaze_v);
        }
        unit.data.readings.row(i) = frame.readings.transpose();
        if (repeats) cache.emplace(key, frame.readings);
      }

      for (Eigen::Index c = 0; c < channels; ++c) {
        double e = unit.data.readings(i, c);
        if (config.noise > 0.0) e = std::max(0.0, e * (1.0 + config.noise * normal(noise_rng)));
        if (rig.mode == Mode::Led2Gaze) {
          LedElectrical& led = leds[static_cast<std::size_t>(c)];
          const double v = duplex_measure(led, e);
          e = (led.reverse_voltage - v) / (led.discharge_gain * led.exposure);
          led.exposure = adapt_exposure(v, led, config.exposure_policy);
        }
        unit.data.readings(i, c) = e;
      }
    }
    ds.units.push_back(std::move(unit));
    if (progress) progress(++done, track.units.size());
  }
  ds.validate();
  return ds;
}

}  // namespace sparsegaze
