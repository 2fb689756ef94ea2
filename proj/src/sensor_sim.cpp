#include "sparsegaze/sensor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace sparsegaze {

double SensorWindow::weight_at(double x, double y) const {
  const double dx = x - x0, dy = y - y0;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

SensorWindow gaussian_window(int width, int height, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_window: sigma must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("gaussian_window: empty window");
  SensorWindow w;
  w.width = width;
  w.height = height;
  w.x0 = 0.5 * (width - 1);
  w.y0 = 0.5 * (height - 1);
  w.sigma = sigma;
  w.weights.resize(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) w.weights(y, x) = w.weight_at(x, y);
  return w;
}

double acceptance_sigma(const Camera& camera, double acceptance_half_angle) {
  const double half_max_px = acceptance_half_angle / (0.5 * camera.fov) * 0.5 * camera.resolution;
  return half_max_px / std::sqrt(2.0 * std::log(2.0));
}

double integrate_sensor(const RadianceImage& image, const SensorWindow& window) {
  if (image.width != window.width || image.height != window.height)
    throw InvalidArgument("integrate_sensor: image and window sizes differ");
  if (image.saturated)
    throw SaturationError("integrate_sensor: image is saturated; clipped glints would be "
                          "under-counted");
  return (image.values * window.weights).sum();
}

Sensor Sensor::make(int id, const Camera& camera, double acceptance_half_angle) {
  camera.validate();
  Sensor s;
  s.id = id;
  s.camera = camera;
  s.window = gaussian_window(camera.resolution, camera.resolution,
                             acceptance_sigma(camera, acceptance_half_angle));
  return s;
}

SignalFrame simulate_frame(const PosedScene& scene, std::span<const Sensor> sensors,
                           std::span<const Emitter> emitters, const ActiveEmitters& schedule,
                           const RenderSettings& settings, double timestamp) {
  if (schedule.size() != sensors.size())
    throw InvalidArgument("simulate_frame: schedule must list one emitter set per sensor");
  SignalFrame frame;
  frame.timestamp = timestamp;
  frame.readings = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sensors.size()));
  std::vector<Emitter> active;
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    frame.sensor_ids.push_back(sensors[i].id);
    active.clear();
    for (int e : schedule[i]) {
      if (e < 0 || static_cast<std::size_t>(e) >= emitters.size())
        throw InvalidArgument("simulate_frame: schedule references an unknown emitter");
      active.push_back(emitters[static_cast<std::size_t>(e)]);
    }
    if (active.empty()) continue;
    const RadianceImage image = render(scene, sensors[i].camera, active, settings);
    if (image.saturated)
      throw SaturationError("simulate_frame: sensor " + std::to_string(sensors[i].id) +
                                " saturates under emitter " + std::to_string(schedule[i].front()),
                            sensors[i].id, schedule[i].front(), scene.state().gaze_h,
                            scene.state().gaze_v);
    frame.readings[static_cast<Eigen::Index>(i)] = integrate_sensor(image, sensors[i].window);
  }
  return frame;
}

std::vector<double> SweepAxis::values() const {
  if (!(step > 0.0)) throw InvalidArgument("sweep step must be positive");
  if (!(stop >= start)) throw InvalidArgument("sweep stop must not precede start");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

SweepMap sweep_gaze(const EyeScene& scene, const EyeState& base, const Sensor& sensor,
                    const Emitter& emitter, const SweepAxis& h_axis, const SweepAxis& v_axis,
                    const RenderSettings& settings, int emitter_id) {
  SweepMap map;
  map.h = h_axis.values();
  map.v = v_axis.values();
  map.sensor_id = sensor.id;
  map.emitter_id = emitter_id;
  for (double a : map.h)
    if (std::abs(a) > EyeState::kMaxGaze) throw InvalidArgument("sweep range exceeds gaze limits");
  for (double a : map.v)
    if (std::abs(a) > EyeState::kMaxGaze) throw InvalidArgument("sweep range exceeds gaze limits");
  map.values.resize(static_cast<Eigen::Index>(map.v.size()),
                    static_cast<Eigen::Index>(map.h.size()));
  const std::array<Emitter, 1> lights{emitter};
  for (std::size_t r = 0; r < map.v.size(); ++r) {
    for (std::size_t c = 0; c < map.h.size(); ++c) {
      EyeState state = base;
      state.gaze_h = map.h[c];
      state.gaze_v = map.v[r];
      const PosedScene posed(scene, state);
      const RadianceImage image = render(posed, sensor.camera, lights, settings);
      if (image.saturated)
        throw SaturationError("sweep_gaze: saturated at gaze (" + std::to_string(state.gaze_h) +
                                  ", " + std::to_string(state.gaze_v) + ")",
                              sensor.id, emitter_id, state.gaze_h, state.gaze_v);
      map.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          integrate_sensor(image, sensor.window);
    }
  }
  return map;
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> ridge_mask(const SweepMap& map,
                                                              double factor) {
  const Eigen::Index rows = map.values.rows(), cols = map.values.cols();
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false);
  std::vector<double> nb;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      nb.clear();
      for (Eigen::Index dr = -1; dr <= 1; ++dr)
        for (Eigen::Index dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const Eigen::Index rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
          nb.push_back(map.values(rr, cc));
        }
      if (nb.empty()) continue;
      std::sort(nb.begin(), nb.end());
      const std::size_t m = nb.size();
      const double median = m % 2 ? nb[m / 2] : 0.5 * (nb[m / 2 - 1] + nb[m / 2]);
      mask(r, c) = map.values(r, c) > factor * median;
    }
  }
  return mask;
}

SweepRig default_sweep_rig(const EyeScene& scene, int resolution) {
  const Vec3 aim = scene.geometry().eyeball_center + Vec3(0, 0, scene.geometry().cornea_center_offset);
  const Vec3 at = scene.geometry().eyeball_center + 28.0 * gaze_direction(15.0, -10.0);
  SweepRig rig;
  rig.sensor = Sensor::make(0, Camera::looking_at(at, aim, 20.0, resolution));
  rig.emitter = Emitter::aimed_at(at + Vec3(3.0, 0.0, 0.0), aim, 1000.0);
  return rig;
}

RidgeSummary summarize_ridge(const SweepMap& map,
                             const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask,
                             int max_gap) {
  if (mask.rows() != map.values.rows() || mask.cols() != map.values.cols())
    throw InvalidArgument("summarize_ridge: mask and map differ in shape");
  RidgeSummary out;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
  double peak = -1.0;
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      cells.emplace_back(r, c);
      if (map.values(r, c) > peak) {
        peak = map.values(r, c);
        out.peak_h = map.h[static_cast<std::size_t>(c)];
        out.peak_v = map.v[static_cast<std::size_t>(r)];
      }
    }
  out.cells = static_cast<int>(cells.size());
  if (cells.empty()) return out;

  auto near = [&](std::size_t a, std::size_t b) {
    return std::max(std::abs(cells[a].first - cells[b].first),
                    std::abs(cells[a].second - cells[b].second)) <= max_gap;
  };
  std::vector<int> label(cells.size(), -1);
  for (std::size_t s = 0; s < cells.size(); ++s) {
    if (label[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    label[s] = out.components;
    while (!stack.empty()) {
      const std::size_t q = stack.back();
      stack.pop_back();
      for (std::size_t o = 0; o < cells.size(); ++o)
        if (label[o] < 0 && near(q, o)) {
          label[o] = out.components;
          stack.push_back(o);
        }
    }
    ++out.components;
  }
  if (out.components != 1) return out;

  // Border contacts must be further apart than one bridging step, so the
  // chain actually crosses the map instead of touching a single edge spot.
  const Eigen::Index rows = mask.rows(), cols = mask.cols();
  std::vector<std::size_t> edge;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto [r, c] = cells[i];
    if (std::min({r, c, rows - 1 - r, cols - 1 - c}) <= max_gap) edge.push_back(i);
  }
  for (std::size_t a = 0; a < edge.size() && !out.closed; ++a)
    for (std::size_t b = a + 1; b < edge.size(); ++b)
      if (std::max(std::abs(cells[edge[a]].first - cells[edge[b]].first),
                   std::abs(cells[edge[a]].second - cells[edge[b]].second)) > 2 * max_gap) {
        out.closed = true;
        break;
      }
  return out;
}

}  // namespace sparsegaze
