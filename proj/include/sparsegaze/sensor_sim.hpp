#pragma once

#include "sparsegaze/render.hpp"

#include <span>
#include <string>
#include <vector>

namespace sparsegaze {

/// Gaussian angular-sensitivity window over the sensor's image,
/// g(x, y) = exp(-((x - x0)^2 + (y - y0)^2) / (2 sigma^2)), in pixel units
/// with (x0, y0) the image centre.
struct SensorWindow {
  int width = 0;
  int height = 0;
  double x0 = 0.0;
  double y0 = 0.0;
  double sigma = 1.0;
  Eigen::ArrayXXd weights;  // rows = y, cols = x

  double weight_at(double x, double y) const;
  double mass() const { return weights.sum(); }
};

SensorWindow gaussian_window(int width, int height, double sigma);

/// Sigma (pixels) whose half-maximum radius corresponds to a detector
/// acceptance half-angle, mapped linearly through the camera field of view.
double acceptance_sigma(const Camera& camera, double acceptance_half_angle = 60.0);

/// s = sum_x sum_y i(x, y) g(x, y) over unclamped radiance.
/// Throws SaturationError if the image is flagged saturated.
double integrate_sensor(const RadianceImage& image, const SensorWindow& window);

/// A single-pixel detector: viewpoint plus angular window.
struct Sensor {
  int id = 0;
  Camera camera;
  SensorWindow window;

  static Sensor make(int id, const Camera& camera, double acceptance_half_angle = 60.0);
};

struct SignalFrame {
  double timestamp = 0.0;
  std::vector<int> sensor_ids;
  Eigen::VectorXd readings;
};

/// Emitters switched on while each sensor integrates; an empty set means
/// the sensor is read with all emitters off.
using ActiveEmitters = std::vector<std::vector<int>>;

/// Renders each sensor's view under its scheduled emitters and integrates.
SignalFrame simulate_frame(const PosedScene& scene, std::span<const Sensor> sensors,
                           std::span<const Emitter> emitters, const ActiveEmitters& schedule,
                           const RenderSettings& settings = {}, double timestamp = 0.0);

struct SweepAxis {
  double start = -30.0;
  double stop = 30.0;
  double step = 1.0;

  std::vector<double> values() const;
};

/// Sensor reading over a grid of gaze angles.
struct SweepMap {
  std::vector<double> h;  // columns
  std::vector<double> v;  // rows
  Eigen::MatrixXd values;
  int sensor_id = 0;
  int emitter_id = 0;
};

/// Poses the eye at every grid cell (other state taken from `base`),
/// renders with the single emitter and integrates. Throws SaturationError
/// with the cell coordinates if any cell clips.
SweepMap sweep_gaze(const EyeScene& scene, const EyeState& base, const Sensor& sensor,
                    const Emitter& emitter, const SweepAxis& h_axis, const SweepAxis& v_axis,
                    const RenderSettings& settings = {}, int emitter_id = 0);

/// Sensor/emitter pair used for transfer-map sweeps: a narrow-fov
/// detector below and temporal of the eye, aimed at the corneal centre,
/// with the emitter 3 mm beside it.
struct SweepRig {
  Sensor sensor;
  Emitter emitter;
};

SweepRig default_sweep_rig(const EyeScene& scene, int resolution = 128);

/// Cells whose value exceeds `factor` times the median of their
/// 8-neighbourhood (fewer neighbours on the border).
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> ridge_mask(const SweepMap& map,
                                                              double factor = 1.3);

struct RidgeSummary {
  int cells = 0;
  /// Groups of ridge cells linked when within `max_gap` cells (Chebyshev).
  int components = 0;
  /// One linked chain running from the sweep border back to the border,
  /// enclosing the region where the glint stays on the cornea.
  bool closed = false;
  double peak_h = 0.0;
  double peak_v = 0.0;
};

RidgeSummary summarize_ridge(const SweepMap& map,
                             const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask,
                             int max_gap = 6);

}  // namespace sparsegaze
