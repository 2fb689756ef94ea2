#pragma once

#include "sparsegaze/eye_scene.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sparsegaze {

/// Pinhole camera at a single-pixel sensor's position. `fov` is the full
/// square field of view in degrees.
struct Camera {
  Vec3 position = Vec3(0, 0, 40);
  Vec3 forward = -Vec3::UnitZ();
  Vec3 up = Vec3::UnitY();
  double fov = 50.0;
  int resolution = 128;

  void validate() const;

  static Camera looking_at(const Vec3& position, const Vec3& target, double fov = 50.0,
                           int resolution = 128, const Vec3& up = Vec3::UnitY());

  /// Ray through continuous pixel coordinates (x right, y down; pixel
  /// centres at integer + 0.5).
  Ray pixel_ray(double px, double py) const;
  /// Continuous pixel coordinates of a world point; false if behind.
  bool project(const Vec3& world, double& px, double& py) const;
};

/// Point IR source with a hard emission cone of full apex angle `cone_angle`.
struct Emitter {
  Vec3 position = Vec3(0, 0, 40);
  double radiant_intensity = 1.0;
  Vec3 cone_axis = -Vec3::UnitZ();
  double cone_angle = 120.0;
  double wavelength = 940.0;

  void validate() const;
  bool illuminates(const Vec3& point) const;

  static Emitter aimed_at(const Vec3& position, const Vec3& target, double intensity = 1.0,
                          double cone_angle = 120.0, double wavelength = 940.0);
};

struct RenderSettings {
  double specular_exponent = 30000.0;
  /// Fixed sub-samples per axis for the corneal specular term. 0 selects
  /// adaptive quad refinement, which splits a cell until the reflection
  /// angle varies by less than `lobe_tolerance` lobe widths across it.
  int specular_supersampling = 0;
  double lobe_tolerance = 1.0;
  /// Lobe values below this fraction of the peak are treated as zero when
  /// deciding where to refine.
  double lobe_floor = 1e-6;
  int max_refinement_depth = 8;

  void validate() const;
};

/// Linear radiance image. Values are kept unclamped; `saturated` records
/// whether any of them exceeds the 16-bit range.
struct RadianceImage {
  static constexpr double kFullScale = 65535.0;

  int width = 0;
  int height = 0;
  Eigen::ArrayXXd values;  // rows = y, cols = x
  double max_value = 0.0;
  bool saturated = false;

  RadianceImage() = default;
  RadianceImage(int w, int h);

  /// Recomputes max_value and saturated from values.
  void update_stats();
  /// Values clamped to [0, 65535] and rounded.
  std::vector<std::uint16_t> quantized() const;
};

RadianceImage render(const PosedScene& scene, const Camera& camera,
                     std::span<const Emitter> emitters, const RenderSettings& settings = {});

struct Exposure {
  double scale = 1.0;
  std::vector<Emitter> emitters;
};

/// Uniform intensity scale bringing the peak pixel to 0.9 of full scale.
/// Throws NumericalError on an all-dark render.
Exposure auto_expose(const PosedScene& scene, const Camera& camera,
                     std::span<const Emitter> emitters, const RenderSettings& settings = {});

}  // namespace sparsegaze
