#pragma once

#include "sparsegaze/core.hpp"

#include <optional>
#include <string_view>

namespace sparsegaze {

enum class Region : unsigned char { Cornea, Iris, Pupil, Sclera, Skin, Eyelid };

std::string_view to_string(Region region);
Region region_from_string(std::string_view name);

/// Pose of the eye: gaze angles in degrees, pupil diameter in mm and
/// eyelid aperture as a fraction (0 closed, 1 open).
struct EyeState {
  double gaze_h = 0.0;
  double gaze_v = 0.0;
  double pupil_diameter = 4.0;
  double eyelid_open = 1.0;

  static constexpr double kMaxGaze = 50.5;
  static constexpr double kMinPupil = 2.0;
  static constexpr double kMaxPupil = 8.0;

  void validate() const;
};

/// Procedural eye and face geometry, all lengths in mm.
///
/// The eyeball and cornea are spheres; the union of the two is smoothed
/// across an axial band of half-width `limbal_blend` around the limbus
/// plane so the corneoscleral junction is a C2 surface. The face is a
/// spherical shell around the eyeball with an eye opening bounded by the
/// lid margins (elevation angles) and the canthi (azimuth).
struct EyeGeometry {
  Vec3 eyeball_center = Vec3::Zero();
  double eyeball_radius = 12.0;
  double cornea_center_offset = 5.6;
  double cornea_radius = 7.8;
  double iris_radius = 6.0;
  double limbal_blend = 0.3;

  double face_radius = 14.0;
  double face_extent = 75.0;
  double canthus = 45.0;
  double upper_lid = 35.0;
  double lower_lid = -30.0;
  double lid_closure = -5.0;

  void validate() const;
};

struct Material {
  double diffuse_albedo = 0.0;
  double specular_coefficient = 0.0;
};

/// Per-region IR material table.
struct Materials {
  Material cornea{0.0, 0.9};
  Material iris{0.45, 0.0};
  Material pupil{0.02, 0.0};
  Material sclera{0.95, 0.0};
  Material skin{0.75, 0.0};
  Material eyelid{0.75, 0.0};

  const Material& operator[](Region region) const;
  Material& operator[](Region region);
  void validate() const;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;

  Vec3 at(double t) const { return origin + t * direction; }
};

struct Hit {
  Region region;
  Vec3 point;
  Vec3 normal;
  double distance;
};

/// Immutable unposed scene. Construct through build_scene().
class EyeScene {
public:
  const EyeGeometry& geometry() const { return geometry_; }
  const Materials& materials() const { return materials_; }

  /// Radius of the circle where the corneal and eyeball spheres meet.
  double limbus_radius() const { return limbus_radius_; }
  /// Axial distance from the eyeball centre to the limbus plane.
  double limbus_depth() const { return limbus_depth_; }
  /// Axial distance from the eyeball centre to the corneal apex.
  double apex_distance() const {
    return geometry_.cornea_center_offset + geometry_.cornea_radius;
  }

  /// Squared radial extent of the eye surface at axial coordinate z
  /// (eye-local frame). Negative where the surface does not exist.
  double profile(double z) const;
  /// d profile / dz.
  double profile_slope(double z) const;

private:
  friend EyeScene build_scene(const EyeGeometry&, const Materials&);
  EyeScene(const EyeGeometry& geometry, const Materials& materials);

  EyeGeometry geometry_;
  Materials materials_;
  double limbus_radius_ = 0.0;
  double limbus_depth_ = 0.0;
  double blend_k_ = 0.0;
};

EyeScene build_scene(const EyeGeometry& geometry = {}, const Materials& materials = {});

/// A scene with the eye rotated into a gaze pose. Immutable; safe to share
/// between concurrent readers.
class PosedScene {
public:
  PosedScene(EyeScene scene, const EyeState& state);

  const EyeScene& scene() const { return scene_; }
  const EyeState& state() const { return state_; }
  const Mat3& rotation() const { return rotation_; }

  Vec3 optical_axis() const { return rotation_.col(2); }
  Vec3 eyeball_center() const { return scene_.geometry().eyeball_center; }
  Vec3 cornea_center() const;
  Vec3 corneal_apex() const;

  Vec3 to_eye(const Vec3& world) const;
  Vec3 from_eye(const Vec3& local) const;

  /// Elevation angles (deg) of the current lid margins.
  double upper_lid_margin() const { return upper_margin_; }
  double lower_lid_margin() const { return lower_margin_; }

  /// Nearest surface hit along the ray with distance > t_min.
  std::optional<Hit> intersect(const Ray& ray, double t_min = 1e-7) const;

  /// Continues a ray that entered the transparent cornea at `entry` and
  /// returns the first opaque surface behind it (iris, pupil, or whatever
  /// lies beyond if the ray leaves the eye again).
  std::optional<Hit> intersect_interior(const Ray& ray, const Hit& entry) const;

  /// True if an opaque surface lies strictly between `from` and `to`.
  /// The cornea is transparent.
  bool occluded(const Vec3& from, const Vec3& to) const;

  /// Eye surface region at a point on the eye surface.
  Region eye_region(const Vec3& world_point) const;

private:
  std::optional<Hit> intersect_eye(const Ray& ray, double t_min) const;
  std::optional<Hit> intersect_face(const Ray& ray, double t_min) const;
  bool in_opening(const Vec3& rel) const;

  EyeScene scene_;
  EyeState state_;
  Mat3 rotation_;
  double upper_margin_ = 0.0;
  double lower_margin_ = 0.0;
  double tan_upper_ = 0.0;
  double tan_lower_ = 0.0;
  double tan_canthus_ = 0.0;
  double cos_extent_ = 0.0;
};

PosedScene pose_scene(const EyeScene& scene, const EyeState& state);

/// Point on the full corneal sphere where light from `emitter` is
/// mirrored toward `sensor`, ignoring the cap boundary and occlusion.
/// Throws ConvergenceError if the fixed-point solve does not settle.
Vec3 corneal_reflection_point(const PosedScene& scene, const Vec3& emitter, const Vec3& sensor);

/// The glint: corneal_reflection_point() if it lies on the corneal cap and
/// is visible from both the emitter and the sensor, otherwise none.
std::optional<Vec3> glint_position(const PosedScene& scene, const Vec3& emitter,
                                   const Vec3& sensor);

/// Euclidean distance from a point to the limbus circle.
double limbus_distance(const PosedScene& scene, const Vec3& point);

}  // namespace sparsegaze
