#include "sparsegaze/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace sparsegaze {

void Camera::validate() const {
  if (!(fov > 0.0 && fov < 120.0)) throw InvalidArgument("camera fov must lie in (0, 120) deg");
  if (resolution < 16) throw InvalidArgument("camera resolution must be at least 16");
  if (forward.norm() < 1e-12 || up.norm() < 1e-12 || forward.cross(up).norm() < 1e-9)
    throw InvalidArgument("camera forward/up must be non-zero and not parallel");
}

Camera Camera::looking_at(const Vec3& position, const Vec3& target, double fov, int resolution,
                          const Vec3& up) {
  Camera cam;
  cam.position = position;
  cam.forward = (target - position).normalized();
  cam.up = up;
  cam.fov = fov;
  cam.resolution = resolution;
  return cam;
}

namespace {

struct Basis {
  Vec3 forward, right, up;
  double half_extent;
};

Basis camera_basis(const Camera& cam) {
  Basis b;
  b.forward = cam.forward.normalized();
  b.right = b.forward.cross(cam.up).normalized();
  b.up = b.right.cross(b.forward);
  b.half_extent = std::tan(deg2rad(0.5 * cam.fov));
  return b;
}

}  // namespace

Ray Camera::pixel_ray(double px, double py) const {
  const Basis b = camera_basis(*this);
  const double u = (2.0 * px / resolution - 1.0) * b.half_extent;
  const double v = (1.0 - 2.0 * py / resolution) * b.half_extent;
  return Ray{position, (b.forward + u * b.right + v * b.up).normalized()};
}

bool Camera::project(const Vec3& world, double& px, double& py) const {
  const Basis b = camera_basis(*this);
  const Vec3 rel = world - position;
  const double depth = rel.dot(b.forward);
  if (depth <= 0.0) return false;
  const double u = rel.dot(b.right) / depth / b.half_extent;
  const double v = rel.dot(b.up) / depth / b.half_extent;
  px = 0.5 * (u + 1.0) * resolution;
  py = 0.5 * (1.0 - v) * resolution;
  return true;
}

void Emitter::validate() const {
  if (!(radiant_intensity > 0.0)) throw InvalidArgument("radiant_intensity must be positive");
  if (!(cone_angle > 0.0 && cone_angle <= 180.0))
    throw InvalidArgument("cone_angle must lie in (0, 180] deg");
  if (cone_axis.norm() < 1e-12) throw InvalidArgument("cone_axis must be non-zero");
}

bool Emitter::illuminates(const Vec3& point) const {
  const Vec3 to = (point - position).normalized();
  return to.dot(cone_axis.normalized()) >= std::cos(deg2rad(0.5 * cone_angle)) - 1e-15;
}

Emitter Emitter::aimed_at(const Vec3& position, const Vec3& target, double intensity,
                          double cone_angle, double wavelength) {
  Emitter e;
  e.position = position;
  e.cone_axis = (target - position).normalized();
  e.radiant_intensity = intensity;
  e.cone_angle = cone_angle;
  e.wavelength = wavelength;
  return e;
}

void RenderSettings::validate() const {
  if (!(specular_exponent >= 1.0)) throw InvalidArgument("specular_exponent must be >= 1");
  if (specular_supersampling < 0) throw InvalidArgument("specular_supersampling must be >= 0");
  if (!(lobe_tolerance > 0.0)) throw InvalidArgument("lobe_tolerance must be positive");
  if (!(lobe_floor > 0.0 && lobe_floor < 1.0)) throw InvalidArgument("lobe_floor must lie in (0, 1)");
  if (max_refinement_depth < 0 || max_refinement_depth > 16)
    throw InvalidArgument("max_refinement_depth must lie in [0, 16]");
}

RadianceImage::RadianceImage(int w, int h)
    : width(w), height(h), values(Eigen::ArrayXXd::Zero(h, w)) {}

void RadianceImage::update_stats() {
  max_value = values.size() ? values.maxCoeff() : 0.0;
  saturated = max_value > kFullScale;
}

std::vector<std::uint16_t> RadianceImage::quantized() const {
  std::vector<std::uint16_t> out;
  out.reserve(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out.push_back(static_cast<std::uint16_t>(
          std::lround(std::clamp(values(y, x), 0.0, kFullScale))));
  return out;
}

namespace {

class Shader {
public:
  Shader(const PosedScene& scene, std::span<const Emitter> emitters, double exponent)
      : scene_(scene), emitters_(emitters), exponent_(exponent),
        norm_((exponent + 2.0) / (2.0 * kPi)) {}

  // Irradiance at a point from one emitter, 0 if outside the cone,
  // back-facing, or shadowed.
  double irradiance(const Emitter& e, const Vec3& p, const Vec3& n, Vec3& to_light) const {
    if (!e.illuminates(p)) return 0.0;
    const Vec3 l = e.position - p;
    const double dist2 = l.squaredNorm();
    to_light = l / std::sqrt(dist2);
    const double cos_i = n.dot(to_light);
    if (cos_i <= 0.0) return 0.0;
    if (scene_.occluded(p + 1e-5 * n, e.position)) return 0.0;
    return e.radiant_intensity * cos_i / dist2;
  }

  double diffuse(const Hit& hit, const Vec3& view_dir) const {
    const double albedo = scene_.scene().materials()[hit.region].diffuse_albedo;
    if (albedo <= 0.0) return 0.0;
    Vec3 n = hit.normal;
    if (n.dot(view_dir) > 0.0) n = -n;  // face the viewer
    double sum = 0.0;
    Vec3 l;
    for (const Emitter& e : emitters_) sum += irradiance(e, hit.point, n, l);
    return albedo / kPi * sum;
  }

  double specular(const Hit& hit, const Vec3& view_dir) const {
    const double ks = scene_.scene().materials()[hit.region].specular_coefficient;
    if (ks <= 0.0) return 0.0;
    const Vec3& n = hit.normal;
    const Vec3 v = -view_dir;
    double sum = 0.0;
    for (const Emitter& e : emitters_) {
      const Vec3 l = (e.position - hit.point).normalized();
      const double cos_i = n.dot(l);
      if (cos_i <= 0.0) continue;
      const Vec3 refl = 2.0 * cos_i * n - l;
      const double rv = refl.dot(v);
      if (rv <= 0.0) continue;
      const double lobe = std::pow(rv, exponent_);
      if (lobe < 1e-12) continue;
      Vec3 tl;
      const double irr = irradiance(e, hit.point, n, tl);
      sum += norm_ * lobe * irr;
    }
    return ks * sum;
  }

  // Smallest angle between the mirror direction and any emitter.
  double reflection_angle(const Hit& hit, const Vec3& view_dir) const {
    double best = std::numeric_limits<double>::infinity();
    for (const Emitter& e : emitters_) {
      const Vec3 half = ((e.position - hit.point).normalized() - view_dir).normalized();
      best = std::min(best, 2.0 * std::acos(std::clamp(half.dot(hit.normal), -1.0, 1.0)));
    }
    return best;
  }

private:
  const PosedScene& scene_;
  std::span<const Emitter> emitters_;
  double exponent_;
  double norm_;
};

}  // namespace

namespace {

struct SpecSample {
  double value = 0.0;
  double angle = std::numeric_limits<double>::infinity();
};

class SpecularIntegrator {
public:
  SpecularIntegrator(const PosedScene& scene, const Camera& camera, const Shader& shader,
                     const RenderSettings& settings, double cutoff)
      : scene_(scene), camera_(camera), shader_(shader), cutoff_(cutoff),
        tol_(settings.lobe_tolerance / std::sqrt(settings.specular_exponent)),
        max_depth_(settings.max_refinement_depth) {}

  SpecSample sample(double px, double py) const {
    const Ray ray = camera_.pixel_ray(px, py);
    const auto hit = scene_.intersect(ray);
    if (!hit || hit->region != Region::Cornea) return {};
    return {shader_.specular(*hit, ray.direction), shader_.reflection_angle(*hit, ray.direction)};
  }

  // `spread` is the reflection-angle variation expected across the pixel,
  // taken from its neighbours.
  double pixel(int x, int y, double spread) const {
    const std::array<SpecSample, 4> c{sample(x, y), sample(x + 1, y), sample(x, y + 1),
                                      sample(x + 1, y + 1)};
    return cell(x, y, 1.0, c, 0, spread);
  }

  double fixed_grid(int x, int y, int ss) const {
    double sum = 0.0;
    for (int sy = 0; sy < ss; ++sy)
      for (int sx = 0; sx < ss; ++sx) sum += sample(x + (sx + 0.5) / ss, y + (sy + 0.5) / ss).value;
    return sum / (ss * ss);
  }

private:
  // Mean specular over the square [x, x+size] x [y, y+size]; c holds the
  // corner samples in row-major order.
  double cell(double x, double y, double size, const std::array<SpecSample, 4>& c,
              int depth, double hint) const {
    const double h = 0.5 * size;
    const SpecSample m = sample(x + h, y + h);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    int finite = 0;
    for (const SpecSample* s : {&m, &c[0], &c[1], &c[2], &c[3]}) {
      if (!std::isfinite(s->angle)) continue;
      lo = std::min(lo, s->angle);
      hi = std::max(hi, s->angle);
      ++finite;
    }
    if (finite == 0) return 0.0;
    // The angle can dip below every sample inside the cell; allow for it
    // by extrapolating the observed spread. Cells straddling the corneal
    // boundary fall back on the parent's estimate.
    const bool mixed = finite < 5;
    const double spread = mixed ? std::max(hi - lo, hint) : hi - lo;
    if (depth < max_depth_ && lo - 2.0 * spread <= cutoff_ && (spread > tol_ || mixed)) {
      const SpecSample top = sample(x + h, y), left = sample(x, y + h);
      const SpecSample right = sample(x + size, y + h), bottom = sample(x + h, y + size);
      const double sub = 0.5 * spread;
      return 0.25 * (cell(x, y, h, {c[0], top, left, m}, depth + 1, sub) +
                     cell(x + h, y, h, {top, c[1], m, right}, depth + 1, sub) +
                     cell(x, y + h, h, {left, m, c[2], bottom}, depth + 1, sub) +
                     cell(x + h, y + h, h, {m, right, bottom, c[3]}, depth + 1, sub));
    }
    return 0.5 * m.value + 0.125 * (c[0].value + c[1].value + c[2].value + c[3].value);
  }

  const PosedScene& scene_;
  const Camera& camera_;
  const Shader& shader_;
  double cutoff_;
  double tol_;
  int max_depth_;
};

}  // namespace

RadianceImage render(const PosedScene& scene, const Camera& camera,
                     std::span<const Emitter> emitters, const RenderSettings& settings) {
  camera.validate();
  settings.validate();
  for (const Emitter& e : emitters) e.validate();
  const int n = camera.resolution;
  RadianceImage image(n, n);
  if (emitters.empty()) return image;

  const Shader shader(scene, emitters, settings.specular_exponent);
  const bool any_specular = scene.scene().materials().cornea.specular_coefficient > 0.0;

  // The lobe drops below lobe_floor of its peak beyond `lobe_edge`.
  const double lobe_edge =
      std::acos(std::exp(std::log(settings.lobe_floor) / settings.specular_exponent));
  constexpr double kNoLobe = std::numeric_limits<double>::infinity();
  Eigen::ArrayXXd gate = Eigen::ArrayXXd::Constant(n, n, kNoLobe);

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const Ray ray = camera.pixel_ray(x + 0.5, y + 0.5);
      const auto hit = scene.intersect(ray);
      if (!hit) continue;
      double value = 0.0;
      if (hit->region == Region::Cornea) {
        if (auto inner = scene.intersect_interior(ray, *hit))
          value += shader.diffuse(*inner, ray.direction);
        if (any_specular) gate(y, x) = shader.reflection_angle(*hit, ray.direction);
      } else {
        value += shader.diffuse(*hit, ray.direction);
      }
      image.values(y, x) = value;
    }
  }

  if (any_specular) {
    const SpecularIntegrator spec(scene, camera, shader, settings, lobe_edge);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        // Bound the pixel's smallest reflection angle from its 3x3
        // neighbourhood: nearest sampled angle minus twice the largest
        // step between neighbouring samples.
        double lo = kNoLobe, step = 0.0;
        bool edge = false;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = std::clamp(y + dy, 0, n - 1), xx = std::clamp(x + dx, 0, n - 1);
            const double a = gate(yy, xx);
            if (!std::isfinite(a)) {
              edge = true;
              continue;
            }
            lo = std::min(lo, a);
            if (std::isfinite(gate(y, x))) step = std::max(step, std::abs(a - gate(y, x)));
          }
        if (!std::isfinite(lo)) continue;
        if (edge || step == 0.0) step = std::max(step, kPi / 8.0);
        if (lo - 2.0 * step > lobe_edge) continue;
        image.values(y, x) += settings.specular_supersampling > 0
                                  ? spec.fixed_grid(x, y, settings.specular_supersampling)
                                  : spec.pixel(x, y, step);
      }
    }
  }
  image.update_stats();
  return image;
}

Exposure auto_expose(const PosedScene& scene, const Camera& camera,
                     std::span<const Emitter> emitters, const RenderSettings& settings) {
  const RadianceImage image = render(scene, camera, emitters, settings);
  if (!(image.max_value > 0.0))
    throw NumericalError("auto_expose: render is completely dark, scale is unbounded");
  Exposure out;
  out.scale = 0.9 * RadianceImage::kFullScale / image.max_value;
  out.emitters.assign(emitters.begin(), emitters.end());
  for (Emitter& e : out.emitters) e.radiant_intensity *= out.scale;
  return out;
}

}  // namespace sparsegaze
