#include "sparsegaze/eye_scene.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace sparsegaze {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Polynomial coefficients, lowest degree first.
using Cubic = std::array<double, 4>;

double eval(const Cubic& c, double t) { return ((c[3] * t + c[2]) * t + c[1]) * t + c[0]; }

// Real roots of a*t^2 + b*t + c in ascending order; returns count.
int solve_quadratic(double a, double b, double c, double& r0, double& r1) {
  if (std::abs(a) < 1e-300) {
    if (std::abs(b) < 1e-300) return 0;
    r0 = -c / b;
    return 1;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return 0;
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (b + std::copysign(sq, b));
  double x0 = q / a;
  double x1 = q != 0.0 ? c / q : -x0;
  if (x0 > x1) std::swap(x0, x1);
  r0 = x0;
  r1 = x1;
  return 2;
}

// Smallest root of the cubic in (lo, hi], found by splitting at the
// critical points and bisecting any bracketed sign change.
double first_root(const Cubic& c, double lo, double hi) {
  if (!(hi > lo)) return kInf;
  std::array<double, 4> knots{lo, hi, hi, hi};
  int n = 1;
  double d0 = 0, d1 = 0;
  const int nc = solve_quadratic(3.0 * c[3], 2.0 * c[2], c[1], d0, d1);
  if (nc >= 1 && d0 > lo && d0 < hi) knots[n++] = d0;
  if (nc == 2 && d1 > lo && d1 < hi && d1 != d0) knots[n++] = d1;
  knots[n++] = hi;
  std::sort(knots.begin(), knots.begin() + n);
  for (int i = 0; i + 1 < n; ++i) {
    double a = knots[i], b = knots[i + 1];
    double fa = eval(c, a), fb = eval(c, b);
    if (fb == 0.0 && b > lo) return b;
    if (fa == 0.0 && a > lo) return a;
    if ((fa < 0.0) == (fb < 0.0)) continue;
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
      const double m = 0.5 * (a + b);
      const double fm = eval(c, m);
      if ((fm < 0.0) == (fa < 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    return 0.5 * (a + b);
  }
  return kInf;
}

}  // namespace

std::string_view to_string(Region region) {
  switch (region) {
    case Region::Cornea: return "cornea";
    case Region::Iris: return "iris";
    case Region::Pupil: return "pupil";
    case Region::Sclera: return "sclera";
    case Region::Skin: return "skin";
    case Region::Eyelid: return "eyelid";
  }
  return "unknown";
}

Region region_from_string(std::string_view name) {
  for (Region r : {Region::Cornea, Region::Iris, Region::Pupil, Region::Sclera, Region::Skin,
                   Region::Eyelid}) {
    if (to_string(r) == name) return r;
  }
  throw InvalidArgument("unknown region '" + std::string(name) + "'");
}

void EyeState::validate() const {
  if (!(pupil_diameter >= kMinPupil && pupil_diameter <= kMaxPupil))
    throw InvalidArgument("pupil_diameter must lie in [2, 8] mm");
  if (!(eyelid_open >= 0.0 && eyelid_open <= 1.0))
    throw InvalidArgument("eyelid_open must lie in [0, 1]");
  if (!(std::abs(gaze_h) <= kMaxGaze && std::abs(gaze_v) <= kMaxGaze))
    throw InvalidArgument("gaze angles must lie within +-50.5 deg");
}

void EyeGeometry::validate() const {
  if (!(eyeball_radius > 0.0 && cornea_radius > 0.0 && iris_radius > 0.0))
    throw InvalidArgument("eye radii must be positive");
  if (!(cornea_radius < eyeball_radius))
    throw InvalidArgument("cornea_radius must be smaller than eyeball_radius");
  if (!(cornea_center_offset + cornea_radius > eyeball_radius))
    throw InvalidArgument("corneal sphere does not protrude from the eyeball");
  if (!(cornea_center_offset < eyeball_radius + cornea_radius))
    throw InvalidArgument("corneal sphere is detached from the eyeball");
  const double o = cornea_center_offset;
  const double zl = (o * o + eyeball_radius * eyeball_radius - cornea_radius * cornea_radius) /
                    (2.0 * o);
  const double apex = o + cornea_radius;
  if (!(limbal_blend >= 0.0 && zl + limbal_blend < apex && limbal_blend < zl))
    throw InvalidArgument("limbal_blend does not fit between the limbus and the apex");
  const double rl = std::sqrt(eyeball_radius * eyeball_radius - zl * zl);
  if (iris_radius > rl + 1e-12) throw InvalidArgument("iris_radius exceeds the limbus radius");
  if (!(face_radius > apex + 0.1)) throw InvalidArgument("face shell intersects the cornea");
  if (!(face_extent > 0.0 && face_extent < 89.0))
    throw InvalidArgument("face_extent must lie in (0, 89) deg");
  if (!(canthus > 0.0 && canthus < 89.0)) throw InvalidArgument("canthus must lie in (0, 89) deg");
  if (!(lower_lid <= lid_closure && lid_closure <= upper_lid && upper_lid < 89.0 &&
        lower_lid > -89.0))
    throw InvalidArgument("lid margins must satisfy lower <= closure <= upper");
}

const Material& Materials::operator[](Region region) const {
  switch (region) {
    case Region::Cornea: return cornea;
    case Region::Iris: return iris;
    case Region::Pupil: return pupil;
    case Region::Sclera: return sclera;
    case Region::Skin: return skin;
    case Region::Eyelid: return eyelid;
  }
  return skin;
}

Material& Materials::operator[](Region region) {
  return const_cast<Material&>(std::as_const(*this)[region]);
}

void Materials::validate() const {
  for (Region r : {Region::Cornea, Region::Iris, Region::Pupil, Region::Sclera, Region::Skin,
                   Region::Eyelid}) {
    const Material& m = (*this)[r];
    if (!(m.diffuse_albedo >= 0.0 && m.diffuse_albedo <= 1.0 && m.specular_coefficient >= 0.0 &&
          m.specular_coefficient <= 1.0))
      throw InvalidArgument("material coefficients must lie in [0, 1] (" +
                            std::string(to_string(r)) + ")");
    if (r != Region::Cornea && m.specular_coefficient > 0.0)
      throw InvalidArgument("only the cornea may carry a specular coefficient");
  }
}

EyeScene::EyeScene(const EyeGeometry& geometry, const Materials& materials)
    : geometry_(geometry), materials_(materials) {
  const double R = geometry.eyeball_radius, r = geometry.cornea_radius;
  const double o = geometry.cornea_center_offset;
  limbus_depth_ = (o * o + R * R - r * r) / (2.0 * o);
  limbus_radius_ = std::sqrt(R * R - limbus_depth_ * limbus_depth_);
  blend_k_ = 2.0 * o * geometry.limbal_blend;
}

EyeScene build_scene(const EyeGeometry& geometry, const Materials& materials) {
  geometry.validate();
  materials.validate();
  return EyeScene(geometry, materials);
}

// Union of the two spheres as a surface of revolution rho^2 = G(z), with
// max(S, K) replaced by the cubic smooth maximum inside the blend band.
// S - K = 2 o (z_L - z), so the band is exactly |z - z_L| < limbal_blend.
double EyeScene::profile(double z) const {
  const double R = geometry_.eyeball_radius, r = geometry_.cornea_radius;
  const double o = geometry_.cornea_center_offset;
  const double s = R * R - z * z;
  const double c = r * r - (z - o) * (z - o);
  const double d = s - c;
  const double m = std::max(s, c);
  if (blend_k_ <= 0.0 || std::abs(d) >= blend_k_) return m;
  const double h = (blend_k_ - std::abs(d)) / blend_k_;
  return m + h * h * h * blend_k_ / 6.0;
}

double EyeScene::profile_slope(double z) const {
  const double o = geometry_.cornea_center_offset;
  const double R = geometry_.eyeball_radius, r = geometry_.cornea_radius;
  const double s = R * R - z * z;
  const double c = r * r - (z - o) * (z - o);
  const double d = s - c;
  const double base = d > 0.0 ? -2.0 * z : -2.0 * (z - o);
  if (blend_k_ <= 0.0 || std::abs(d) >= blend_k_) return base;
  const double h = (blend_k_ - std::abs(d)) / blend_k_;
  return base + o * h * h * (d > 0.0 ? 1.0 : -1.0);
}

PosedScene::PosedScene(EyeScene scene, const EyeState& state)
    : scene_(std::move(scene)), state_(state) {
  state.validate();
  rotation_ = gaze_rotation(state.gaze_h, state.gaze_v);
  const EyeGeometry& g = scene_.geometry();
  upper_margin_ = g.lid_closure + state.eyelid_open * (g.upper_lid - g.lid_closure);
  lower_margin_ = g.lid_closure + state.eyelid_open * (g.lower_lid - g.lid_closure);
  tan_upper_ = std::tan(deg2rad(upper_margin_));
  tan_lower_ = std::tan(deg2rad(lower_margin_));
  tan_canthus_ = std::tan(deg2rad(g.canthus));
  cos_extent_ = std::cos(deg2rad(g.face_extent));
}

PosedScene pose_scene(const EyeScene& scene, const EyeState& state) {
  return PosedScene(scene, state);
}

Vec3 PosedScene::cornea_center() const {
  return eyeball_center() + scene_.geometry().cornea_center_offset * optical_axis();
}

Vec3 PosedScene::corneal_apex() const {
  return eyeball_center() + scene_.apex_distance() * optical_axis();
}

Vec3 PosedScene::to_eye(const Vec3& world) const {
  return rotation_.transpose() * (world - eyeball_center());
}

Vec3 PosedScene::from_eye(const Vec3& local) const {
  return eyeball_center() + rotation_ * local;
}

Region PosedScene::eye_region(const Vec3& world_point) const {
  const Vec3 p = to_eye(world_point);
  const double rho = std::hypot(p.x(), p.y());
  return (p.z() > 0.0 && rho < scene_.limbus_radius()) ? Region::Cornea : Region::Sclera;
}

std::optional<Hit> PosedScene::intersect_eye(const Ray& ray, double t_min) const {
  const EyeGeometry& g = scene_.geometry();
  const Vec3 o = to_eye(ray.origin);
  const Vec3 d = rotation_.transpose() * ray.direction;
  const double R = g.eyeball_radius, r = g.cornea_radius, off = g.cornea_center_offset;
  const double zl = scene_.limbus_depth(), w = g.limbal_blend;

  // Bounding sphere around the eyeball centre.
  const double bound = std::max(R, off + r) + w + 0.5;
  double b0 = 0, b1 = 0;
  if (solve_quadratic(d.squaredNorm(), 2.0 * o.dot(d), o.squaredNorm() - bound * bound, b0, b1) <
      2)
    return std::nullopt;
  const double t_lo = std::max(b0, t_min);
  const double t_hi = b1;
  if (!(t_hi > t_lo)) return std::nullopt;

  auto z_at = [&](double t) { return o.z() + t * d.z(); };
  double best = kInf;

  // Sphere pieces outside the blend band.
  auto sphere_piece = [&](const Vec3& center, double radius, bool below) {
    const Vec3 oc = o - center;
    double r0 = 0, r1 = 0;
    const int n = solve_quadratic(d.squaredNorm(), 2.0 * oc.dot(d),
                                  oc.squaredNorm() - radius * radius, r0, r1);
    for (int i = 0; i < n; ++i) {
      const double t = i == 0 ? r0 : r1;
      if (t <= t_lo || t > t_hi || t >= best) continue;
      const double z = z_at(t);
      if (below ? z <= zl - w : z >= zl + w) {
        best = t;
        return;
      }
    }
  };
  sphere_piece(Vec3::Zero(), R, true);
  sphere_piece(Vec3(0, 0, off), r, false);

  if (w > 0.0) {
    const double k = 2.0 * off * w;
    const double a2 = d.x() * d.x() + d.y() * d.y();
    const double a1 = 2.0 * (o.x() * d.x() + o.y() * d.y());
    const double a0 = o.x() * o.x() + o.y() * o.y();
    // Two halves of the band: [zl - w, zl] blends onto S, [zl, zl + w] onto K.
    for (int half = 0; half < 2; ++half) {
      const double z_lo = half == 0 ? zl - w : zl;
      const double z_hi = half == 0 ? zl : zl + w;
      double lo = t_lo, hi = t_hi;
      if (std::abs(d.z()) > 1e-15) {
        double ta = (z_lo - o.z()) / d.z(), tb = (z_hi - o.z()) / d.z();
        if (ta > tb) std::swap(ta, tb);
        lo = std::max(lo, ta);
        hi = std::min(hi, tb);
      } else if (o.z() < z_lo || o.z() > z_hi) {
        continue;
      }
      hi = std::min(hi, best);
      if (!(hi > lo)) continue;
      // Base sphere term, as a polynomial in t.
      const double zc = half == 0 ? o.z() : o.z() - off;
      const double rr = half == 0 ? R * R : r * r;
      const double g2 = -d.z() * d.z(), g1 = -2.0 * zc * d.z(), g0 = rr - zc * zc;
      // h(t) = h0 + h1 t, rising to 1 at the limbus plane from both sides.
      const double h0 = half == 0 ? (o.z() - zl + w) / w : (zl + w - o.z()) / w;
      const double h1 = half == 0 ? d.z() / w : -d.z() / w;
      const double s = k / 6.0;
      Cubic poly{
          a0 - g0 - s * h0 * h0 * h0,
          a1 - g1 - s * 3.0 * h0 * h0 * h1,
          a2 - g2 - s * 3.0 * h0 * h1 * h1,
          -s * h1 * h1 * h1,
      };
      const double t = first_root(poly, lo, hi);
      if (t < best) best = t;
    }
  }

  if (!std::isfinite(best)) return std::nullopt;
  const Vec3 p = o + best * d;
  Vec3 n_local(2.0 * p.x(), 2.0 * p.y(), -scene_.profile_slope(p.z()));
  n_local.normalize();
  const Vec3 world = ray.at(best);
  const double rho = std::hypot(p.x(), p.y());
  const Region region =
      (p.z() > 0.0 && rho < scene_.limbus_radius()) ? Region::Cornea : Region::Sclera;
  return Hit{region, world, rotation_ * n_local, best};
}

bool PosedScene::in_opening(const Vec3& rel) const {
  // rel.z() > 0 is guaranteed by the face extent.
  const double el = rel.y() / rel.z();
  const double az = std::abs(rel.x()) / rel.z();
  return az < tan_canthus_ && el > tan_lower_ && el < tan_upper_;
}

std::optional<Hit> PosedScene::intersect_face(const Ray& ray, double t_min) const {
  const EyeGeometry& g = scene_.geometry();
  const Vec3 oc = ray.origin - eyeball_center();
  double r0 = 0, r1 = 0;
  const int n = solve_quadratic(ray.direction.squaredNorm(), 2.0 * oc.dot(ray.direction),
                                oc.squaredNorm() - g.face_radius * g.face_radius, r0, r1);
  for (int i = 0; i < n; ++i) {
    const double t = i == 0 ? r0 : r1;
    if (t <= t_min) continue;
    const Vec3 rel = oc + t * ray.direction;
    if (rel.z() < cos_extent_ * g.face_radius) continue;
    if (in_opening(rel)) continue;
    const Region region =
        std::abs(rel.x()) / rel.z() <= tan_canthus_ ? Region::Eyelid : Region::Skin;
    return Hit{region, ray.at(t), rel / g.face_radius, t};
  }
  return std::nullopt;
}

std::optional<Hit> PosedScene::intersect(const Ray& ray, double t_min) const {
  auto face = intersect_face(ray, t_min);
  auto eye = intersect_eye(ray, t_min);
  if (face && (!eye || face->distance <= eye->distance)) return face;
  return eye;
}

std::optional<Hit> PosedScene::intersect_interior(const Ray& ray, const Hit& entry) const {
  const Vec3 o = to_eye(entry.point);
  const Vec3 d = rotation_.transpose() * ray.direction;
  const double zl = scene_.limbus_depth();
  // Iris plane sits at the limbus plane, facing outward.
  double t_plane = kInf;
  if (d.z() < -1e-15) {
    const double t = (zl - o.z()) / d.z();
    if (t > 0.0) t_plane = t;
  }
  const Ray inner{entry.point, ray.direction};
  auto exit = intersect_eye(inner, 1e-7);
  if (std::isfinite(t_plane) && (!exit || t_plane < exit->distance)) {
    const Vec3 p = o + t_plane * d;
    const double rho = std::hypot(p.x(), p.y());
    const Region region = rho <= 0.5 * state_.pupil_diameter ? Region::Pupil : Region::Iris;
    return Hit{region, from_eye(p), optical_axis(), entry.distance + t_plane};
  }
  if (!exit) return std::nullopt;
  // Grazing ray leaves the eye again through the cornea.
  if (exit->region != Region::Cornea) return Hit{exit->region, exit->point, exit->normal,
                                                 entry.distance + exit->distance};
  auto beyond = intersect(Ray{exit->point, ray.direction}, 1e-7);
  if (beyond) beyond->distance += entry.distance + exit->distance;
  return beyond;
}

bool PosedScene::occluded(const Vec3& from, const Vec3& to) const {
  Vec3 origin = from;
  const Vec3 dir = (to - from).normalized();
  double remaining = (to - from).norm();
  for (int bounce = 0; bounce < 6; ++bounce) {
    auto hit = intersect(Ray{origin, dir}, 1e-6);
    if (!hit || hit->distance >= remaining - 1e-6) return false;
    if (hit->region != Region::Cornea) return true;
    origin = hit->point;
    remaining -= hit->distance;
  }
  return true;
}

Vec3 corneal_reflection_point(const PosedScene& scene, const Vec3& emitter, const Vec3& sensor) {
  const Vec3 cc = scene.cornea_center();
  const double r = scene.scene().geometry().cornea_radius;
  if ((emitter - cc).norm() <= r || (sensor - cc).norm() <= r)
    throw InvalidArgument("emitter and sensor must lie outside the cornea");
  Vec3 n = ((emitter - cc).normalized() + (sensor - cc).normalized()).normalized();
  for (int it = 0; it < 500; ++it) {
    const Vec3 p = cc + r * n;
    const Vec3 next = ((emitter - p).normalized() + (sensor - p).normalized()).normalized();
    if (!next.allFinite()) break;
    const double step = (next - n).norm();
    n = next;
    if (step < 1e-15) return cc + r * n;
  }
  throw ConvergenceError("corneal reflection point did not converge");
}

std::optional<Vec3> glint_position(const PosedScene& scene, const Vec3& emitter,
                                   const Vec3& sensor) {
  const Vec3 p = corneal_reflection_point(scene, emitter, sensor);
  const Vec3 local = scene.to_eye(p);
  if (local.z() <= scene.scene().limbus_depth()) return std::nullopt;
  const Vec3 n = (p - scene.cornea_center()).normalized();
  const Vec3 lifted = p + 1e-5 * n;
  if (scene.occluded(lifted, emitter) || scene.occluded(lifted, sensor)) return std::nullopt;
  return p;
}

double limbus_distance(const PosedScene& scene, const Vec3& point) {
  const Vec3 p = scene.to_eye(point);
  const double rho = std::hypot(p.x(), p.y());
  return std::hypot(rho - scene.scene().limbus_radius(), p.z() - scene.scene().limbus_depth());
}

}  // namespace sparsegaze
