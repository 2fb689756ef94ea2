#include "sparsegaze/eye_scene.hpp"

#include <doctest.h>

#include <random>

using namespace sparsegaze;

namespace {

// Circle where two spheres on a common axis meet.
std::pair<double, double> sphere_intersection(double R, double r, double d) {
  const double z = (R * R - r * r + d * d) / (2 * d);
  return {z, std::sqrt(R * R - z * z)};
}

}  // namespace

TEST_CASE("gaze direction and rotation agree") {
  for (double h : {-40.0, -10.0, 0.0, 25.0})
    for (double v : {-30.0, 0.0, 15.0}) {
      const Vec3 d = gaze_direction(h, v);
      CHECK(d.norm() == doctest::Approx(1.0).epsilon(1e-14));
      CHECK((gaze_rotation(h, v) * Vec3::UnitZ() - d).norm() < 1e-14);
    }
  CHECK(gaze_direction(90, 0).x() == doctest::Approx(1.0));
  CHECK(gaze_direction(0, 90).y() == doctest::Approx(1.0));
}

TEST_CASE("limbus sits on the sphere intersection circle") {
  const EyeScene scene = build_scene();
  const auto [z, rho] = sphere_intersection(12.0, 7.8, 5.6);
  CHECK(scene.limbus_radius() == doctest::Approx(rho).epsilon(1e-12));
  CHECK(scene.limbus_radius() == doctest::Approx(6.281).epsilon(1e-3));
  CHECK(scene.limbus_depth() == doctest::Approx(z).epsilon(1e-12));
  CHECK(scene.apex_distance() == doctest::Approx(13.4));
}

TEST_CASE("blended profile is C1 and matches the spheres away from the band") {
  const EyeScene scene = build_scene();
  const double zl = scene.limbus_depth();
  // Outside the band the profile is the plain sphere.
  CHECK(scene.profile(0.0) == doctest::Approx(144.0).epsilon(1e-12));
  CHECK(scene.profile(12.5) == doctest::Approx(7.8 * 7.8 - std::pow(12.5 - 5.6, 2)).epsilon(1e-12));
  const double h = 1e-6;
  for (double z = zl - 0.6; z <= zl + 0.6; z += 0.01) {
    const double fd = (scene.profile(z + h) - scene.profile(z - h)) / (2 * h);
    CHECK(scene.profile_slope(z) == doctest::Approx(fd).epsilon(1e-5));
    // Slope has no jumps.
    CHECK(std::abs(scene.profile_slope(z + 1e-9) - scene.profile_slope(z - 1e-9)) < 1e-6);
  }
}

TEST_CASE("on-axis ray hits the corneal apex") {
  const EyeScene scene = build_scene();
  const PosedScene posed(scene, EyeState{});
  const auto hit = posed.intersect({Vec3(0, 0, 40), -Vec3::UnitZ()});
  REQUIRE(hit);
  CHECK(hit->region == Region::Cornea);
  CHECK(hit->point.z() == doctest::Approx(13.4).epsilon(1e-9));
  CHECK((hit->normal - Vec3::UnitZ()).norm() < 1e-9);
  CHECK(hit->distance == doctest::Approx(26.6).epsilon(1e-9));
  // Straight behind the apex lies the pupil.
  const auto inner = posed.intersect_interior({Vec3(0, 0, 40), -Vec3::UnitZ()}, *hit);
  REQUIRE(inner);
  CHECK(inner->region == Region::Pupil);
}

TEST_CASE("apex follows the gaze") {
  const EyeScene scene = build_scene();
  for (double h : {-20.0, 5.0, 30.0}) {
    const PosedScene posed(scene, EyeState{h, -12.0});
    CHECK((posed.corneal_apex() - 13.4 * gaze_direction(h, -12.0)).norm() < 1e-12);
    CHECK((posed.from_eye(posed.to_eye(Vec3(1, 2, 3))) - Vec3(1, 2, 3)).norm() < 1e-12);
  }
}

TEST_CASE("corneal reflection obeys the mirror law") {
  const EyeScene scene = build_scene();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ang(-25, 25);
  for (int i = 0; i < 20; ++i) {
    const PosedScene posed(scene, EyeState{ang(rng), ang(rng)});
    const Vec3 e = 30.0 * gaze_direction(ang(rng), ang(rng));
    const Vec3 s = 30.0 * gaze_direction(ang(rng), ang(rng));
    const Vec3 p = corneal_reflection_point(posed, e, s);
    const Vec3 n = (p - posed.cornea_center()).normalized();
    CHECK((p - posed.cornea_center()).norm() == doctest::Approx(7.8).epsilon(1e-9));
    const Vec3 to_e = (e - p).normalized(), to_s = (s - p).normalized();
    CHECK(n.dot(to_e) == doctest::Approx(n.dot(to_s)).epsilon(1e-8));
    // Coplanar incident, normal and reflected directions.
    CHECK(std::abs(n.cross(to_e).normalized().dot(to_s)) < 1e-7);
  }
}

TEST_CASE("coincident emitter and sensor on axis reflect at the apex") {
  const PosedScene posed(build_scene(), EyeState{});
  const Vec3 p = corneal_reflection_point(posed, Vec3(0, 0, 40), Vec3(0, 0, 40));
  CHECK((p - Vec3(0, 0, 13.4)).norm() < 1e-9);
  const auto g = glint_position(posed, Vec3(0, 0, 40), Vec3(0, 0, 40));
  REQUIRE(g);
  CHECK(limbus_distance(posed, *g) > 2.0);
}

TEST_CASE("no glint when the reflection falls off the corneal cap") {
  // Eye looking far away from source and sensor.
  const PosedScene posed(build_scene(), EyeState{45.0, 0.0});
  CHECK_FALSE(glint_position(posed, Vec3(-20, 0, 30), Vec3(-25, 0, 30)));
}

TEST_CASE("limbus distance is zero on the limbus") {
  const EyeScene scene = build_scene();
  const PosedScene posed(scene, EyeState{10.0, 5.0});
  const Vec3 local(scene.limbus_radius(), 0, scene.limbus_depth());
  CHECK(limbus_distance(posed, posed.from_eye(local)) < 1e-12);
  CHECK(limbus_distance(posed, posed.corneal_apex()) ==
        doctest::Approx(std::hypot(scene.limbus_radius(), 13.4 - scene.limbus_depth())));
}

TEST_CASE("regions and lids") {
  const EyeScene scene = build_scene();
  const PosedScene open(scene, EyeState{});
  CHECK(open.eye_region(Vec3(0, 0, 13.4)) == Region::Cornea);
  CHECK(open.upper_lid_margin() > open.lower_lid_margin());
  EyeState shut;
  shut.eyelid_open = 0.0;
  const PosedScene closed(scene, shut);
  const auto hit = closed.intersect({Vec3(0, 0, 40), -Vec3::UnitZ()});
  REQUIRE(hit);
  CHECK(hit->region == Region::Eyelid);
  for (Region r : {Region::Cornea, Region::Iris, Region::Pupil, Region::Sclera, Region::Skin, Region::Eyelid})
    CHECK(region_from_string(to_string(r)) == r);
}

TEST_CASE("occlusion treats the cornea as transparent") {
  const PosedScene posed(build_scene(), EyeState{});
  CHECK_FALSE(posed.occluded(Vec3(0, 0, 40), Vec3(0, 0, 20)));
  CHECK(posed.occluded(Vec3(0, 0, 40), Vec3(0, 0, -40)));
}

TEST_CASE("validation rejects bad poses and geometry") {
  EyeState s;
  s.gaze_h = 60;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = {};
  s.pupil_diameter = 9;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  EyeGeometry g;
  g.cornea_radius = -1;
  CHECK_THROWS_AS(build_scene(g), InvalidArgument);
  Materials m;
  m.sclera.diffuse_albedo = 1.5;
  CHECK_THROWS_AS(build_scene({}, m), InvalidArgument);
}
