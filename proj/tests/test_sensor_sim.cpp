#include "sparsegaze/sensor_sim.hpp"

#include <doctest.h>

#include <random>

using namespace sparsegaze;

namespace {

double direct_sum(const RadianceImage& img, double x0, double y0, double sigma) {
  double s = 0.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - x0, dy = y - y0;
      s += img.values(y, x) * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    }
  return s;
}

SweepMap synthetic_map(int n) {
  SweepMap m;
  for (int i = 0; i < n; ++i) {
    m.h.push_back(i - n / 2);
    m.v.push_back(i - n / 2);
  }
  m.values = Eigen::MatrixXd::Constant(n, n, 1.0);
  return m;
}

}  // namespace

TEST_CASE("gaussian window shape") {
  const SensorWindow w = gaussian_window(33, 21, 4.0);
  CHECK(w.weight_at(w.x0, w.y0) == 1.0);
  CHECK(w.weight_at(w.x0 + 4.0, w.y0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(w.weight_at(w.x0, w.y0 - 4.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(w.weights.rows() == 21);
  CHECK(w.weights.cols() == 33);
  CHECK(w.weights(3, 7) == doctest::Approx(w.weight_at(7, 3)).epsilon(1e-15));
  CHECK_THROWS_AS(gaussian_window(8, 8, 0.0), InvalidArgument);
}

TEST_CASE("acceptance half-angle maps to half maximum") {
  Camera cam;
  cam.fov = 40.0;
  cam.resolution = 32;
  const double sigma = acceptance_sigma(cam, 10.0);
  // 10 deg of a 40 deg fov is a quarter of the width: 8 px from the centre.
  CHECK(std::exp(-64.0 / (2 * sigma * sigma)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("integration matches a direct double sum") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 60000);
  for (int k = 0; k < 10; ++k) {
    RadianceImage img(17 + k, 13 + 2 * k);
    for (Eigen::Index i = 0; i < img.values.size(); ++i) img.values(i) = u(rng);
    img.update_stats();
    const SensorWindow w = gaussian_window(img.width, img.height, 2.5 + k);
    const double ref = direct_sum(img, w.x0, w.y0, w.sigma);
    CHECK(integrate_sensor(img, w) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("integration refuses saturated or mismatched images") {
  RadianceImage img(4, 4);
  img.values.setConstant(70000.0);
  img.update_stats();
  CHECK_THROWS_AS(integrate_sensor(img, gaussian_window(4, 4, 1.0)), SaturationError);
  RadianceImage ok(4, 4);
  CHECK_THROWS_AS(integrate_sensor(ok, gaussian_window(5, 4, 1.0)), InvalidArgument);
}

TEST_CASE("simulate_frame reads dark sensors as zero") {
  const EyeScene scene = build_scene();
  const PosedScene posed(scene, EyeState{});
  const Camera cam = Camera::looking_at(Vec3(0, -10, 26), Vec3(0, 0, 5.6), 40.0, 16);
  const std::vector<Sensor> sensors{Sensor::make(0, cam), Sensor::make(1, cam)};
  const std::vector<Emitter> emitters{Emitter::aimed_at(Vec3(5, -10, 26), Vec3(0, 0, 5.6), 100.0)};
  const SignalFrame f = simulate_frame(posed, sensors, emitters, {{0}, {}}, {}, 1.5);
  CHECK(f.timestamp == 1.5);
  CHECK(f.sensor_ids == std::vector<int>{0, 1});
  CHECK(f.readings(0) > 0.0);
  CHECK(f.readings(1) == 0.0);
  CHECK_THROWS_AS(simulate_frame(posed, sensors, emitters, {{0}}), InvalidArgument);
  CHECK_THROWS_AS(simulate_frame(posed, sensors, emitters, {{0}, {3}}), InvalidArgument);
}

TEST_CASE("sweep axes") {
  CHECK(SweepAxis{-30, 30, 1}.values().size() == 61);
  const auto v = SweepAxis{-2, 2, 0.5}.values();
  REQUIRE(v.size() == 9);
  CHECK(v.back() == 2.0);
}

TEST_CASE("ridge mask flags a cell above its neighbourhood median") {
  SweepMap m = synthetic_map(9);
  m.values(4, 6) = 1.31;
  m.values(2, 2) = 1.29;
  const auto mask = ridge_mask(m, 1.3);
  CHECK(mask.count() == 1);
  CHECK(mask(4, 6));
  const RidgeSummary s = summarize_ridge(m, mask);
  CHECK(s.cells == 1);
  CHECK(s.components == 1);
  CHECK_FALSE(s.closed);
  CHECK(s.peak_h == 2.0);
  CHECK(s.peak_v == 0.0);
}

TEST_CASE("ridge closure needs a chain crossing the map") {
  SweepMap m = synthetic_map(41);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> arc =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(41, 41, false);
  // Quarter circle from the left edge to the bottom edge, sparse cells.
  for (int a = 0; a <= 90; a += 10) {
    const double t = deg2rad(a);
    arc(static_cast<int>(std::lround(40 - 25 * std::sin(t))), static_cast<int>(std::lround(25 * std::cos(t)))) =
        true;
  }
  const RidgeSummary closed = summarize_ridge(m, arc, 6);
  CHECK(closed.components == 1);
  CHECK(closed.closed);

  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> blob = arc;
  blob.setConstant(false);
  blob(20, 20) = blob(21, 21) = blob(22, 20) = true;
  const RidgeSummary open = summarize_ridge(m, blob, 6);
  CHECK(open.components == 1);
  CHECK_FALSE(open.closed);

  blob(2, 2) = true;
  CHECK(summarize_ridge(m, blob, 6).components == 2);
}

TEST_CASE("sweep without a specular cornea has no ridge") {
  Materials dull;
  dull.cornea.specular_coefficient = 0.0;
  const EyeScene scene = build_scene({}, dull);
  const SweepRig rig = default_sweep_rig(scene, 24);
  const SweepMap m = sweep_gaze(scene, EyeState{}, rig.sensor, rig.emitter, {-30, 30, 5}, {-30, 30, 5});
  CHECK(m.values.rows() == 13);
  CHECK(m.values.cols() == 13);
  CHECK((m.values.array() > 0).all());
  CHECK(summarize_ridge(m, ridge_mask(m)).cells == 0);
}
