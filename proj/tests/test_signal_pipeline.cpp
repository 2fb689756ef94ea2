#include "sparsegaze/signal_pipeline.hpp"

#include <doctest.h>

#include <random>

using namespace sparsegaze;

TEST_CASE("SG(5,2) weights") {
  const Eigen::VectorXd w = detail::sg_weights<double>(-2, 2, 2, 0);
  const double ref[] = {-3, 12, 17, 12, -3};
  for (int i = 0; i < 5; ++i) CHECK(w(i) == doctest::Approx(ref[i] / 35.0).epsilon(1e-12));
  Eigen::VectorXd impulse = Eigen::VectorXd::Zero(9);
  impulse(4) = 1.0;
  const Eigen::MatrixXd out = savitzky_golay(impulse, 5, 2);
  CHECK(std::abs(out(4, 0) - 17.0 / 35.0) < 1e-12);
  CHECK(std::abs(out(3, 0) - 12.0 / 35.0) < 1e-12);
}

TEST_CASE("SG reproduces cubics exactly, including the edges") {
  const int n = 60;
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    const double t = 0.1 * i - 3.0;
    x(i, 0) = 2.0 - t + 0.5 * t * t - 0.25 * t * t * t;
    x(i, 1) = 3.0 * t * t * t;
  }
  for (int window : {5, 7, 11, 21}) {
    const Eigen::MatrixXd y = savitzky_golay(x, window, 3);
    CHECK((y - x).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("SG in single precision") {
  Eigen::VectorXf x = Eigen::VectorXf::LinSpaced(20, 0.0f, 1.0f);
  const Eigen::MatrixXf y = savitzky_golay(x, 7, 2);
  CHECK((y.col(0) - x).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("SG argument checks") {
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(10);
  CHECK_THROWS_AS(savitzky_golay(x, 4, 2), InvalidArgument);
  CHECK_THROWS_AS(savitzky_golay(x, 5, 5), InvalidArgument);
  CHECK_THROWS_AS(savitzky_golay(x, 11, 3), InvalidArgument);
}

TEST_CASE("blink mask recovers injected square artifacts with margin") {
  const int n = 200;
  Eigen::MatrixXd clean(n, 3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) clean(i, c) = 10.0 + std::sin(0.05 * i + c);
  Eigen::MatrixXd dirty = clean;
  std::vector<bool> expect(n, false);
  const int margin = 2;
  for (auto [start, len] : {std::pair{40, 6}, std::pair{120, 3}, std::pair{197, 3}}) {
    for (int i = start; i < start + len && i < n; ++i) dirty(i, 1) -= 5.0;
    for (int i = std::max(0, start - margin); i < std::min(n, start + len + margin); ++i) expect[i] = true;
  }
  const BlinkMask m = remove_blinks(dirty, clean, 1.0, margin);
  CHECK(m.masked == expect);
  CHECK(m.count == std::count(expect.begin(), expect.end(), true));
  CHECK_FALSE(m.all_masked);

  const BlinkMask all = remove_blinks(dirty, clean + Eigen::MatrixXd::Constant(n, 3, 3.0), 1.0, 0);
  CHECK(all.all_masked);
}

TEST_CASE("blink thresholds use MAD with a range floor") {
  Eigen::MatrixXd signal(5, 2), filtered = Eigen::MatrixXd::Zero(5, 2);
  signal << 1, 0, -1, 0, 2, 0, -2, 0, 0, 100;
  const Eigen::VectorXd t = blink_thresholds(signal, filtered, 4.0, 0.01);
  // Residuals 1,-1,2,-2,0: median 0, MAD 1.
  CHECK(t(0) == doctest::Approx(4.0));
  // Second channel MAD is 0; floor is 1% of the range.
  CHECK(t(1) == doctest::Approx(1.0));
}

TEST_CASE("downsampling interpolates over unmasked samples") {
  Segment s;
  const int n = 50;
  s.t = Eigen::VectorXd::LinSpaced(n, 0.0, 4.9);
  s.readings.resize(n, 2);
  s.gaze.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    s.readings.row(i) << 3.0 * s.t(i) + 1.0, -s.t(i);
    s.gaze.row(i) << 2.0 * s.t(i), 5.0;
  }
  s.masked.assign(n, false);
  s.masked[0] = s.masked[20] = s.masked[21] = s.masked[n - 1] = true;
  const Segment d = downsample_segment(s, 10);
  REQUIRE(d.size() == 10);
  CHECK(d.t(0) == doctest::Approx(s.t(1)));
  CHECK(d.t(9) == doctest::Approx(s.t(n - 2)));
  for (int i = 0; i < 10; ++i) {
    CHECK(d.readings(i, 0) == doctest::Approx(3.0 * d.t(i) + 1.0).epsilon(1e-12));
    CHECK(d.gaze(i, 0) == doctest::Approx(2.0 * d.t(i)).epsilon(1e-12));
    CHECK_FALSE(d.masked[i]);
  }
  CHECK(d.unmasked_count() == 10);
}

TEST_CASE("min-max scaler") {
  Eigen::MatrixXd x(3, 3);
  x << 1, 5, 2, 3, 5, 4, 2, 5, 6;
  const Scaler s = fit_scaler(x);
  const Eigen::MatrixXd y = s.apply(x);
  CHECK(y.col(0).minCoeff() == 0.0);
  CHECK(y.col(0).maxCoeff() == 1.0);
  CHECK(y(2, 0) == 0.5);
  CHECK(s.degenerate[1]);
  CHECK(y.col(1).isZero());
  Eigen::MatrixXd outside(1, 3);
  outside << 5, 5, 10;
  CHECK(s.apply(outside)(0, 0) == 2.0);
}

TEST_CASE("PCA basis properties") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(200, 4);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double a = g(rng), b = g(rng);
    x.row(i) << 3 * a, a + 0.1 * b, -b, 2 * a - b + 0.01 * g(rng);
  }
  const PcaBasis p = pca_fit(x);
  REQUIRE(p.count() == 4);
  CHECK((p.components * p.components.transpose() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(p.explained.sum() == doctest::Approx(1.0));
  for (int i = 1; i < 4; ++i) CHECK(p.explained(i) <= p.explained(i - 1));
  CHECK((p.inverse(p.transform(x)) - x).cwiseAbs().maxCoeff() < 1e-10);
  // Projected training data is centred with decreasing variance.
  const Eigen::MatrixXd z = p.transform(x);
  CHECK(z.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);

  const PcaBasis two = pca_fit(x, 2);
  CHECK(two.count() == 2);
  Eigen::MatrixXd rank1(10, 3);
  for (int i = 0; i < 10; ++i) rank1.row(i) << i, 2 * i, -i;
  CHECK_THROWS_AS(pca_fit(rank1, 2), NumericalError);
}

TEST_CASE("segment validation and roles") {
  Segment s;
  s.t = Eigen::VectorXd::LinSpaced(3, 0, 1);
  s.readings = Eigen::MatrixXd::Zero(3, 2);
  s.gaze = Eigen::MatrixXd::Zero(2, 2);
  s.masked.assign(3, false);
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  CHECK(segment_role_from_string(to_string(SegmentRole::Test)) == SegmentRole::Test);
}
