#include "sparsegaze/estimators.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace sparsegaze;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = g(rng);
  return m;
}

double fd_error(const MlpModel& base, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::VectorXd theta = base.flatten();
  const Eigen::VectorXd grad = mlp_gradient(base, x, y).flatten();
  Eigen::VectorXd fd(theta.size());
  MlpModel m = base;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t(i) += h;
    m.assign(t);
    const double up = mlp_loss(m, x, y);
    t(i) -= 2 * h;
    m.assign(t);
    fd(i) = (up - mlp_loss(m, x, y)) / (2 * h);
  }
  return (grad - fd).norm() / std::max(fd.norm(), 1e-12);
}

}  // namespace

TEST_CASE("MLP layout and parameter vector") {
  const MlpModel m = MlpModel::xavier({5, 7, 3}, 1);
  CHECK(m.parameter_count() == 5 * 7 + 7 + 7 * 3 + 3);
  const Eigen::VectorXd p = m.flatten();
  MlpModel z = MlpModel::zeros({5, 7, 3});
  z.assign(p);
  CHECK(z.flatten() == p);
  const double bound = std::sqrt(6.0 / 12.0);
  CHECK(m.weights[0].cwiseAbs().maxCoeff() <= bound);
  CHECK(m.biases[0].isZero());
  CHECK(MlpModel::gaze_layout(9) == std::vector<int>{9, 64, 64, 64, 64, 2});
  CHECK_THROWS_AS(z.assign(Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST_CASE("MLP forward pass by hand") {
  MlpModel m = MlpModel::zeros({2, 2, 1});
  m.weights[0] << 1, 2, -1, 0.5;
  m.biases[0] << 0.1, -0.2;
  m.weights[1] << 3, -1;
  m.biases[1] << 0.5;
  const Eigen::Vector2d x(0.3, -0.4);
  const double h0 = std::tanh(0.3 - 0.8 + 0.1), h1 = std::tanh(-0.3 - 0.2 - 0.2);
  CHECK(mlp_forward(m, Eigen::VectorXd(x))(0) == doctest::Approx(3 * h0 - h1 + 0.5).epsilon(1e-14));
  Eigen::MatrixXd batch(2, 2);
  batch << 0.3, -0.4, 0.3, -0.4;
  const Eigen::MatrixXd y = mlp_forward(m, batch);
  CHECK(y(0, 0) == y(1, 0));
  Eigen::MatrixXd target(2, 1);
  target << 0.0, 1.0;
  const double o = 3 * h0 - h1 + 0.5;
  CHECK(mlp_loss(m, batch, target) == doctest::Approx((o * o + (o - 1) * (o - 1)) / 2).epsilon(1e-14));
}

TEST_CASE("backpropagation matches central differences") {
  const std::vector<int> layout{6, 16, 16, 16, 16, 2};
  for (std::uint64_t k = 0; k < 10; ++k) {
    MlpModel m = MlpModel::xavier(layout, 100 + k);
    m.assign(m.flatten() + random_matrix(m.parameter_count(), 1, 200 + k, 0.05));
    const Eigen::MatrixXd x = random_matrix(8, 6, 300 + k);
    const Eigen::MatrixXd y = random_matrix(8, 2, 400 + k, 10.0);
    CHECK(fd_error(m, x, y) < 1e-4);
  }
}

TEST_CASE("training is bit-reproducible and never accepts a worse epoch") {
  const Eigen::MatrixXd x = random_matrix(40, 3, 5);
  Eigen::MatrixXd y(40, 2);
  y.col(0) = 10 * x.col(0) - 5 * x.col(1).array().square().matrix();
  y.col(1) = 4 * x.col(2);
  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.hidden = {12, 12};
  cfg.seed = 9;
  const TrainResult a = mlp_train(x, y, cfg);
  const TrainResult b = mlp_train(x, y, cfg);
  CHECK(a.model.flatten() == b.model.flatten());
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.epochs == 40);
  for (std::size_t i = 1; i < a.loss_trace.size(); ++i)
    CHECK(a.loss_trace[i] <= a.loss_trace[i - 1] + cfg.accept_tolerance);
  CHECK(a.loss_trace.back() < 0.5 * a.loss_trace.front());
  CHECK(a.loss_trace.size() == static_cast<std::size_t>(a.epochs - a.rejected_epochs + 1));
  cfg.seed = 10;
  CHECK(mlp_train(x, y, cfg).model.flatten() != a.model.flatten());
}

TEST_CASE("training input checks") {
  TrainConfig cfg;
  CHECK_THROWS_AS(mlp_train(Eigen::MatrixXd::Zero(0, 3), Eigen::MatrixXd::Zero(0, 2), cfg), InvalidArgument);
  CHECK_THROWS_AS(mlp_train(Eigen::MatrixXd::Zero(4, 3), Eigen::MatrixXd::Zero(5, 2), cfg), InvalidArgument);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("distances") {
  const Eigen::Vector3d a(1, -2, 3), b(4, 2, 3);
  CHECK(minkowski_distance(a, b, 1.0) == 7.0);
  CHECK(minkowski_distance(a, b, 2.0) == doctest::Approx(5.0));
  CHECK(minkowski_distance(a, b, 3.0) == doctest::Approx(std::cbrt(27.0 + 64.0)));
  CHECK_THROWS_AS(minkowski_distance(a, b, 0.5), InvalidArgument);
  const Eigen::Vector3f af = a.cast<float>(), bf = b.cast<float>();
  CHECK(minkowski_distance(af, bf, 2.0f) == doctest::Approx(5.0f));
  const Eigen::VectorXd u = a, w = b;
  CHECK(cosine_distance(u, w) == doctest::Approx(1.0 - (4.0 - 4.0 + 9.0) / (std::sqrt(14.0) * std::sqrt(29.0))));
  CHECK(canberra_distance(u, w) == doctest::Approx(3.0 / 5.0 + 4.0 / 4.0 + 0.0));
  KernelParams p;
  p.length_scale = 2.0;
  CHECK(kernel(u, w, p) == doctest::Approx(std::exp(-2.5)));
  CHECK(kernel(u, u, p) == 1.0);
  for (DistanceKind k : {DistanceKind::Minkowski, DistanceKind::Cosine, DistanceKind::Manhattan, DistanceKind::Canberra})
    CHECK(distance_from_string(to_string(k)) == k);
}

TEST_CASE("median pairwise distance") {
  Eigen::MatrixXd x(3, 1);
  x << 0, 1, 3;
  KernelParams p;
  CHECK(median_pairwise_distance(x, p) == 2.0);
}

TEST_CASE("GPR interpolates exactly without jitter") {
  const Eigen::MatrixXd c = random_matrix(98, 6, 21);
  const Eigen::MatrixXd t = random_matrix(98, 2, 22, 20.0);
  KernelParams params;
  params.minkowski_order = 3.0;
  GprOptions opt;
  opt.jitter = 0.0;
  const GprModel m = gpr_fit(c, t, params, opt);
  CHECK(m.params.length_scale > 0.0);
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    CHECK((gpr_predict(m, c.row(i).transpose()) - t.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(m.covariance().isApprox(m.covariance().transpose()));

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(c.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(4);
  std::shuffle(perm.begin(), perm.end(), rng);
  const GprModel q = gpr_fit(c(perm, Eigen::all), t(perm, Eigen::all), m.params, opt);
  const Eigen::MatrixXd probe = random_matrix(20, 6, 23);
  for (Eigen::Index i = 0; i < probe.rows(); ++i)
    CHECK((gpr_predict(m, probe.row(i).transpose()) - gpr_predict(q, probe.row(i).transpose())).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("GPR duplicates need jitter") {
  Eigen::MatrixXd c(3, 2);
  c << 0, 0, 1, 1, 0, 0;
  Eigen::MatrixXd t(3, 2);
  t << 1, 1, 2, 2, 1, 1;
  GprOptions opt;
  opt.jitter = 0.0;
  CHECK_THROWS_AS(gpr_fit(c, t, {}, opt), NumericalError);
  opt.jitter = 1e-14;
  opt.escalate = true;
  opt.min_rcond = 1e-9;
  const GprModel m = gpr_fit(c, t, {}, opt);
  CHECK(m.jitter > 0.0);
  CHECK(gpr_predict(m, Eigen::Vector2d(0, 0))(0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_THROWS_AS(gpr_predict(m, Eigen::Vector3d(0, 0, 0)), InvalidArgument);
}

TEST_CASE("EWMA step response") {
  EwmaState s;
  s.alpha = 0.2;
  ewma_step(s, Eigen::Vector2d::Zero());
  for (int n = 1; n <= 30; ++n) {
    const Eigen::Vector2d y = ewma_step(s, Eigen::Vector2d::Ones());
    CHECK(std::abs(y(0) - (1.0 - std::pow(0.8, n))) < 1e-12);
  }
  EwmaState fresh;
  CHECK(ewma_step(fresh, Eigen::Vector2d(3, 4)) == Eigen::Vector2d(3, 4));
}
