// Acceptance run: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include "sparsegaze/gaze_model.hpp"

#include <chrono>
#include <cstring>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace sparsegaze;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct Criterion {
  int id;
  const char* name;
  double budget;  // seconds
  std::function<void(Outcome&)> run;
};

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = g(rng);
  return m;
}

// ---------------------------------------------------------------------

void window_equations(Outcome& o) {
  std::mt19937_64 rng(1);
  const SensorWindow w = gaussian_window(31, 31, 5.0);
  const double centre = w.weight_at(w.x0, w.y0);
  const double at_sigma = w.weight_at(w.x0 + w.sigma, w.y0);
  o.require(centre == 1.0, "g(centre) = 1");
  o.require(std::abs(at_sigma - std::exp(-0.5)) <= 1e-12, "g(sigma) = e^-1/2");
  std::uniform_int_distribution<int> size(4, 96);
  std::uniform_real_distribution<double> px(0.0, 65535.0), sig(0.5, 40.0);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    RadianceImage img(size(rng), size(rng));
    for (Eigen::Index i = 0; i < img.values.size(); ++i) img.values(i) = px(rng);
    img.update_stats();
    const double sigma = sig(rng);
    const SensorWindow win = gaussian_window(img.width, img.height, sigma);
    double ref = 0.0;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double dx = x - win.x0, dy = y - win.y0;
        ref += img.values(y, x) * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      }
    worst = std::max(worst, std::abs(integrate_sensor(img, win) - ref) / std::abs(ref));
  }
  o.require(worst <= 1e-9, "integration vs direct sum");
  o.detail << "g(sigma) err " << std::abs(at_sigma - std::exp(-0.5)) << ", worst rel err " << worst
           << " over 50 images";
}

void saturation_guard(Outcome& o) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int raised = 0;
  for (int k = 0; k < 100; ++k) {
    RadianceImage img(8 + k % 5, 8);
    for (Eigen::Index i = 0; i < img.values.size(); ++i) img.values(i) = 60000.0 * u(rng);
    img.values(k % img.values.size()) = RadianceImage::kFullScale * (1.0 + u(rng));
    img.update_stats();
    try {
      integrate_sensor(img, gaussian_window(img.width, img.height, 3.0));
    } catch (const SaturationError&) {
      ++raised;
    }
  }
  o.require(raised == 100, "saturated images raise");

  const EyeScene scene = build_scene();
  int clean = 0;
  for (int k = 0; k < 100; ++k) {
    EyeState state;
    state.gaze_h = -40 + 80 * u(rng);
    state.gaze_v = -35 + 70 * u(rng);
    state.pupil_diameter = 2 + 6 * u(rng);
    state.eyelid_open = 0.3 + 0.7 * u(rng);
    const PosedScene posed(scene, state);
    const Vec3 aim(0, 0, 6.0);
    const Vec3 cam_at = (25 + 10 * u(rng)) * gaze_direction(-40 + 80 * u(rng), -40 + 80 * u(rng));
    const Vec3 led_at = cam_at + Vec3(-6 + 12 * u(rng), -6 + 12 * u(rng), 0);
    const Camera cam = Camera::looking_at(cam_at, aim, 20 + 40 * u(rng), 32);
    const std::vector<Emitter> lit{Emitter::aimed_at(led_at, aim, std::pow(10.0, 1 + 8 * u(rng)))};
    const Exposure ex = auto_expose(posed, cam, lit);
    if (!render(posed, cam, ex.emitters).saturated) ++clean;
  }
  o.require(clean == 100, "auto exposure leaves no saturated render");
  o.detail << raised << "/100 saturated images raised, " << clean << "/100 exposed renders unsaturated";
}

void glint_ridge(Outcome& o) {
  const EyeScene scene = build_scene();
  const SweepRig rig = default_sweep_rig(scene, 128);
  const SweepAxis axis{-30, 30, 1};
  const SweepMap map = sweep_gaze(scene, EyeState{}, rig.sensor, rig.emitter, axis, axis);
  const auto mask = ridge_mask(map);
  const RidgeSummary ridge = summarize_ridge(map, mask);
  o.require(ridge.closed, "closed ridge");
  int close = 0;
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      const PosedScene posed(scene, EyeState{map.h[static_cast<std::size_t>(c)], map.v[static_cast<std::size_t>(r)]});
      const Vec3 g = corneal_reflection_point(posed, rig.emitter.position, rig.sensor.camera.position);
      if (limbus_distance(posed, g) < 0.5) ++close;
    }
  const double fraction = ridge.cells > 0 ? double(close) / ridge.cells : 0.0;
  o.require(ridge.cells > 0 && fraction >= 0.9, ">= 90% of ridge cells within 0.5 mm of the limbus");

  // Horizontal slice through the peak: a local maximum above its +-3 deg neighbours.
  const auto row = static_cast<Eigen::Index>(
      std::find(map.v.begin(), map.v.end(), ridge.peak_v) - map.v.begin());
  const Eigen::RowVectorXd slice = map.values.row(row);
  bool spike = false;
  double spike_h = 0.0;
  for (Eigen::Index c = 3; c + 3 < slice.size(); ++c) {
    const double here = slice(c);
    if (here >= slice.segment(c - 3, 7).maxCoeff() && here > slice(c - 3) && here > slice(c + 3)) {
      spike = true;
      spike_h = map.h[static_cast<std::size_t>(c)];
      break;
    }
  }
  o.require(spike, "slice spike");
  o.detail << ridge.cells << " ridge cells, " << ridge.components << " component(s), closed "
           << (ridge.closed ? "yes" : "no") << ", " << close << " near the limbus (" << 100 * fraction
           << "%), slice v=" << ridge.peak_v << " spike at h=" << spike_h;
}

void gpr_interpolation(Outcome& o) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd c = gaussian(98, 6, rng);
  const Eigen::MatrixXd t = gaussian(98, 2, rng, 25.0);
  KernelParams params;
  GprOptions opt;
  opt.jitter = 0.0;
  const GprModel m = gpr_fit(c, t, params, opt);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    worst = std::max(worst, (gpr_predict(m, c.row(i).transpose()) - t.row(i).transpose()).cwiseAbs().maxCoeff());
  o.require(worst <= 1e-6, "exact interpolation");
  std::vector<Eigen::Index> perm(98);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const GprModel q = gpr_fit(c(perm, Eigen::all), t(perm, Eigen::all), m.params, opt);
  const Eigen::MatrixXd probe = gaussian(50, 6, rng);
  double drift = 0.0;
  for (Eigen::Index i = 0; i < probe.rows(); ++i)
    drift = std::max(drift, (gpr_predict(m, probe.row(i).transpose()) - gpr_predict(q, probe.row(i).transpose()))
                                .cwiseAbs()
                                .maxCoeff());
  o.require(drift <= 1e-9, "permutation invariance");
  o.detail << "max interpolation error " << worst << " deg, permutation drift " << drift << " deg (p=98)";
}

void mlp_gradients(Outcome& o) {
  std::mt19937_64 rng(5);
  const std::vector<int> layout = MlpModel::gaze_layout(8);
  double worst = 0.0;
  Eigen::Index params = 0;
  for (int k = 0; k < 10; ++k) {
    MlpModel m = MlpModel::xavier(layout, 50 + static_cast<std::uint64_t>(k));
    m.assign(m.flatten() + gaussian(m.parameter_count(), 1, rng, 0.05));
    const Eigen::MatrixXd x = gaussian(4, 8, rng);
    const Eigen::MatrixXd y = gaussian(4, 2, rng, 10.0);
    const Eigen::VectorXd grad = mlp_gradient(m, x, y).flatten();
    const Eigen::VectorXd theta = m.flatten();
    params = theta.size();
    Eigen::VectorXd fd(theta.size());
    MlpModel probe = m;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd p = theta;
      p(i) += h;
      probe.assign(p);
      const double up = mlp_loss(probe, x, y);
      p(i) -= 2 * h;
      probe.assign(p);
      fd(i) = (up - mlp_loss(probe, x, y)) / (2 * h);
    }
    worst = std::max(worst, (grad - fd).norm() / fd.norm());
  }
  o.require(worst < 1e-4, "gradient check");

  const Eigen::MatrixXd x = gaussian(200, 8, rng);
  Eigen::MatrixXd y(200, 2);
  y.col(0) = 15 * x.col(0).array().sin().matrix() + 3 * x.col(1);
  y.col(1) = 10 * x.col(2) - 2 * x.col(3).array().square().matrix();
  TrainConfig cfg;
  cfg.max_epochs = 20;
  cfg.seed = 17;
  const TrainResult a = mlp_train(x, y, cfg);
  const TrainResult b = mlp_train(x, y, cfg);
  const Eigen::VectorXd pa = a.model.flatten(), pb = b.model.flatten();
  const bool identical =
      pa.size() == pb.size() && std::memcmp(pa.data(), pb.data(), sizeof(double) * pa.size()) == 0 &&
      a.loss_trace == b.loss_trace;
  o.require(identical, "bit-reproducible training");
  o.detail << "worst relative gradient error " << worst << " over 10 points, "
           << params << " parameters; repeated training " << (identical ? "bit-identical" : "differs");
}

void end_to_end(Outcome& o, Mode mode) {
  const EyeScene scene = build_scene();
  const SynthConfig cfg = SynthConfig::defaults(mode);
  const auto t0 = std::chrono::steady_clock::now();
  const GazeDataset ds = synthesize(scene, cfg);
  const double synth_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EvalReport report;
  if (mode == Mode::NextGaze) {
    o.require(ds.channels() == 8, "8 sensors");
    o.require(ds.count(UnitKind::Pursuit, SegmentRole::Train) == 20 &&
                  ds.count(UnitKind::Pursuit, SegmentRole::Test) == 4 &&
                  ds.count(UnitKind::Grid, SegmentRole::Test) == 25,
              "protocol units");
    const NextGazeFit fit = train_nextgaze(ds);
    o.require(fit.training.epochs <= 500, "epoch limit");
    report = evaluate_model(fit.model, ds);
    const ErrorStats& s = report.headline("overall");
    o.require(s.mean < 2.67, "mean < 2.67 deg");
    o.require(report.headline("fixation").mean < 2.67, "fixation mean < 2.67 deg");
    o.detail << "mean " << s.mean << " deg, median " << s.median << ", std " << s.stddev << " over " << s.count
             << " test frames (pursuit " << report.headline("pursuit").mean << ", fixation "
             << report.headline("fixation").mean << "); " << fit.training.epochs << " epochs, synthesis "
             << synth_s << " s";
  } else {
    o.require(ds.channels() == 6, "6 LEDs");
    o.require(ds.count(UnitKind::Grid, SegmentRole::Test) == 16, "grid session 2");
    const Led2GazeModel m = train_led2gaze(ds);
    report = evaluate_model(m, ds);
    const ErrorStats& s = report.headline("grid");
    o.require(s.mean < 1.57, "mean < 1.57 deg");
    o.require(s.median < 1.12, "median < 1.12 deg");
    o.detail << "grid session 2 mean " << s.mean << " deg, median " << s.median << ", std " << s.stddev
             << " over " << s.count << " frames; " << m.gpr.size() << " calibration vectors, synthesis "
             << synth_s << " s";
  }
}

void timing_power(Outcome& o) {
  using namespace prototype;
  const Schedule pd = plan_pulsed(kPdEmitters, kPdPulsesPerEmitter, kPdPulseOn, kPdPulsePeriod, kPdRate);
  o.require(std::abs(pd.frame_rate() - 400.0) < 1e-9, "400 Hz");
  o.require(std::abs(pd.active_time() - 192e-6) < 1e-15, "192 us active");
  const Schedule rr = plan_round_robin(kLedCount, 4e-3 / kLedCount);
  o.require(std::abs(rr.frame_rate() - 250.0) < 1e-9, "250 Hz");
  const std::vector<DrivePoint> drive(2, {1.5, 0.067});
  const double led = power_estimate(pd, drive);
  const double oracle = 1.5 * 0.067 * (2 * 4 * 3e-6) / 2.5e-3;
  o.require(std::abs(led - oracle) <= 1e-9 * oracle, "LED average power");
  o.require(std::abs(led - 0.965e-3) < 0.0005e-3, "about 0.965 mW");
  const double total = power_estimate(pd, drive, kPdFrontEndBaseline);
  o.require(std::abs(total - 16e-3) <= 1e-9 * 16e-3, "16 mW total");
  o.detail << pd.frame_rate() << " Hz, active " << pd.active_time() * 1e6 << " us; round robin "
           << rr.frame_rate() << " Hz; LED " << led * 1e3 << " mW, total " << total * 1e3 << " mW";
}

void filters(Outcome& o) {
  const int n = 80;
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) {
    const double t = 0.05 * i - 2.0;
    x(i) = 1.5 - 2 * t + 0.7 * t * t + 1.1 * t * t * t;
  }
  const double cubic = (savitzky_golay(x, 11, 3).col(0) - x).cwiseAbs().maxCoeff();
  o.require(cubic <= 1e-9, "cubic exactness");
  Eigen::VectorXd impulse = Eigen::VectorXd::Zero(11);
  impulse(5) = 1.0;
  const double centre = savitzky_golay(impulse, 5, 2)(5, 0);
  o.require(std::abs(centre - 17.0 / 35.0) <= 1e-12, "17/35 centre weight");
  EwmaState s;
  s.alpha = 0.2;
  ewma_step(s, Eigen::Vector2d::Zero());
  double ewma = 0.0;
  for (int k = 1; k <= 50; ++k)
    ewma = std::max(ewma, std::abs(ewma_step(s, Eigen::Vector2d::Ones())(0) - (1.0 - std::pow(0.8, k))));
  o.require(ewma <= 1e-12, "EWMA step response");

  Eigen::MatrixXd clean(300, 4);
  for (int i = 0; i < 300; ++i)
    for (int c = 0; c < 4; ++c) clean(i, c) = 5.0 + std::cos(0.03 * i * (c + 1));
  Eigen::MatrixXd dirty = clean;
  std::vector<bool> expect(300, false);
  for (auto [at, len, ch] : {std::tuple{10, 5, 0}, std::tuple{100, 8, 2}, std::tuple{200, 1, 3}, std::tuple{296, 4, 1}}) {
    for (int i = at; i < at + len; ++i) dirty(i, ch) += 4.0;
    for (int i = std::max(0, at - 2); i < std::min(300, at + len + 2); ++i) expect[static_cast<std::size_t>(i)] = true;
  }
  const BlinkMask m = remove_blinks(dirty, clean, 1.0, 2);
  o.require(m.masked == expect, "blink mask indices");
  o.detail << "cubic err " << cubic << ", centre weight err " << std::abs(centre - 17.0 / 35.0) << ", EWMA err "
           << ewma << ", blink mask " << m.count << " samples " << (m.masked == expect ? "exact" : "mismatch");
}

void protocol_fidelity(Outcome& o) {
  const PursuitProfile p = PursuitProfile::make(40.0);
  o.require(std::abs(p.duration - 7.667) <= 1e-3, "7.667 s");
  o.require(p.peak_speed == 6.0, "peak 6 deg/s");
  const StimulusTrack ng = build_split(Mode::NextGaze);
  const StimulusTrack led = build_split(Mode::Led2Gaze);
  const bool ng_ok = ng.count(UnitKind::Pursuit, SegmentRole::Train) == 20 &&
                     ng.count(UnitKind::Pursuit, SegmentRole::Test) == 4 &&
                     ng.count(UnitKind::Grid, SegmentRole::Test) == 25 && ng.units.size() == 49;
  const bool led_ok = led.count(UnitKind::Pursuit, SegmentRole::Train) == 9 &&
                      led.count(UnitKind::Grid, SegmentRole::Train) == 16 &&
                      led.count(UnitKind::Random, SegmentRole::Train) == 66 &&
                      led.count(UnitKind::Grid, SegmentRole::Test) == 16 && led.units.size() == 107;
  o.require(ng_ok, "photodiode split");
  o.require(led_ok, "LED split");
  o.detail << "duration " << p.duration << " s, peak " << p.peak_speed << " deg/s; splits 20/4+25 and 9+16+66/16 "
           << (ng_ok && led_ok ? "exact" : "wrong");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "sensor window equations", 1.0, window_equations},
      {2, "saturation guard", 60.0, saturation_guard},
      {3, "glint-limbus ridge", 300.0, glint_ridge},
      {4, "GPR exact interpolation", 1.0, gpr_interpolation},
      {5, "MLP gradients", 60.0, mlp_gradients},
      {6, "end-to-end photodiode loop", 900.0, [](Outcome& o) { end_to_end(o, Mode::NextGaze); }},
      {7, "end-to-end duplexed LED loop", 900.0, [](Outcome& o) { end_to_end(o, Mode::Led2Gaze); }},
      {8, "timing and power", 1.0, timing_power},
      {9, "filter suite", 1.0, filters},
      {10, "protocol fidelity", 1.0, protocol_fidelity},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < c.budget, "runtime budget");
    std::printf("%s criterion %d (%s): %s; %.2f s of %.0f s\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.str().c_str(), secs, c.budget);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
