#include "sparsegaze/io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>

using namespace sparsegaze;
namespace fs = std::filesystem;

namespace {

// Bad flags or configuration; exits with status 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SweepConfig {
  int resolution = 128;
  SweepAxis h;
  SweepAxis v;
};

struct RunConfig {
  SceneFile scene;
  std::string scene_path;
  SynthConfig synth;
  PreprocessConfig preprocess;
  TrainConfig train;
  std::optional<int> pca_components;
  Led2GazeConfig led2gaze;
  EvalOptions eval;
  SweepConfig sweep;
};

SweepAxis axis_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw UsageError("sweep axes are [start, stop, step]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json axis_json(const SweepAxis& a) { return Json::array({a.start, a.stop, a.step}); }

RunConfig load_config(const std::string& path) {
  RunConfig c;
  if (path.empty()) return c;
  const Json j = read_json(path);
  if (!j.is_object()) throw UsageError(path + ": expected a JSON object");
  for (const auto& item : j.items()) {
    const std::string& k = item.key();
    const Json& v = item.value();
    if (k == "scene") {
      if (v.is_string()) {
        c.scene_path = (fs::path(path).parent_path() / v.get<std::string>()).string();
        c.scene = scene_from_json(read_json(c.scene_path));
      } else {
        c.scene = scene_from_json(v);
      }
    } else if (k == "synth") {
      from_json(v, c.synth);
    } else if (k == "preprocess") {
      from_json(v, c.preprocess);
      c.led2gaze.preprocess = c.preprocess;
    } else if (k == "train") {
      from_json(v, c.train);
    } else if (k == "pca_components") {
      if (!v.is_null()) c.pca_components = v.get<int>();
    } else if (k == "led2gaze") {
      from_json(v, c.led2gaze);
    } else if (k == "eval") {
      c.eval.ewma_alpha = v.value("ewma_alpha", c.eval.ewma_alpha);
      c.eval.smoothed = v.value("smoothed", c.eval.smoothed);
    } else if (k == "sweep") {
      c.sweep.resolution = v.value("resolution", c.sweep.resolution);
      if (v.contains("h")) c.sweep.h = axis_from(v.at("h"));
      if (v.contains("v")) c.sweep.v = axis_from(v.at("v"));
    } else {
      throw UsageError(path + ": unknown key '" + k + "'");
    }
  }
  return c;
}

Json effective(const RunConfig& c) {
  return {{"scene", to_json(c.scene)},
          {"synth", to_json(c.synth)},
          {"preprocess", to_json(c.preprocess)},
          {"train", to_json(c.train)},
          {"pca_components", c.pca_components ? Json(*c.pca_components) : Json()},
          {"led2gaze", to_json(c.led2gaze)},
          {"eval", {{"ewma_alpha", c.eval.ewma_alpha}, {"smoothed", c.eval.smoothed}}},
          {"sweep",
           {{"resolution", c.sweep.resolution}, {"h", axis_json(c.sweep.h)}, {"v", axis_json(c.sweep.v)}}}};
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

struct Context {
  RunConfig config;
  fs::path out;
  std::string hash;
  std::uint64_t seed = 0;

  Json stamp() const { return {{"config_hash", hash}, {"seed", seed}}; }
  std::string comment() const { return "config_hash=" + hash + " seed=" + std::to_string(seed); }
};

EyeScene scene_of(const RunConfig& c) { return build_scene(c.scene.geometry, c.scene.materials); }

void progress_line(std::size_t done, std::size_t total) {
  std::fprintf(stderr, "\r  %zu/%zu units", done, total);
  if (done == total) std::fprintf(stderr, "\n");
}

// ------------------------------------------------------------- commands

int cmd_sweep(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const EyeScene scene = scene_of(c);
  SweepRig rig = default_sweep_rig(scene, c.sweep.resolution);
  if (!c.scene.sensors.empty()) {
    Camera cam = c.scene.sensors.front();
    cam.resolution = c.sweep.resolution;
    rig.sensor = Sensor::make(0, cam);
  }
  if (!c.scene.emitters.empty()) rig.emitter = c.scene.emitters.front();
  const SweepMap map =
      sweep_gaze(scene, EyeState{}, rig.sensor, rig.emitter, c.sweep.h, c.sweep.v, c.synth.render);
  const auto mask = ridge_mask(map);
  const RidgeSummary ridge = summarize_ridge(map, mask);
  write_text(ctx.out / "sweep.csv", sweep_csv(map, ctx.comment()));
  write_text(ctx.out / "sweep.pgm", sweep_pgm(map, ctx.comment()));
  Json j = ctx.stamp();
  j["ridge"] = {{"cells", ridge.cells},
                {"components", ridge.components},
                {"closed", ridge.closed},
                {"peak", {ridge.peak_h, ridge.peak_v}}};
  j["sensor"] = to_json(rig.sensor.camera);
  j["emitter"] = to_json(rig.emitter);
  write_text(ctx.out / "sweep.json", j.dump(2) + "\n");
  std::printf("ridge cells %d, components %d, closed %s", ridge.cells, ridge.components,
              ridge.closed ? "yes" : "no");
  if (ridge.cells > 0) std::printf(", peak at (%.1f, %.1f) deg", ridge.peak_h, ridge.peak_v);
  std::printf("\nwrote %s\n", (ctx.out / "sweep.{csv,pgm,json}").string().c_str());
  return 0;
}

int cmd_synth(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const EyeScene scene = scene_of(c);
  std::fprintf(stderr, "synthesizing %s protocol at %.0f Hz\n",
               std::string(to_string(c.synth.mode)).c_str(), c.synth.sample_rate);
  Rig rig = make_rig(c.synth.mode, scene, c.synth.rig);
  calibrate_intensity(rig, scene, mode_figures(c.synth.mode).fov, c.synth.probe_points,
                      c.synth.exposure_target, c.synth.render);
  if (rig.mode == Mode::Led2Gaze)
    calibrate_discharge_gain(rig, scene, c.synth.centre_discharge, c.synth.render);
  GazeDataset ds = synthesize(scene, rig, c.synth, progress_line);
  ds.config_hash = ctx.hash;
  write_dataset(ctx.out, ds, effective(c), timestamp());
  Json r = to_json(rig);
  r.update(ctx.stamp());
  write_text(ctx.out / "rig.json", r.dump(2) + "\n");
  std::printf("pursuit %zu train / %zu test, grid %zu train / %zu test, random %zu train\n",
              ds.count(UnitKind::Pursuit, SegmentRole::Train), ds.count(UnitKind::Pursuit, SegmentRole::Test),
              ds.count(UnitKind::Grid, SegmentRole::Train), ds.count(UnitKind::Grid, SegmentRole::Test),
              ds.count(UnitKind::Random, SegmentRole::Train));
  std::printf("%ld samples, %ld channels; wrote %s\n", static_cast<long>(ds.sample_count()),
              static_cast<long>(ds.channels()), ctx.out.string().c_str());
  return 0;
}

int cmd_train(const Context& ctx, const std::string& dataset_dir, std::string model_path) {
  const RunConfig& c = ctx.config;
  const GazeDataset ds = read_dataset(dataset_dir.empty() ? ctx.out : fs::path(dataset_dir));
  if (model_path.empty()) model_path = (ctx.out / "model.json").string();
  Json j;
  if (ds.mode == Mode::NextGaze) {
    const NextGazeFit fit = train_nextgaze(ds, c.preprocess, c.train, c.pca_components);
    j = model_to_json(fit.model);
    j["training"] = {{"samples", fit.samples},
                     {"epochs", fit.training.epochs},
                     {"rejected_epochs", fit.training.rejected_epochs},
                     {"final_rate", fit.training.final_rate},
                     {"final_loss", fit.training.loss_trace.back()}};
    std::string trace = "# " + ctx.comment() + "\nepoch,loss\n";
    for (std::size_t i = 0; i < fit.training.loss_trace.size(); ++i) {
      char line[64];
      std::snprintf(line, sizeof line, "%zu,%.17g\n", i, fit.training.loss_trace[i]);
      trace += line;
    }
    write_text(fs::path(model_path).replace_filename("loss_trace.csv"), trace);
    std::printf("trained MLP on %ld samples: %d epochs (%d rejected), loss %.4g -> %.4g\n",
                static_cast<long>(fit.samples), fit.training.epochs, fit.training.rejected_epochs,
                fit.training.loss_trace.front(), fit.training.loss_trace.back());
  } else {
    const Led2GazeModel m = train_led2gaze(ds, c.led2gaze);
    j = model_to_json(m);
    std::printf("fitted GPR on %ld calibration vectors (length scale %.4g)\n",
                static_cast<long>(m.gpr.size()), m.gpr.params.length_scale);
  }
  j.update(ctx.stamp());
  j["dataset_hash"] = ds.config_hash;
  write_text(model_path, j.dump(2) + "\n");
  std::printf("wrote %s\n", model_path.c_str());
  return 0;
}

int cmd_eval(const Context& ctx, std::string model_path, const std::string& dataset_dir) {
  if (model_path.empty()) model_path = (ctx.out / "model.json").string();
  const GazeModel model = model_from_json(read_json(model_path));
  const GazeDataset ds = read_dataset(dataset_dir.empty() ? ctx.out : fs::path(dataset_dir));
  const EvalReport report = evaluate_model(model, ds, ctx.config.eval);
  Json j = to_json(report);
  j.update(ctx.stamp());
  j["dataset_hash"] = ds.config_hash;
  write_text(ctx.out / "report.json", j.dump(2) + "\n");
  const std::string table = report_table(report);
  write_text(ctx.out / "report.txt", "# " + ctx.comment() + "\n" + table);
  std::fputs(table.c_str(), stdout);
  return 0;
}

int cmd_report(const std::string& input, bool smoothed) {
  const Json j = read_json(input);
  if (j.value("schema", "") != kReportSchema) throw UsageError(input + " is not a report file");
  EvalReport r;
  r.mode = mode_from_string(j.at("mode").get<std::string>());
  r.ewma_alpha = j.at("ewma_alpha").get<double>();
  r.smoothed = smoothed || j.value("headline", "raw") == "smoothed";
  r.masked = j.value("masked_samples", Eigen::Index{0});
  const auto stats = [](const Json& s) {
    ErrorStats e;
    e.mean = s.at("mean").get<double>();
    e.median = s.at("median").get<double>();
    e.stddev = s.at("stddev").get<double>();
    e.min = s.at("min").get<double>();
    e.max = s.at("max").get<double>();
    e.count = s.at("count").get<Eigen::Index>();
    return e;
  };
  for (const Json& s : j.at("subsets")) {
    SubsetReport sub;
    sub.name = s.at("name").get<std::string>();
    sub.raw = stats(s.at("raw"));
    sub.smoothed = stats(s.at("smoothed"));
    const Json& ref = s.at("reference");
    if (ref.contains("mean")) sub.reference.mean = ref.at("mean").get<double>();
    if (ref.contains("median")) sub.reference.median = ref.at("median").get<double>();
    if (ref.contains("stddev")) sub.reference.stddev = ref.at("stddev").get<double>();
    r.subsets.push_back(sub);
  }
  std::fputs(report_table(r).c_str(), stdout);
  for (const SubsetReport& s : r.subsets) {
    const ErrorStats& e = r.smoothed ? s.smoothed : s.raw;
    if (s.reference.mean)
      std::printf("%-10s mean %.3f vs reference %.2f: %s\n", s.name.c_str(), e.mean, *s.reference.mean,
                  e.mean < *s.reference.mean ? "below" : "above");
  }
  return 0;
}

int cmd_render(const Context& ctx, double h, double v, int sensor, bool expose) {
  const RunConfig& c = ctx.config;
  const EyeScene scene = scene_of(c);
  const Rig rig = make_rig(c.synth.mode, scene, c.synth.rig);
  if (sensor < 0 || static_cast<std::size_t>(sensor) >= rig.sensors.size())
    throw UsageError("sensor index out of range for the " + std::string(to_string(c.synth.mode)) + " rig");
  EyeState state;
  state.gaze_h = h;
  state.gaze_v = v;
  const PosedScene posed(scene, state);
  std::vector<Emitter> lit;
  for (int e : rig.active[static_cast<std::size_t>(sensor)]) lit.push_back(rig.emitters[static_cast<std::size_t>(e)]);
  const Camera& cam = rig.sensors[static_cast<std::size_t>(sensor)].camera;
  double scale = 1.0;
  if (expose) {
    const Exposure ex = auto_expose(posed, cam, lit, c.synth.render);
    scale = ex.scale;
    lit = ex.emitters;
  }
  const RadianceImage image = render(posed, cam, lit, c.synth.render);
  Json meta = ctx.stamp();
  meta["gaze"] = {h, v};
  meta["sensor"] = sensor;
  meta["intensity_scale"] = scale;
  write_image(ctx.out / "render.pgm", image, meta);
  std::printf("peak %.6g%s; wrote %s\n", image.max_value, image.saturated ? " (saturated)" : "",
              (ctx.out / "render.pgm").string().c_str());
  return 0;
}

int cmd_schedule(const Context& ctx, double rate) {
  const Mode mode = ctx.config.synth.mode;
  Schedule s;
  Json j = ctx.stamp();
  if (mode == Mode::NextGaze) {
    using namespace prototype;
    s = plan_pulsed(kPdEmitters, kPdPulsesPerEmitter, kPdPulseOn, kPdPulsePeriod, rate > 0 ? rate : kPdRate);
    const std::vector<DrivePoint> drive(kPdEmitters, {kPdLedVoltage, kPdLedCurrent});
    const double led = power_estimate(s, drive);
    j["power"] = {{"led_average", led}, {"front_end", kPdFrontEndBaseline}, {"total", led + kPdFrontEndBaseline}};
    std::printf("%.1f Hz, active %.1f us, LED average %.4f mW, total %.3f mW\n", s.frame_rate(),
                s.active_time() * 1e6, led * 1e3, (led + kPdFrontEndBaseline) * 1e3);
  } else {
    using namespace prototype;
    const double r = rate > 0 ? rate : kLedRate;
    s = plan_round_robin(kLedCount, 1.0 / (r * kLedCount));
    j["power"] = {{"system", kLedSystemPower}};
    std::printf("%.1f Hz, %d sense slots of %.1f us, system power %.0f mW (declared)\n", s.frame_rate(),
                kLedCount, s.slots.front().duration * 1e6, kLedSystemPower * 1e3);
  }
  j["mode"] = std::string(to_string(mode));
  j["schedule"] = to_json(s);
  write_text(ctx.out / "schedule.json", j.dump(2) + "\n");
  return 0;
}

int cmd_scene(const Context& ctx) {
  write_text(ctx.out / "scene.json", to_json(ctx.config.scene).dump(2) + "\n");
  std::printf("wrote %s\n", (ctx.out / "scene.json").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse single-pixel gaze tracker simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "seed for protocol, blinks, noise and training");
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--mode", mode, "protocol mode")->check(CLI::IsMember({"nextgaze", "led2gaze"}));

  auto* sweep = app.add_subcommand("sweep", "single-detector transfer map over gaze");
  std::optional<double> specular;
  std::optional<int> resolution;
  sweep->add_option("--specular", specular, "corneal specular coefficient override");
  sweep->add_option("--resolution", resolution, "render resolution");

  auto* synth = app.add_subcommand("synth", "simulate a calibration dataset");
  std::optional<double> rate, noise;
  synth->add_option("--rate", rate, "sample rate in Hz");
  synth->add_option("--noise", noise, "relative reading noise");

  auto* train = app.add_subcommand("train", "fit the mode's estimator on a dataset");
  std::string dataset, model;
  train->add_option("--dataset", dataset, "dataset directory (default: --out)");
  train->add_option("--model", model, "model file (default: <out>/model.json)");

  auto* eval = app.add_subcommand("eval", "per-frame test error of a model");
  std::optional<double> alpha;
  bool smoothed = false;
  eval->add_option("--model", model, "model file (default: <out>/model.json)");
  eval->add_option("--dataset", dataset, "dataset directory (default: --out)");
  eval->add_option("--ewma-alpha", alpha, "EWMA smoothing factor")->check(CLI::Range(1e-9, 1.0));
  eval->add_flag("--smoothed", smoothed, "headline figures from the EWMA series");

  auto* report = app.add_subcommand("report", "print a report file next to the reference figures");
  std::string report_path;
  report->add_option("--input", report_path, "report.json (default: <out>/report.json)");
  report->add_flag("--smoothed", smoothed, "compare the EWMA series");

  auto* rend = app.add_subcommand("render", "render one sensor view to PGM");
  double gaze_h = 0.0, gaze_v = 0.0;
  int sensor = 0;
  bool expose = false;
  rend->add_option("--gaze-h", gaze_h, "horizontal gaze, deg");
  rend->add_option("--gaze-v", gaze_v, "vertical gaze, deg");
  rend->add_option("--sensor", sensor, "sensor index in the mode's rig");
  rend->add_flag("--expose", expose, "scale emitters with auto exposure first");

  auto* sched = app.add_subcommand("schedule", "sampling schedule and power figures");
  double sched_rate = 0.0;
  sched->add_option("--rate", sched_rate, "target frame rate in Hz");

  auto* scene_cmd = app.add_subcommand("scene", "write the effective scene description");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    Context ctx;
    ctx.config = load_config(config_path);
    RunConfig& c = ctx.config;
    if (mode) {
      const Mode m = mode_from_string(*mode);
      if (m != c.synth.mode) c.synth.rig = SynthConfig::defaults(m).rig;
      c.synth.mode = m;
    }
    if (seed) {
      c.synth.seed = *seed;
      c.train.seed = *seed;
    }
    if (specular) c.scene.materials.cornea.specular_coefficient = *specular;
    if (resolution) c.sweep.resolution = *resolution;
    if (rate) c.synth.sample_rate = *rate;
    if (noise) c.synth.noise = *noise;
    if (alpha) c.eval.ewma_alpha = *alpha;
    if (smoothed) c.eval.smoothed = true;
    c.synth.validate();
    c.preprocess.validate();
    c.train.validate();
    ctx.out = out;
    ctx.seed = c.synth.seed;
    ctx.hash = config_hash(effective(c));

    if (*sweep) return cmd_sweep(ctx);
    if (*synth) return cmd_synth(ctx);
    if (*train) return cmd_train(ctx, dataset, model);
    if (*eval) return cmd_eval(ctx, model, dataset);
    if (*report) return cmd_report(report_path.empty() ? (ctx.out / "report.json").string() : report_path, smoothed);
    if (*rend) return cmd_render(ctx, gaze_h, gaze_v, sensor, expose);
    if (*sched) return cmd_schedule(ctx, sched_rate);
    if (*scene_cmd) return cmd_scene(ctx);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
