#include "sparsegaze/io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace sparsegaze {

namespace fs = std::filesystem;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const Json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

void from_json(const Json& j, Material& m);
void from_json(const Json& j, ExposurePolicy& p);
void from_json(const Json& j, GprOptions& o);

namespace {

Json vec(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json mat(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(Eigen::VectorXd(m.row(r).transpose())));
  return a;
}

Vec3 to_vec3(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidArgument("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::VectorXd to_vector(const Json& j) {
  if (!j.is_array()) throw InvalidArgument("expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Eigen::MatrixXd to_matrix(const Json& j, Eigen::Index cols = -1) {
  if (!j.is_array()) throw InvalidArgument("expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows > 0) cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, std::max<Eigen::Index>(cols, 0));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = to_vector(j[static_cast<std::size_t>(r)]);
    if (row.size() != m.cols()) throw InvalidArgument("ragged matrix rows");
    m.row(r) = row.transpose();
  }
  return m;
}

// Reads optional keys into existing values and rejects unknown ones.
class Reader {
public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw InvalidArgument(where_ + ": expected an object");
  }

  template <typename T>
  void operator()(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, Vec3>) {
        out = to_vec3(*it);
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        out = it->template get<std::uint64_t>();
      } else if constexpr (std::is_class_v<T> && !std::is_same_v<T, std::string> &&
                           !std::is_same_v<T, std::vector<int>>) {
        from_json(*it, out);
      } else {
        out = it->template get<T>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(where_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw InvalidArgument(where_ + ": unknown key '" + item.key() + "'");
  }

private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Json to_json(const Material& m) {
  return {{"diffuse_albedo", m.diffuse_albedo}, {"specular_coefficient", m.specular_coefficient}};
}

Json to_json(const ExposurePolicy& p) {
  return {{"saturation_fraction", p.saturation_fraction},
          {"underexposure_fraction", p.underexposure_fraction},
          {"growth", p.growth}};
}

Json to_json(const GprOptions& o) {
  return {{"jitter", o.jitter}, {"escalate", o.escalate}, {"min_rcond", o.min_rcond}};
}

Json scaler_json(const Scaler& s) {
  Json d = Json::array();
  for (bool b : s.degenerate) d.push_back(b);
  return {{"min", vec(s.min)}, {"max", vec(s.max)}, {"degenerate", d}};
}

Scaler scaler_from(const Json& j) {
  Scaler s;
  s.min = to_vector(j.at("min"));
  s.max = to_vector(j.at("max"));
  for (const auto& b : j.at("degenerate")) s.degenerate.push_back(b.get<bool>());
  if (s.max.size() != s.min.size() || s.degenerate.size() != static_cast<std::size_t>(s.min.size()))
    throw InvalidArgument("scaler fields differ in length");
  return s;
}

}  // namespace

// ------------------------------------------------------------ config types

void from_json(const Json& j, Material& m) {
  Reader r(j, "material");
  r("diffuse_albedo", m.diffuse_albedo);
  r("specular_coefficient", m.specular_coefficient);
  r.finish();
}

void from_json(const Json& j, ExposurePolicy& p) {
  Reader r(j, "exposure_policy");
  r("saturation_fraction", p.saturation_fraction);
  r("underexposure_fraction", p.underexposure_fraction);
  r("growth", p.growth);
  r.finish();
}

void from_json(const Json& j, GprOptions& o) {
  Reader r(j, "gpr");
  r("jitter", o.jitter);
  r("escalate", o.escalate);
  r("min_rcond", o.min_rcond);
  r.finish();
}


Json to_json(const EyeGeometry& g) {
  return {{"eyeball_center", vec(g.eyeball_center)},
          {"eyeball_radius", g.eyeball_radius},
          {"cornea_center_offset", g.cornea_center_offset},
          {"cornea_radius", g.cornea_radius},
          {"iris_radius", g.iris_radius},
          {"limbal_blend", g.limbal_blend},
          {"face_radius", g.face_radius},
          {"face_extent", g.face_extent},
          {"canthus", g.canthus},
          {"upper_lid", g.upper_lid},
          {"lower_lid", g.lower_lid},
          {"lid_closure", g.lid_closure}};
}

void from_json(const Json& j, EyeGeometry& g) {
  Reader r(j, "geometry");
  r("eyeball_center", g.eyeball_center);
  r("eyeball_radius", g.eyeball_radius);
  r("cornea_center_offset", g.cornea_center_offset);
  r("cornea_radius", g.cornea_radius);
  r("iris_radius", g.iris_radius);
  r("limbal_blend", g.limbal_blend);
  r("face_radius", g.face_radius);
  r("face_extent", g.face_extent);
  r("canthus", g.canthus);
  r("upper_lid", g.upper_lid);
  r("lower_lid", g.lower_lid);
  r("lid_closure", g.lid_closure);
  r.finish();
}

Json to_json(const Materials& m) {
  Json j;
  for (Region region : {Region::Cornea, Region::Iris, Region::Pupil, Region::Sclera, Region::Skin,
                        Region::Eyelid})
    j[std::string(to_string(region))] = to_json(m[region]);
  return j;
}

void from_json(const Json& j, Materials& m) {
  if (!j.is_object()) throw InvalidArgument("materials: expected an object");
  for (const auto& item : j.items()) from_json(item.value(), m[region_from_string(item.key())]);
}

Json to_json(const RenderSettings& s) {
  return {{"specular_exponent", s.specular_exponent},
          {"specular_supersampling", s.specular_supersampling},
          {"lobe_tolerance", s.lobe_tolerance},
          {"lobe_floor", s.lobe_floor},
          {"max_refinement_depth", s.max_refinement_depth}};
}

void from_json(const Json& j, RenderSettings& s) {
  Reader r(j, "render");
  r("specular_exponent", s.specular_exponent);
  r("specular_supersampling", s.specular_supersampling);
  r("lobe_tolerance", s.lobe_tolerance);
  r("lobe_floor", s.lobe_floor);
  r("max_refinement_depth", s.max_refinement_depth);
  r.finish();
}

Json to_json(const Camera& c) {
  return {{"position", vec(c.position)}, {"forward", vec(c.forward)}, {"up", vec(c.up)},
          {"fov", c.fov},               {"resolution", c.resolution}};
}

Json to_json(const Emitter& e) {
  return {{"position", vec(e.position)},
          {"radiant_intensity", e.radiant_intensity},
          {"cone_axis", vec(e.cone_axis)},
          {"cone_angle", e.cone_angle},
          {"wavelength", e.wavelength}};
}

Json to_json(const LedElectrical& l) {
  return {{"forward_voltage", l.forward_voltage},
          {"reverse_voltage", l.reverse_voltage},
          {"emission_wavelength", l.emission_wavelength},
          {"sensing_wavelength", l.sensing_wavelength},
          {"exposure", l.exposure},
          {"max_exposure", l.max_exposure},
          {"discharge_gain", l.discharge_gain},
          {"drive_current", l.drive_current},
          {"cone_angle", l.cone_angle}};
}

Json to_json(const RigConfig& c) {
  return {{"resolution", c.resolution},   {"distance", c.distance},
          {"ring_polar", c.ring_polar},   {"camera_fov", c.camera_fov},
          {"acceptance", c.acceptance},   {"emitter_azimuth", c.emitter_azimuth},
          {"intensity", c.intensity}};
}

void from_json(const Json& j, RigConfig& c) {
  Reader r(j, "rig");
  r("resolution", c.resolution);
  r("distance", c.distance);
  r("ring_polar", c.ring_polar);
  r("camera_fov", c.camera_fov);
  r("acceptance", c.acceptance);
  r("emitter_azimuth", c.emitter_azimuth);
  r("intensity", c.intensity);
  r.finish();
}

Json to_json(const BlinkConfig& c) {
  return {{"enabled", c.enabled}, {"mean_interval", c.mean_interval}, {"min_interval", c.min_interval},
          {"close", c.close},     {"hold", c.hold},                   {"open", c.open}};
}

void from_json(const Json& j, BlinkConfig& c) {
  Reader r(j, "blinks");
  r("enabled", c.enabled);
  r("mean_interval", c.mean_interval);
  r("min_interval", c.min_interval);
  r("close", c.close);
  r("hold", c.hold);
  r("open", c.open);
  r.finish();
}

Json to_json(const SynthConfig& c) {
  return {{"mode", std::string(to_string(c.mode))},
          {"seed", c.seed},
          {"sample_rate", c.sample_rate},
          {"dwell", c.dwell},
          {"settle", c.settle},
          {"noise", c.noise},
          {"blinks", to_json(c.blinks)},
          {"render", to_json(c.render)},
          {"rig", to_json(c.rig)},
          {"exposure_target", c.exposure_target},
          {"probe_points", c.probe_points},
          {"centre_discharge", c.centre_discharge},
          {"exposure_policy", to_json(c.exposure_policy)}};
}

void from_json(const Json& j, SynthConfig& c) {
  if (j.is_object() && j.contains("mode")) {
    const Mode m = mode_from_string(j.at("mode").get<std::string>());
    if (m != c.mode) c.rig = SynthConfig::defaults(m).rig;
    c.mode = m;
  }
  Reader r(j, "synth");
  std::string mode;
  r("mode", mode);
  r("seed", c.seed);
  r("sample_rate", c.sample_rate);
  r("dwell", c.dwell);
  r("settle", c.settle);
  r("noise", c.noise);
  r("blinks", c.blinks);
  r("render", c.render);
  r("rig", c.rig);
  r("exposure_target", c.exposure_target);
  r("probe_points", c.probe_points);
  r("centre_discharge", c.centre_discharge);
  r("exposure_policy", c.exposure_policy);
  r.finish();
}

Json to_json(const PreprocessConfig& c) {
  return {{"sg_window", c.sg_window},       {"sg_order", c.sg_order},
          {"blink_factor", c.blink_factor}, {"blink_floor", c.blink_floor},
          {"blink_margin", c.blink_margin}, {"downsample", c.downsample}};
}

void from_json(const Json& j, PreprocessConfig& c) {
  Reader r(j, "preprocess");
  r("sg_window", c.sg_window);
  r("sg_order", c.sg_order);
  r("blink_factor", c.blink_factor);
  r("blink_floor", c.blink_floor);
  r("blink_margin", c.blink_margin);
  r("downsample", c.downsample);
  r.finish();
}

Json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"learning_rate", c.learning_rate},
          {"shrink", c.shrink},
          {"patience", c.patience},
          {"min_improvement", c.min_improvement},
          {"min_rate", c.min_rate},
          {"accept_tolerance", c.accept_tolerance},
          {"seed", c.seed},
          {"hidden", c.hidden}};
}

void from_json(const Json& j, TrainConfig& c) {
  Reader r(j, "train");
  r("batch_size", c.batch_size);
  r("max_epochs", c.max_epochs);
  r("learning_rate", c.learning_rate);
  r("shrink", c.shrink);
  r("patience", c.patience);
  r("min_improvement", c.min_improvement);
  r("min_rate", c.min_rate);
  r("accept_tolerance", c.accept_tolerance);
  r("seed", c.seed);
  r("hidden", c.hidden);
  r.finish();
}

Json to_json(const KernelParams& p) {
  return {{"distance", std::string(to_string(p.distance))},
          {"minkowski_order", p.minkowski_order},
          {"length_scale", p.length_scale}};
}

void from_json(const Json& j, KernelParams& p) {
  Reader r(j, "kernel");
  std::string d(to_string(p.distance));
  r("distance", d);
  p.distance = distance_from_string(d);
  r("minkowski_order", p.minkowski_order);
  r("length_scale", p.length_scale);
  r.finish();
}

Json to_json(const Led2GazeConfig& c) {
  return {{"preprocess", to_json(c.preprocess)},
          {"pursuit_points", c.pursuit_points},
          {"pursuit_window", c.pursuit_window},
          {"kernel", to_json(c.kernel)},
          {"gpr", to_json(c.gpr)}};
}

void from_json(const Json& j, Led2GazeConfig& c) {
  Reader r(j, "led2gaze");
  r("preprocess", c.preprocess);
  r("pursuit_points", c.pursuit_points);
  r("pursuit_window", c.pursuit_window);
  r("kernel", c.kernel);
  r("gpr", c.gpr);
  r.finish();
}

Json to_json(const Schedule& s) {
  Json slots = Json::array();
  double start = 0.0;
  for (const Slot& slot : s.slots) {
    slots.push_back({{"start", start},
                     {"role", std::string(to_string(slot.role))},
                     {"device", slot.device},
                     {"duration", slot.duration},
                     {"partners", slot.partners}});
    start += slot.duration;
  }
  return {{"frame_period", s.frame_period},
          {"frame_rate", s.frame_rate()},
          {"pulses_per_emitter", s.pulses_per_emitter},
          {"active_time", s.active_time()},
          {"busy_time", s.busy_time()},
          {"slots", slots}};
}

Json to_json(const Rig& rig) {
  Json sensors = Json::array(), emitters = Json::array(), leds = Json::array();
  for (const Sensor& s : rig.sensors)
    sensors.push_back({{"id", s.id}, {"camera", to_json(s.camera)}, {"sigma", s.window.sigma}});
  for (const Emitter& e : rig.emitters) emitters.push_back(to_json(e));
  for (const LedElectrical& l : rig.leds) leds.push_back(to_json(l));
  Json j = {{"mode", std::string(to_string(rig.mode))},
            {"sensors", sensors},
            {"emitters", emitters},
            {"active", rig.active}};
  if (!rig.leds.empty()) j["leds"] = leds;
  return j;
}

Json to_json(const ErrorStats& s, bool with_errors) {
  Json j = {{"mean", s.mean},     {"median", s.median}, {"stddev", s.stddev},
            {"min", s.min},       {"max", s.max},       {"count", s.count}};
  if (with_errors) j["errors"] = vec(s.errors);
  return j;
}

Json to_json(const EvalReport& r) {
  Json subsets = Json::array();
  for (const SubsetReport& s : r.subsets) {
    Json ref = Json::object();
    if (s.reference.mean) ref["mean"] = *s.reference.mean;
    if (s.reference.median) ref["median"] = *s.reference.median;
    if (s.reference.stddev) ref["stddev"] = *s.reference.stddev;
    subsets.push_back({{"name", s.name},
                       {"raw", to_json(s.raw)},
                       {"smoothed", to_json(s.smoothed)},
                       {"reference", ref}});
  }
  return {{"schema", kReportSchema},
          {"mode", std::string(to_string(r.mode))},
          {"ewma_alpha", r.ewma_alpha},
          {"headline", r.smoothed ? "smoothed" : "raw"},
          {"masked_samples", r.masked},
          {"subsets", subsets}};
}

// ------------------------------------------------------------------ scenes

Json to_json(const SceneFile& s) {
  Json sensors = Json::array(), emitters = Json::array();
  for (const Camera& c : s.sensors) sensors.push_back(to_json(c));
  for (const Emitter& e : s.emitters) emitters.push_back(to_json(e));
  return {{"schema", kSceneSchema},
          {"geometry", to_json(s.geometry)},
          {"materials", to_json(s.materials)},
          {"sensors", sensors},
          {"emitters", emitters}};
}

SceneFile scene_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("schema") || j.at("schema") != kSceneSchema)
    throw InvalidArgument("scene file must declare schema \"" + std::string(kSceneSchema) + "\"");
  SceneFile s;
  for (const auto& item : j.items()) {
    const std::string& k = item.key();
    const Json& v = item.value();
    if (k == "schema") continue;
    if (k == "geometry") {
      from_json(v, s.geometry);
    } else if (k == "materials") {
      from_json(v, s.materials);
    } else if (k == "sensors") {
      for (const Json& c : v) {
        Camera cam = Camera::looking_at(to_vec3(c.at("position")),
                                        to_vec3(c.at("position")) + to_vec3(c.at("forward")),
                                        c.value("fov", 50.0), c.value("resolution", 128),
                                        c.contains("up") ? to_vec3(c.at("up")) : Vec3::UnitY());
        s.sensors.push_back(cam);
      }
    } else if (k == "emitters") {
      for (const Json& e : v) {
        Emitter em;
        em.position = to_vec3(e.at("position"));
        em.radiant_intensity = e.value("radiant_intensity", 1.0);
        em.cone_axis = e.contains("cone_axis") ? to_vec3(e.at("cone_axis")).normalized() : em.cone_axis;
        em.cone_angle = e.value("cone_angle", 120.0);
        em.wavelength = e.value("wavelength", 940.0);
        em.validate();
        s.emitters.push_back(em);
      }
    } else {
      throw InvalidArgument("scene: unknown key '" + k + "'");
    }
  }
  s.geometry.validate();
  s.materials.validate();
  return s;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("failed writing " + path.string());
}

// ---------------------------------------------------------------- datasets

DatasetFiles dataset_paths(const fs::path& dir) {
  return {dir / "manifest.json", dir / "samples.jsonl"};
}

Json dataset_manifest(const GazeDataset& ds, const Json& config) {
  Json units = Json::array();
  for (const DatasetUnit& u : ds.units)
    units.push_back({{"segment", u.data.id},
                     {"kind", std::string(to_string(u.kind))},
                     {"index", u.index},
                     {"session", u.session},
                     {"role", std::string(to_string(u.role()))},
                     {"settle", u.settle},
                     {"degraded", u.degraded},
                     {"samples", u.size()}});
  Json counts = Json::object();
  for (SegmentRole role : {SegmentRole::Train, SegmentRole::Test})
    for (UnitKind kind : {UnitKind::Pursuit, UnitKind::Grid, UnitKind::Random})
      counts[std::string(to_string(role))][std::string(to_string(kind))] = ds.count(kind, role);
  return {{"schema", kDatasetSchema},
          {"mode", std::string(to_string(ds.mode))},
          {"seed", ds.seed},
          {"config_hash", ds.config_hash},
          {"created", ""},
          {"sample_rate", ds.sample_rate},
          {"sensor_ids", ds.sensor_ids},
          {"samples", ds.sample_count()},
          {"counts", counts},
          {"config", config},
          {"units", units}};
}

std::string dataset_jsonl(const GazeDataset& ds) {
  std::string out;
  for (const DatasetUnit& u : ds.units) {
    const std::string role(to_string(u.role()));
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      Json line = {{"t", u.data.t(i)},
                   {"readings", vec(Eigen::VectorXd(u.data.readings.row(i).transpose()))},
                   {"gaze", Json::array({u.data.gaze(i, 0), u.data.gaze(i, 1)})},
                   {"segment", u.data.id},
                   {"role", role},
                   {"masked", i < u.settle},
                   {"blink", static_cast<bool>(u.blink[static_cast<std::size_t>(i)])}};
      out += line.dump();
      out += '\n';
    }
  }
  return out;
}

void write_dataset(const fs::path& dir, const GazeDataset& ds, const Json& config,
                   const std::string& created) {
  const DatasetFiles files = dataset_paths(dir);
  Json manifest = dataset_manifest(ds, config);
  manifest["created"] = created;
  write_text(files.manifest, manifest.dump(2) + "\n");
  write_text(files.samples, dataset_jsonl(ds));
}

GazeDataset read_dataset(const fs::path& dir) {
  const DatasetFiles files = dataset_paths(dir);
  const Json m = read_json(files.manifest);
  if (m.value("schema", "") != kDatasetSchema)
    throw InvalidArgument(files.manifest.string() + " is not a dataset manifest");
  GazeDataset ds;
  try {
    ds.mode = mode_from_string(m.at("mode").get<std::string>());
    ds.seed = m.at("seed").get<std::uint64_t>();
    ds.config_hash = m.at("config_hash").get<std::string>();
    ds.sample_rate = m.at("sample_rate").get<double>();
    ds.sensor_ids = m.at("sensor_ids").get<std::vector<int>>();
    for (const Json& uj : m.at("units")) {
      DatasetUnit u;
      u.data.id = uj.at("segment").get<int>();
      u.kind = unit_kind_from_string(uj.at("kind").get<std::string>());
      u.index = uj.at("index").get<int>();
      u.session = uj.at("session").get<int>();
      u.data.role = segment_role_from_string(uj.at("role").get<std::string>());
      u.settle = uj.at("settle").get<Eigen::Index>();
      u.degraded = uj.at("degraded").get<bool>();
      const auto n = uj.at("samples").get<Eigen::Index>();
      u.data.t.resize(n);
      u.data.readings.resize(n, static_cast<Eigen::Index>(ds.sensor_ids.size()));
      u.data.gaze.resize(n, 2);
      u.data.masked.assign(static_cast<std::size_t>(n), false);
      u.blink.assign(static_cast<std::size_t>(n), false);
      ds.units.push_back(std::move(u));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(files.manifest.string() + ": " + e.what());
  }

  std::ifstream in(files.samples);
  if (!in) throw InvalidArgument("cannot open " + files.samples.string());
  std::string line;
  std::size_t unit = 0;
  Eigen::Index row = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    while (unit < ds.units.size() && row == ds.units[unit].size()) {
      ++unit;
      row = 0;
    }
    if (unit == ds.units.size())
      throw InvalidArgument(files.samples.string() + ": more samples than the manifest lists");
    DatasetUnit& u = ds.units[unit];
    try {
      const Json s = Json::parse(line);
      if (s.at("segment").get<int>() != u.data.id)
        throw InvalidArgument("sample belongs to segment " + std::to_string(s.at("segment").get<int>()) +
                              ", expected " + std::to_string(u.data.id));
      const Eigen::VectorXd r = to_vector(s.at("readings"));
      if (r.size() != ds.channels()) throw InvalidArgument("wrong reading count");
      u.data.t(row) = s.at("t").get<double>();
      u.data.readings.row(row) = r.transpose();
      u.data.gaze(row, 0) = s.at("gaze").at(0).get<double>();
      u.data.gaze(row, 1) = s.at("gaze").at(1).get<double>();
      u.blink[static_cast<std::size_t>(row)] = s.value("blink", false);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(files.samples.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(files.samples.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ++row;
  }
  while (unit < ds.units.size() && row == ds.units[unit].size()) {
    ++unit;
    row = 0;
  }
  if (unit != ds.units.size()) throw InvalidArgument(files.samples.string() + ": truncated dataset");
  ds.validate();
  return ds;
}

// ------------------------------------------------------------------ models

Json model_to_json(const GazeModel& model) {
  Json j = {{"schema", kModelSchema}, {"mode", std::string(to_string(model_mode(model)))}};
  std::visit(
      [&](const auto& m) {
        j["preprocess"] = to_json(m.preprocess);
        j["thresholds"] = vec(m.thresholds);
        j["scaler"] = scaler_json(m.scaler);
      },
      model);
  if (const auto* m = std::get_if<NextGazeModel>(&model)) {
    j["pca"] = {{"mean", vec(m->pca.mean)},
                {"components", mat(m->pca.components)},
                {"explained", vec(m->pca.explained)}};
    Json weights = Json::array(), biases = Json::array();
    for (const auto& w : m->mlp.weights) weights.push_back(mat(w));
    for (const auto& b : m->mlp.biases) biases.push_back(vec(b));
    j["mlp"] = {{"sizes", m->mlp.sizes}, {"weights", weights}, {"biases", biases}};
  } else {
    const auto& g = std::get<Led2GazeModel>(model).gpr;
    j["gpr"] = {{"kernel", to_json(g.params)},
                {"jitter", g.jitter},
                {"calibration", mat(g.calibration)},
                {"targets", mat(g.targets)},
                {"weights", mat(g.weights)}};
  }
  return j;
}

GazeModel model_from_json(const Json& j) {
  if (!j.is_object() || j.value("schema", "") != kModelSchema)
    throw InvalidArgument("not a model file (schema \"" + std::string(kModelSchema) + "\" expected)");
  try {
    const Mode mode = mode_from_string(j.at("mode").get<std::string>());
    PreprocessConfig pre;
    from_json(j.at("preprocess"), pre);
    const Eigen::VectorXd thresholds = to_vector(j.at("thresholds"));
    const Scaler scaler = scaler_from(j.at("scaler"));
    if (mode == Mode::NextGaze) {
      NextGazeModel m;
      m.preprocess = pre;
      m.thresholds = thresholds;
      m.scaler = scaler;
      const Json& p = j.at("pca");
      m.pca.mean = to_vector(p.at("mean"));
      m.pca.components = to_matrix(p.at("components"));
      m.pca.explained = to_vector(p.at("explained"));
      const Json& n = j.at("mlp");
      m.mlp.sizes = n.at("sizes").get<std::vector<int>>();
      for (const Json& w : n.at("weights")) m.mlp.weights.push_back(to_matrix(w));
      for (const Json& b : n.at("biases")) m.mlp.biases.push_back(to_vector(b));
      m.mlp.validate();
      return m;
    }
    Led2GazeModel m;
    m.preprocess = pre;
    m.thresholds = thresholds;
    m.scaler = scaler;
    const Json& g = j.at("gpr");
    from_json(g.at("kernel"), m.gpr.params);
    m.gpr.jitter = g.at("jitter").get<double>();
    m.gpr.calibration = to_matrix(g.at("calibration"));
    m.gpr.targets = to_matrix(g.at("targets"));
    m.gpr.weights = to_matrix(g.at("weights"));
    if (m.gpr.targets.rows() != m.gpr.size() || m.gpr.weights.rows() != m.gpr.size())
      throw InvalidArgument("GPR calibration, targets and weights differ in length");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("model file: ") + e.what());
  }
}

// ------------------------------------------------------------------ images

std::string pgm16(int width, int height, const std::vector<std::uint16_t>& values,
                  std::string_view comment) {
  if (width <= 0 || height <= 0 || values.size() != static_cast<std::size_t>(width) * height)
    throw InvalidArgument("pgm16: pixel count does not match the image size");
  if (comment.find('\n') != std::string_view::npos)
    throw InvalidArgument("pgm16: comment must be a single line");
  std::string out = "P5\n";
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
  out.reserve(out.size() + 2 * values.size());
  for (std::uint16_t v : values) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

void write_image(const fs::path& pgm, const RadianceImage& image, const Json& meta) {
  write_text(pgm, pgm16(image.width, image.height, image.quantized()));
  fs::path sidecar = pgm;
  sidecar.replace_extension(".json");
  Json j = {{"width", image.width},
            {"height", image.height},
            {"max_value", image.max_value},
            {"saturated", image.saturated}};
  j.update(meta);
  write_text(sidecar, j.dump(2) + "\n");
}

std::string sweep_csv(const SweepMap& map, std::string_view comment) {
  std::ostringstream out;
  out.precision(17);
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "h,v,value\n";
  for (std::size_t r = 0; r < map.v.size(); ++r)
    for (std::size_t c = 0; c < map.h.size(); ++c)
      out << map.h[c] << ',' << map.v[r] << ','
          << map.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) << '\n';
  return out.str();
}

std::string sweep_pgm(const SweepMap& map, std::string_view comment) {
  const auto w = static_cast<int>(map.h.size()), h = static_cast<int>(map.v.size());
  const double peak = map.values.size() ? map.values.maxCoeff() : 0.0;
  std::vector<std::uint16_t> px(static_cast<std::size_t>(w) * h, 0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double v = peak > 0.0 ? map.values(h - 1 - r, c) / peak : 0.0;
      px[static_cast<std::size_t>(r) * w + c] =
          static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
    }
  return pgm16(w, h, px, comment);
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%s evaluation (headline: %s, EWMA alpha %.3g)\n",
                std::string(to_string(r.mode)).c_str(), r.smoothed ? "smoothed" : "raw", r.ewma_alpha);
  out << line;
  std::snprintf(line, sizeof line, "%-10s %7s %9s %9s %9s %11s %9s   %s\n", "subset", "frames", "mean",
                "median", "std", "ewma mean", "ewma std", "reference mean/median/std");
  out << line;
  const auto ref = [](const std::optional<double>& v) {
    char b[16];
    if (!v) return std::string("-");
    std::snprintf(b, sizeof b, "%.2f", *v);
    return std::string(b);
  };
  for (const SubsetReport& s : r.subsets) {
    std::snprintf(line, sizeof line, "%-10s %7ld %9.3f %9.3f %9.3f %11.3f %9.3f   %s/%s/%s\n",
                  s.name.c_str(), static_cast<long>(s.raw.count), s.raw.mean, s.raw.median,
                  s.raw.stddev, s.smoothed.mean, s.smoothed.stddev, ref(s.reference.mean).c_str(),
                  ref(s.reference.median).c_str(), ref(s.reference.stddev).c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "masked test samples: %ld (angles in degrees)\n", static_cast<long>(r.masked));
  out << line;
  return out.str();
}

}  // namespace sparsegaze
