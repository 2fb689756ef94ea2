#pragma once

#include "sparsegaze/gaze_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace sparsegaze {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kSceneSchema = "sparsegaze.scene/1";
inline constexpr std::string_view kDatasetSchema = "sparsegaze.dataset/1";
inline constexpr std::string_view kModelSchema = "sparsegaze.model/1";
inline constexpr std::string_view kReportSchema = "sparsegaze.report/1";

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
/// FNV-1a of the compact serialization, as 16 hex digits.
std::string config_hash(const Json& config);

// JSON mappings for configuration and result types.
Json to_json(const EyeGeometry& g);
Json to_json(const Materials& m);
Json to_json(const RenderSettings& s);
Json to_json(const Camera& c);
Json to_json(const Emitter& e);
Json to_json(const LedElectrical& led);
Json to_json(const RigConfig& c);
Json to_json(const BlinkConfig& c);
Json to_json(const SynthConfig& c);
Json to_json(const PreprocessConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const KernelParams& p);
Json to_json(const Led2GazeConfig& c);
Json to_json(const Schedule& s);
Json to_json(const Rig& rig);
Json to_json(const ErrorStats& s, bool with_errors = false);
Json to_json(const EvalReport& r);

/// Readers accept partial objects: absent keys keep their defaults, unknown
/// keys are rejected.
void from_json(const Json& j, EyeGeometry& g);
void from_json(const Json& j, Materials& m);
void from_json(const Json& j, RenderSettings& s);
void from_json(const Json& j, RigConfig& c);
void from_json(const Json& j, BlinkConfig& c);
void from_json(const Json& j, SynthConfig& c);
void from_json(const Json& j, PreprocessConfig& c);
void from_json(const Json& j, TrainConfig& c);
void from_json(const Json& j, KernelParams& p);
void from_json(const Json& j, Led2GazeConfig& c);

/// Scene description: geometry, materials and optional explicit
/// sensor/emitter placements.
struct SceneFile {
  EyeGeometry geometry;
  Materials materials;
  std::vector<Camera> sensors;
  std::vector<Emitter> emitters;
};

Json to_json(const SceneFile& s);
SceneFile scene_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

// ---------------------------------------------------------------- datasets

/// Manifest (units, counts, seed, hash) plus one JSON line per sample
/// {t, readings, gaze, segment, role, masked, blink}; `masked` marks the
/// settle samples that are excluded downstream.
struct DatasetFiles {
  std::filesystem::path manifest;
  std::filesystem::path samples;
};

DatasetFiles dataset_paths(const std::filesystem::path& dir);
Json dataset_manifest(const GazeDataset& ds, const Json& config);
std::string dataset_jsonl(const GazeDataset& ds);
/// Writes manifest.json and samples.jsonl. `created` is the only field
/// that varies between identical runs.
void write_dataset(const std::filesystem::path& dir, const GazeDataset& ds, const Json& config,
                   const std::string& created);
GazeDataset read_dataset(const std::filesystem::path& dir);

// ------------------------------------------------------------------ models

Json model_to_json(const GazeModel& model);
GazeModel model_from_json(const Json& j);

// ----------------------------------------------------------------- images

/// Binary 16-bit PGM (big-endian samples) with an optional header comment.
std::string pgm16(int width, int height, const std::vector<std::uint16_t>& values,
                  std::string_view comment = {});
/// PGM plus a JSON sidecar (same stem) holding max_value, saturated and `meta`.
void write_image(const std::filesystem::path& pgm, const RadianceImage& image,
                 const Json& meta = Json::object());

/// "h,v,value" rows, v outer, h inner, after an optional "# comment" line.
std::string sweep_csv(const SweepMap& map, std::string_view comment = {});
/// Values normalised to the map maximum; top row is the highest v.
std::string sweep_pgm(const SweepMap& map, std::string_view comment = {});

/// Human-readable error table with the reference figures alongside.
std::string report_table(const EvalReport& report);

}  // namespace sparsegaze
