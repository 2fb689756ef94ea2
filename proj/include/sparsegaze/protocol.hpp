#pragma once

#include "sparsegaze/core.hpp"
#include "sparsegaze/signal_pipeline.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sparsegaze {

enum class Mode { NextGaze, Led2Gaze };
enum class UnitKind { Pursuit, Grid, Random };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view s);
std::string_view to_string(UnitKind kind);
UnitKind unit_kind_from_string(std::string_view s);

/// Constant-acceleration ramp up to `max_speed`, cruise, symmetric ramp
/// down. Paths shorter than the two ramps get a triangular profile with a
/// reduced peak speed and are flagged degraded.
struct PursuitProfile {
  double length = 0.0;
  double max_speed = 6.0;
  double accel = 6.0;
  double peak_speed = 0.0;
  double ramp_time = 0.0;
  double duration = 0.0;
  bool degraded = false;

  static PursuitProfile make(double length, double max_speed = 6.0, double ramp = 1.0);
  double distance_at(double t) const;
  double speed_at(double t) const;
};

/// One stimulus unit: a pursuit segment or a fixation dwell. Rows of
/// `gaze` are (h, v) targets at times `t`; the first `settle` samples of
/// a dwell are the saccade landing and are excluded downstream.
struct StimulusUnit {
  UnitKind kind = UnitKind::Pursuit;
  int index = 0;
  int session = 0;
  SegmentRole role = SegmentRole::Train;
  Eigen::VectorXd t;
  Eigen::MatrixXd gaze;
  Eigen::Index settle = 0;
  bool degraded = false;

  Eigen::Index size() const { return t.size(); }
};

struct StimulusTrack {
  std::vector<StimulusUnit> units;

  double end_time() const;
  Eigen::Index sample_count() const;
  std::size_t count(UnitKind kind, SegmentRole role) const;
  /// Throws unless times increase strictly and every target lies in +-fov.
  void validate(double fov) const;
};

struct PursuitConfig {
  double max_speed = 6.0;
  double ramp = 1.0;
  double sample_rate = 400.0;
};

struct FixationConfig {
  double dwell = 2.0;
  double settle = 0.5;
  double sample_rate = 400.0;
};

/// Declared pursuit paths as vertex lists (degrees): 25 vertices / 24
/// segments within +-20 deg, and 10 vertices / 9 segments within +-45 deg.
std::vector<Eigen::Vector2d> nextgaze_pursuit_path();
std::vector<Eigen::Vector2d> led2gaze_pursuit_path();

/// Samples each path segment at the configured rate starting at `t0`.
StimulusTrack gen_smooth_pursuit(const std::vector<Eigen::Vector2d>& path, double fov,
                                 const PursuitConfig& config = {}, double t0 = 0.0);
/// First `n_segments` segments of the mode's declared path.
StimulusTrack gen_smooth_pursuit(Mode mode, int n_segments, const PursuitConfig& config = {},
                                 double t0 = 0.0);

/// Row-major square grid (top row first, left to right) spanning +-fov.
StimulusTrack gen_fixation_grid(int n_points, double fov, const FixationConfig& config = {},
                                double t0 = 0.0, int session = 0);

/// Targets uniform in the +-fov box from a seeded mt19937_64.
StimulusTrack gen_random_fixations(int n, double fov, std::uint64_t seed,
                                   const FixationConfig& config = {}, double t0 = 0.0);

struct ProtocolConfig {
  PursuitConfig pursuit;
  FixationConfig fixation;
  std::uint64_t seed = 0;
};

/// Full study protocol with train/test roles assigned:
/// NextGaze: pursuit 1-20 train, pursuit 21-24 and the 25-point +-20 grid test.
/// LED2Gaze: 9 pursuit segments, grid session 1 and 66 random fixations
/// train; grid session 2 test (both 4x4 over +-50.5).
StimulusTrack build_split(Mode mode, const ProtocolConfig& config = {});

struct ModeFigures {
  double fov;
  double grid_fov;
  int grid_points;
  int pursuit_segments;
  int train_pursuit;
};
ModeFigures mode_figures(Mode mode);

/// Angle between the gaze unit vectors of two (h, v) poses, degrees.
double angular_error(const Eigen::Vector2d& pred, const Eigen::Vector2d& truth);

struct ErrorStats {
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  Eigen::VectorXd errors;
  Eigen::Index count = 0;
};

ErrorStats error_stats(const Eigen::VectorXd& errors);

/// Per-row angular errors. With `central_region` > 0 only rows whose truth
/// lies within +-central_region on both axes are kept.
ErrorStats evaluate(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& truth,
                    double central_region = 0.0);

/// CSV rows "t,h,v,phase" with phase like "pursuit:3" or "grid:1:7".
std::string track_csv(const StimulusTrack& track);

}  // namespace sparsegaze
