#include "sparsegaze/protocol.hpp"

#include "sparsegaze/eye_scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace sparsegaze {

std::string_view to_string(Mode mode) { return mode == Mode::NextGaze ? "nextgaze" : "led2gaze"; }

Mode mode_from_string(std::string_view s) {
  if (s == "nextgaze") return Mode::NextGaze;
  if (s == "led2gaze") return Mode::Led2Gaze;
  throw InvalidArgument("unknown mode '" + std::string(s) + "' (expected nextgaze or led2gaze)");
}

std::string_view to_string(UnitKind kind) {
  switch (kind) {
    case UnitKind::Pursuit: return "pursuit";
    case UnitKind::Grid: return "grid";
    case UnitKind::Random: return "random";
  }
  return "pursuit";
}

UnitKind unit_kind_from_string(std::string_view s) {
  if (s == "pursuit") return UnitKind::Pursuit;
  if (s == "grid") return UnitKind::Grid;
  if (s == "random") return UnitKind::Random;
  throw InvalidArgument("unknown unit kind '" + std::string(s) + "'");
}

PursuitProfile PursuitProfile::make(double length, double max_speed, double ramp) {
  if (!(length > 0.0)) throw InvalidArgument("pursuit segment must have positive length");
  if (!(max_speed > 0.0 && ramp > 0.0)) throw InvalidArgument("pursuit speed and ramp must be positive");
  PursuitProfile p;
  p.length = length;
  p.max_speed = max_speed;
  p.accel = max_speed / ramp;
  const double ramps = max_speed * ramp;  // distance covered by both ramps
  if (length >= ramps) {
    p.peak_speed = max_speed;
    p.ramp_time = ramp;
    p.duration = 2.0 * ramp + (length - ramps) / max_speed;
  } else {
    p.degraded = true;
    p.peak_speed = std::sqrt(p.accel * length);
    p.ramp_time = p.peak_speed / p.accel;
    p.duration = 2.0 * p.ramp_time;
  }
  return p;
}

double PursuitProfile::distance_at(double t) const {
  t = std::clamp(t, 0.0, duration);
  const double ramp_dist = 0.5 * accel * ramp_time * ramp_time;
  if (t <= ramp_time) return 0.5 * accel * t * t;
  if (t <= duration - ramp_time) return ramp_dist + peak_speed * (t - ramp_time);
  const double r = duration - t;
  return length - 0.5 * accel * r * r;
}

double PursuitProfile::speed_at(double t) const {
  if (t <= 0.0 || t >= duration) return 0.0;
  if (t <= ramp_time) return accel * t;
  if (t <= duration - ramp_time) return peak_speed;
  return accel * (duration - t);
}

double StimulusTrack::end_time() const {
  for (auto it = units.rbegin(); it != units.rend(); ++it)
    if (it->size()) return it->t(it->size() - 1);
  return 0.0;
}

Eigen::Index StimulusTrack::sample_count() const {
  Eigen::Index n = 0;
  for (const auto& u : units) n += u.size();
  return n;
}

std::size_t StimulusTrack::count(UnitKind kind, SegmentRole role) const {
  return static_cast<std::size_t>(std::count_if(units.begin(), units.end(), [&](const StimulusUnit& u) {
    return u.kind == kind && u.role == role;
  }));
}

void StimulusTrack::validate(double fov) const {
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& u : units) {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (!(u.t(i) > last)) throw InvalidArgument("stimulus times are not strictly increasing");
      last = u.t(i);
    }
    if (u.size() && u.gaze.cwiseAbs().maxCoeff() > fov + 1e-9)
      throw InvalidArgument("stimulus target outside the field of view");
  }
}

std::vector<Eigen::Vector2d> nextgaze_pursuit_path() {
  // Horizontal serpentine, vertical serpentine, two diagonals and a
  // vertical edge for training; four crossing strokes for testing.
  return {{-20, -20}, {20, -20}, {20, -10}, {-20, -10}, {-20, 0},  {20, 0},   {20, 10},
          {-20, 10},  {-20, 20}, {20, 20},  {10, 20},   {10, -20}, {0, -20},  {0, 20},
          {-10, 20},  {-10, -20}, {-20, -20}, {20, 20}, {20, -20}, {-20, 20}, {-20, -20},
          {-5, 20},   {5, -20},  {20, 20},  {-20, 5}};
}

std::vector<Eigen::Vector2d> led2gaze_pursuit_path() {
  return {{-45, -45}, {45, -45}, {45, -15}, {-45, -15}, {-45, 15},
          {45, 15},   {45, 45},  {-45, 45}, {-45, -45}, {45, 45}};
}

namespace {

Eigen::Index samples_for(double duration, double rate) {
  if (!(rate > 0.0)) throw InvalidArgument("sample rate must be positive");
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(duration * rate - 1e-9)));
}

StimulusUnit dwell_unit(UnitKind kind, int index, int session, const Eigen::Vector2d& target,
                        double t0, const FixationConfig& config) {
  if (!(config.dwell > 0.0) || config.settle < 0.0 || config.settle >= config.dwell)
    throw InvalidArgument("fixation dwell must be positive and longer than the settle time");
  StimulusUnit u;
  u.kind = kind;
  u.index = index;
  u.session = session;
  const Eigen::Index n = samples_for(config.dwell, config.sample_rate);
  u.t = t0 + Eigen::ArrayXd::LinSpaced(n, 0.0, static_cast<double>(n - 1)) / config.sample_rate;
  u.gaze = target.transpose().replicate(n, 1);
  u.settle = static_cast<Eigen::Index>(std::ceil(config.settle * config.sample_rate - 1e-9));
  return u;
}

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementation.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

StimulusTrack gen_smooth_pursuit(const std::vector<Eigen::Vector2d>& path, double fov,
                                 const PursuitConfig& config, double t0) {
  if (path.size() < 2) throw InvalidArgument("pursuit path needs at least two vertices");
  StimulusTrack track;
  double start = t0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const Eigen::Vector2d a = path[k], b = path[k + 1];
    if (a.cwiseAbs().maxCoeff() > fov + 1e-9 || b.cwiseAbs().maxCoeff() > fov + 1e-9)
      throw InvalidArgument("pursuit vertex outside the field of view");
    const PursuitProfile prof = PursuitProfile::make((b - a).norm(), config.max_speed, config.ramp);
    StimulusUnit u;
    u.kind = UnitKind::Pursuit;
    u.index = static_cast<int>(k);
    u.degraded = prof.degraded;
    const Eigen::Index n = samples_for(prof.duration, config.sample_rate);
    u.t.resize(n);
    u.gaze.resize(n, 2);
    const Eigen::Vector2d dir = (b - a) / prof.length;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double tau = static_cast<double>(i) / config.sample_rate;
      u.t(i) = start + tau;
      u.gaze.row(i) = (a + prof.distance_at(tau) * dir).transpose();
    }
    track.units.push_back(std::move(u));
    start += prof.duration;
  }
  return track;
}

ModeFigures mode_figures(Mode mode) {
  if (mode == Mode::NextGaze) return {20.0, 20.0, 25, 24, 20};
  return {EyeState::kMaxGaze, EyeState::kMaxGaze, 16, 9, 9};
}

StimulusTrack gen_smooth_pursuit(Mode mode, int n_segments, const PursuitConfig& config, double t0) {
  auto path = mode == Mode::NextGaze ? nextgaze_pursuit_path() : led2gaze_pursuit_path();
  if (n_segments < 1 || static_cast<std::size_t>(n_segments) >= path.size())
    throw InvalidArgument("requested more pursuit segments than the declared path has");
  path.resize(static_cast<std::size_t>(n_segments) + 1);
  return gen_smooth_pursuit(path, mode_figures(mode).fov, config, t0);
}

StimulusTrack gen_fixation_grid(int n_points, double fov, const FixationConfig& config, double t0,
                                int session) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_points))));
  if (n_points < 4 || side * side != n_points)
    throw InvalidArgument("fixation grid needs a perfect square of at least 4 points");
  StimulusTrack track;
  const double spacing = 2.0 * fov / (side - 1);
  double start = t0;
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const Eigen::Vector2d target(-fov + c * spacing, fov - r * spacing);
      track.units.push_back(dwell_unit(UnitKind::Grid, r * side + c, session, target, start, config));
      start += config.dwell;
    }
  return track;
}

StimulusTrack gen_random_fixations(int n, double fov, std::uint64_t seed,
                                   const FixationConfig& config, double t0) {
  if (n < 1) throw InvalidArgument("need at least one random fixation");
  std::mt19937_64 rng(seed);
  StimulusTrack track;
  double start = t0;
  for (int i = 0; i < n; ++i) {
    const double h = -fov + 2.0 * fov * unit_uniform(rng);
    const double v = -fov + 2.0 * fov * unit_uniform(rng);
    track.units.push_back(dwell_unit(UnitKind::Random, i, 0, {h, v}, start, config));
    start += config.dwell;
  }
  return track;
}

namespace {

void append(StimulusTrack& into, StimulusTrack&& from, SegmentRole role) {
  for (auto& u : from.units) {
    u.role = role;
    into.units.push_back(std::move(u));
  }
}

// Start time of the next block, one sample period after the last sample.
double next_start(const StimulusTrack& track, double rate) {
  return track.units.empty() ? 0.0 : track.end_time() + 1.0 / rate;
}

}  // namespace

StimulusTrack build_split(Mode mode, const ProtocolConfig& config) {
  const ModeFigures fig = mode_figures(mode);
  StimulusTrack track;
  StimulusTrack pursuit = gen_smooth_pursuit(mode, fig.pursuit_segments, config.pursuit);
  for (auto& u : pursuit.units) {
    u.role = u.index < fig.train_pursuit ? SegmentRole::Train : SegmentRole::Test;
    track.units.push_back(std::move(u));
  }
  const double rate = config.fixation.sample_rate;
  if (mode == Mode::NextGaze) {
    append(track, gen_fixation_grid(fig.grid_points, fig.grid_fov, config.fixation, next_start(track, rate), 1),
           SegmentRole::Test);
  } else {
    append(track, gen_fixation_grid(fig.grid_points, fig.grid_fov, config.fixation, next_start(track, rate), 1),
           SegmentRole::Train);
    append(track,
           gen_random_fixations(66, fig.fov, config.seed, config.fixation, next_start(track, rate)),
           SegmentRole::Train);
    append(track, gen_fixation_grid(fig.grid_points, fig.grid_fov, config.fixation, next_start(track, rate), 2),
           SegmentRole::Test);
  }
  track.validate(fig.fov);
  return track;
}

double angular_error(const Eigen::Vector2d& pred, const Eigen::Vector2d& truth) {
  const Vec3 a = gaze_direction(pred.x(), pred.y());
  const Vec3 b = gaze_direction(truth.x(), truth.y());
  return rad2deg(std::atan2(a.cross(b).norm(), a.dot(b)));
}

ErrorStats error_stats(const Eigen::VectorXd& errors) {
  if (errors.size() == 0) throw InvalidArgument("error statistics need at least one sample");
  ErrorStats s;
  s.errors = errors;
  s.count = errors.size();
  s.mean = errors.mean();
  s.min = errors.minCoeff();
  s.max = errors.maxCoeff();
  s.stddev = std::sqrt((errors.array() - s.mean).square().mean());
  std::vector<double> sorted(errors.data(), errors.data() + errors.size());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
  return s;
}

ErrorStats evaluate(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& truth,
                    double central_region) {
  if (predictions.rows() != truth.rows() || predictions.cols() != 2 || truth.cols() != 2)
    throw InvalidArgument("evaluate: predictions and truth must both be n x 2");
  std::vector<double> errs;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    if (central_region > 0.0 && truth.row(i).cwiseAbs().maxCoeff() > central_region + 1e-9) continue;
    errs.push_back(angular_error(predictions.row(i).transpose(), truth.row(i).transpose()));
  }
  if (errs.empty()) throw InvalidArgument("evaluate: empty test split");
  return error_stats(Eigen::Map<const Eigen::VectorXd>(errs.data(), static_cast<Eigen::Index>(errs.size())));
}

std::string track_csv(const StimulusTrack& track) {
  std::ostringstream os;
  os.precision(10);
  os << "t,h,v,phase\n";
  for (const auto& u : track.units) {
    std::string phase = std::string(to_string(u.kind)) + ":";
    if (u.kind == UnitKind::Grid) phase += std::to_string(u.session) + ":";
    phase += std::to_string(u.index);
    for (Eigen::Index i = 0; i < u.size(); ++i)
      os << u.t(i) << ',' << u.gaze(i, 0) << ',' << u.gaze(i, 1) << ',' << phase << '\n';
  }
  return os.str();
}

}  // namespace sparsegaze
