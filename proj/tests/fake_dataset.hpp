#pragma once

#include "sparsegaze/synthesis.hpp"

// Protocol-shaped dataset whose readings are a smooth analytic function of
// gaze, with a few blink dips injected.
inline sparsegaze::GazeDataset fake_dataset(sparsegaze::Mode mode, int channels, double rate,
                                            bool blinks = true) {
  using namespace sparsegaze;
  ProtocolConfig pc;
  pc.pursuit.sample_rate = rate;
  pc.fixation.sample_rate = rate;
  const StimulusTrack track = build_split(mode, pc);
  GazeDataset ds;
  ds.mode = mode;
  ds.sample_rate = rate;
  ds.config_hash = "fake";
  for (int c = 0; c < channels; ++c) ds.sensor_ids.push_back(c);
  int id = 0;
  for (const StimulusUnit& su : track.units) {
    DatasetUnit u;
    u.kind = su.kind;
    u.index = su.index;
    u.session = su.session;
    u.settle = su.settle;
    u.degraded = su.degraded;
    u.data.id = id++;
    u.data.role = su.role;
    u.data.t = su.t;
    u.data.gaze = su.gaze;
    u.data.readings.resize(su.size(), channels);
    u.data.masked.assign(static_cast<std::size_t>(su.size()), false);
    u.blink.assign(static_cast<std::size_t>(su.size()), false);
    for (Eigen::Index i = 0; i < su.size(); ++i) {
      const Vec3 g = gaze_direction(su.gaze(i, 0), su.gaze(i, 1));
      for (int c = 0; c < channels; ++c) {
        const double a = 2 * kPi * c / channels;
        const Vec3 axis = Vec3(0.8 * std::cos(a), 0.8 * std::sin(a), 1.0).normalized();
        u.data.readings(i, c) = 1000.0 * std::exp(3.0 * (g.dot(axis) - 1.0));
      }
    }
    if (blinks && su.size() > 60 && id % 3 == 0) {
      for (Eigen::Index i = 40; i < 44; ++i) {
        u.data.readings.row(i) *= 0.2;
        u.blink[static_cast<std::size_t>(i)] = true;
      }
    }
    ds.units.push_back(std::move(u));
  }
  return ds;
}
