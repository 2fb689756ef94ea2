#pragma once

#include "sparsegaze/estimators.hpp"
#include "sparsegaze/synthesis.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sparsegaze {

struct PreprocessConfig {
  int sg_window = 11;
  int sg_order = 3;
  double blink_factor = 4.0;
  double blink_floor = 0.01;
  int blink_margin = 2;
  int downsample = 100;

  void validate() const;
};

/// Per-channel blink thresholds from every training unit of the dataset.
Eigen::VectorXd fit_blink_thresholds(const GazeDataset& dataset, const PreprocessConfig& config);

/// Filters a unit, masks blinks and settle samples, bridges masked samples
/// linearly and filters again. The result carries the filtered readings and
/// the mask; masked rows must not be used.
Segment preprocess_unit(const DatasetUnit& unit, const Eigen::VectorXd& thresholds,
                        const PreprocessConfig& config);

// -------------------------------------------------------------- NextGaze

struct NextGazeModel {
  PreprocessConfig preprocess;
  Eigen::VectorXd thresholds;
  Scaler scaler;
  PcaBasis pca;
  MlpModel mlp;

  /// Scaled and reprojected network inputs for preprocessed readings.
  Eigen::MatrixXd inputs(const Eigen::MatrixXd& readings) const;
  Eigen::MatrixXd predict(const Eigen::MatrixXd& readings) const;
};

struct NextGazeFit {
  NextGazeModel model;
  TrainResult training;
  Eigen::Index samples = 0;
};

/// Downsamples every training pursuit segment, fits the scaler and PCA on
/// the pooled samples and trains the network on their projections.
NextGazeFit train_nextgaze(const GazeDataset& dataset, const PreprocessConfig& preprocess = {},
                           const TrainConfig& train = {}, std::optional<int> pca_components = {});

// -------------------------------------------------------------- LED2Gaze

struct Led2GazeConfig {
  PreprocessConfig preprocess;
  /// Calibration vectors taken along each training pursuit segment.
  int pursuit_points = 10;
  /// Samples averaged around each pursuit calibration point.
  int pursuit_window = 5;
  KernelParams kernel;
  GprOptions gpr;
};

struct Led2GazeModel {
  PreprocessConfig preprocess;
  Eigen::VectorXd thresholds;
  Scaler scaler;
  GprModel gpr;

  Eigen::MatrixXd predict(const Eigen::MatrixXd& readings) const;
};

/// Calibration vectors: the mean of every training fixation dwell after
/// settling, plus evenly spaced windowed means along each training
/// pursuit segment; min-max scaled before the GPR fit.
Led2GazeModel train_led2gaze(const GazeDataset& dataset, const Led2GazeConfig& config = {});

using GazeModel = std::variant<NextGazeModel, Led2GazeModel>;

Mode model_mode(const GazeModel& model);
Eigen::Index model_channels(const GazeModel& model);

// ------------------------------------------------------------ evaluation

struct ReferenceFigures {
  std::optional<double> mean;
  std::optional<double> median;
  std::optional<double> stddev;
};

struct SubsetReport {
  std::string name;
  ErrorStats raw;
  ErrorStats smoothed;
  ReferenceFigures reference;
};

struct EvalOptions {
  double ewma_alpha = 0.2;
  /// Which series headline figures refer to.
  bool smoothed = false;
};

struct EvalReport {
  Mode mode = Mode::NextGaze;
  double ewma_alpha = 0.2;
  bool smoothed = false;
  Eigen::Index masked = 0;
  std::vector<SubsetReport> subsets;

  const SubsetReport& subset(const std::string& name) const;
  /// Raw or smoothed statistics of a subset, per `smoothed`.
  const ErrorStats& headline(const std::string& name) const;
};

/// Per-frame errors over the unmasked samples of every test unit.
/// Subsets: NextGaze "pursuit", "fixation", "central" (fixations within
/// +-10 deg) and "overall"; LED2Gaze "grid" and "overall". The smoothed
/// series runs an EWMA over each unit's evaluated frames.
EvalReport evaluate_model(const GazeModel& model, const GazeDataset& dataset,
                          const EvalOptions& options = {});

}  // namespace sparsegaze
