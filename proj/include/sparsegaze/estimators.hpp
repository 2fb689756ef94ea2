#pragma once

#include "sparsegaze/core.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace sparsegaze {

// ---------------------------------------------------------------- MLP

/// Fully connected network, tanh on hidden layers, identity output.
/// weights[l] maps layer l to l+1 (rows = outputs).
struct MlpModel {
  std::vector<int> sizes;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpModel zeros(const std::vector<int>& sizes);
  /// Xavier-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static MlpModel xavier(const std::vector<int>& sizes, std::uint64_t seed);
  static std::vector<int> gaze_layout(int d_in) { return {d_in, 64, 64, 64, 64, 2}; }

  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }
  Eigen::Index parameter_count() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  void validate() const;
};

/// One output row per input row.
Eigen::MatrixXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& inputs);
Eigen::VectorXd mlp_forward(const MlpModel& model, const Eigen::VectorXd& x);

/// Mean squared error over all samples and output coordinates.
double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& inputs,
                const Eigen::MatrixXd& targets);

struct MlpGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double loss = 0.0;

  Eigen::VectorXd flatten() const;
};

/// Exact gradient of mlp_loss by backpropagation.
MlpGradient mlp_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs,
                         const Eigen::MatrixXd& targets);

struct TrainConfig {
  int batch_size = 4;
  int max_epochs = 500;
  double learning_rate = 0.001;
  /// Rate shrink factor, applied on a rejected epoch or after `patience`
  /// consecutive accepted epochs improving by less than `min_improvement`.
  double shrink = 0.5;
  int patience = 5;
  double min_improvement = 1e-6;
  double min_rate = 1e-6;
  /// An epoch is accepted if its loss is at most the last accepted loss
  /// plus this tolerance; otherwise its update is rolled back.
  double accept_tolerance = 1e-9;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {64, 64, 64, 64};

  void validate() const;
};

struct TrainResult {
  MlpModel model;
  /// Full-data loss before training, then after every accepted epoch.
  std::vector<double> loss_trace;
  int epochs = 0;
  int rejected_epochs = 0;
  double final_rate = 0.0;
};

/// Thrown when the loss becomes non-finite; carries the trace so far.
class TrainingDiverged : public ConvergenceError {
public:
  TrainingDiverged(const std::string& what, std::vector<double> trace)
      : ConvergenceError(what), trace(std::move(trace)) {}
  std::vector<double> trace;
};

TrainResult mlp_train(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                      const TrainConfig& config = {});

// ---------------------------------------------------------- distances

enum class DistanceKind { Minkowski, Cosine, Manhattan, Canberra };

std::string_view to_string(DistanceKind kind);
DistanceKind distance_from_string(std::string_view s);

template <typename DA, typename DB>
typename DA::Scalar minkowski_distance(const Eigen::MatrixBase<DA>& a,
                                       const Eigen::MatrixBase<DB>& b,
                                       typename DA::Scalar p) {
  using std::pow;
  if (!(p >= 1)) throw InvalidArgument("minkowski_distance: order must be >= 1");
  if (a.size() != b.size()) throw InvalidArgument("minkowski_distance: dimension mismatch");
  const auto diff = (a - b).cwiseAbs();
  if (p == 1) return diff.sum();
  if (p == 2) return diff.norm();
  return pow(diff.array().pow(p).sum(), 1 / p);
}

double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double canberra_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct KernelParams {
  DistanceKind distance = DistanceKind::Minkowski;
  double minkowski_order = 2.0;
  /// 0 before fitting means "use the median pairwise calibration distance".
  double length_scale = 0.0;

  void validate() const;
};

double distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelParams& params);

/// exp(-distance / length_scale).
double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelParams& params);

// ---------------------------------------------------------------- GPR

struct GprModel {
  Eigen::MatrixXd calibration;  // p x d, one calibration vector per row
  Eigen::MatrixXd targets;      // p x 2
  KernelParams params;
  double jitter = 0.0;
  Eigen::MatrixXd weights;      // (C + jitter I)^-1 targets

  Eigen::Index size() const { return calibration.rows(); }
  /// Kernel vector against every calibration vector.
  Eigen::VectorXd kernel_vector(const Eigen::VectorXd& s) const;
  Eigen::MatrixXd covariance() const;
};

struct GprOptions {
  double jitter = 1e-8;
  /// Multiply the jitter by 100 (up to 1e-2) until the factorization is
  /// well-conditioned instead of failing.
  bool escalate = false;
  double min_rcond = 1e-15;
};

/// Builds C, factorizes C + jitter I and stores the prediction weights.
/// Exact duplicates without jitter and failed factorizations raise
/// NumericalError.
GprModel gpr_fit(const Eigen::MatrixXd& calibration, const Eigen::MatrixXd& targets,
                 KernelParams params = {}, const GprOptions& options = {});

/// k^T (C + jitter I)^-1 u.
Eigen::Vector2d gpr_predict(const GprModel& model, const Eigen::VectorXd& s);

/// Median of all pairwise distances between distinct rows.
double median_pairwise_distance(const Eigen::MatrixXd& rows, const KernelParams& params);

// --------------------------------------------------------------- EWMA

struct EwmaState {
  double alpha = 0.2;
  std::optional<Eigen::Vector2d> previous;
};

/// y = alpha raw + (1 - alpha) y_prev; the first sample passes through.
Eigen::Vector2d ewma_step(EwmaState& state, const Eigen::Vector2d& raw);

}  // namespace sparsegaze
