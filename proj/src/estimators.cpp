#include "sparsegaze/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sparsegaze {

MlpModel MlpModel::zeros(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw InvalidArgument("MLP needs at least an input and output layer");
  MlpModel m;
  m.sizes = sizes;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l] < 1 || sizes[l + 1] < 1) throw InvalidArgument("MLP layer sizes must be >= 1");
    m.weights.push_back(Eigen::MatrixXd::Zero(sizes[l + 1], sizes[l]));
    m.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
  }
  return m;
}

MlpModel MlpModel::xavier(const std::vector<int>& sizes, std::uint64_t seed) {
  MlpModel m = zeros(sizes);
  std::mt19937_64 rng(seed);
  for (auto& w : m.weights) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
  }
  return m;
}

Eigen::Index MlpModel::parameter_count() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

Eigen::VectorXd MlpModel::flatten() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.segment(at, weights[l].size()) = weights[l].reshaped();
    at += weights[l].size();
    flat.segment(at, biases[l].size()) = biases[l];
    at += biases[l].size();
  }
  return flat;
}

void MlpModel::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw InvalidArgument("MLP parameter vector has wrong size");
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l].reshaped() = flat.segment(at, weights[l].size());
    at += weights[l].size();
    biases[l] = flat.segment(at, biases[l].size());
    at += biases[l].size();
  }
}

void MlpModel::validate() const {
  if (sizes.size() < 2 || weights.size() != sizes.size() - 1 || biases.size() != weights.size())
    throw InvalidArgument("MLP layer bookkeeping is inconsistent");
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (weights[l].rows() != sizes[l + 1] || weights[l].cols() != sizes[l] ||
        biases[l].size() != sizes[l + 1])
      throw InvalidArgument("MLP layer " + std::to_string(l) + " has the wrong shape");
}

namespace {

// Activations per layer, samples as columns.
std::vector<Eigen::MatrixXd> forward_pass(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != model.input_dim())
    throw InvalidArgument("MLP input has " + std::to_string(inputs.cols()) + " features, model expects " +
                          std::to_string(model.input_dim()));
  std::vector<Eigen::MatrixXd> act;
  act.reserve(model.weights.size() + 1);
  act.push_back(inputs.transpose());
  const std::size_t last = model.weights.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    Eigen::MatrixXd z = (model.weights[l] * act.back()).colwise() + model.biases[l];
    if (l < last) z = z.array().tanh().matrix();
    act.push_back(std::move(z));
  }
  return act;
}

}  // namespace

Eigen::MatrixXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  return forward_pass(model, inputs).back().transpose();
}

Eigen::VectorXd mlp_forward(const MlpModel& model, const Eigen::VectorXd& x) {
  return mlp_forward(model, Eigen::MatrixXd(x.transpose())).row(0).transpose();
}

double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& inputs,
                const Eigen::MatrixXd& targets) {
  if (targets.rows() != inputs.rows() || targets.cols() != model.output_dim())
    throw InvalidArgument("MLP targets do not match inputs/outputs");
  return (mlp_forward(model, inputs) - targets).squaredNorm() / static_cast<double>(targets.size());
}

Eigen::VectorXd MlpGradient::flatten() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  Eigen::VectorXd flat(n);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.segment(at, weights[l].size()) = weights[l].reshaped();
    at += weights[l].size();
    flat.segment(at, biases[l].size()) = biases[l];
    at += biases[l].size();
  }
  return flat;
}

MlpGradient mlp_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs,
                         const Eigen::MatrixXd& targets) {
  if (inputs.rows() == 0) throw InvalidArgument("mlp_gradient: empty batch");
  if (targets.rows() != inputs.rows() || targets.cols() != model.output_dim())
    throw InvalidArgument("MLP targets do not match inputs/outputs");
  const std::vector<Eigen::MatrixXd> act = forward_pass(model, inputs);
  const std::size_t layers = model.weights.size();
  const double n = static_cast<double>(targets.size());
  const Eigen::MatrixXd err = act.back() - targets.transpose();

  MlpGradient g;
  g.loss = err.squaredNorm() / n;
  g.weights.resize(layers);
  g.biases.resize(layers);
  Eigen::MatrixXd delta = (2.0 / n) * err;
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l] = delta * act[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      // tanh'(z) = 1 - a^2
      delta = ((model.weights[l].transpose() * delta).array() * (1.0 - act[l].array().square()))
                  .matrix();
    }
  }
  return g;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (max_epochs < 0) throw InvalidArgument("max_epochs must be >= 0");
  if (!(shrink > 0.0 && shrink < 1.0)) throw InvalidArgument("shrink factor must lie in (0, 1)");
  if (patience < 1) throw InvalidArgument("patience must be >= 1");
}

TrainResult mlp_train(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                      const TrainConfig& config) {
  config.validate();
  if (inputs.rows() == 0) throw InvalidArgument("mlp_train: no training data");
  if (targets.rows() != inputs.rows()) throw InvalidArgument("mlp_train: inputs/targets differ in length");
  std::vector<int> sizes{static_cast<int>(inputs.cols())};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(static_cast<int>(targets.cols()));

  TrainResult res;
  res.model = MlpModel::xavier(sizes, config.seed);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(inputs.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  double rate = config.learning_rate;
  double accepted = mlp_loss(res.model, inputs, targets);
  res.loss_trace.push_back(accepted);
  if (!std::isfinite(accepted)) throw TrainingDiverged("mlp_train: initial loss is not finite", res.loss_trace);
  int stall = 0;
  Eigen::MatrixXd bx, by;

  for (int epoch = 0; epoch < config.max_epochs && rate >= config.min_rate; ++epoch) {
    ++res.epochs;
    const MlpModel before = res.model;
    // Fisher-Yates with an explicit draw so the order only depends on mt19937_64.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const auto idx = std::vector<Eigen::Index>(order.begin() + static_cast<long>(start),
                                                 order.begin() + static_cast<long>(stop));
      bx = inputs(idx, Eigen::all);
      by = targets(idx, Eigen::all);
      const MlpGradient g = mlp_gradient(res.model, bx, by);
      for (std::size_t l = 0; l < g.weights.size(); ++l) {
        res.model.weights[l] -= rate * g.weights[l];
        res.model.biases[l] -= rate * g.biases[l];
      }
    }
    const double loss = mlp_loss(res.model, inputs, targets);
    if (!std::isfinite(loss))
      throw TrainingDiverged("mlp_train: loss became non-finite at epoch " + std::to_string(epoch + 1),
                             res.loss_trace);
    if (loss > accepted + config.accept_tolerance) {
      res.model = before;
      rate *= config.shrink;
      ++res.rejected_epochs;
      stall = 0;
      continue;
    }
    stall = accepted - loss < config.min_improvement ? stall + 1 : 0;
    accepted = loss;
    res.loss_trace.push_back(loss);
    if (stall >= config.patience) {
      rate *= config.shrink;
      stall = 0;
    }
  }
  res.final_rate = rate;
  return res;
}

std::string_view to_string(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::Minkowski: return "minkowski";
    case DistanceKind::Cosine: return "cosine";
    case DistanceKind::Manhattan: return "manhattan";
    case DistanceKind::Canberra: return "canberra";
  }
  return "minkowski";
}

DistanceKind distance_from_string(std::string_view s) {
  if (s == "minkowski") return DistanceKind::Minkowski;
  if (s == "cosine") return DistanceKind::Cosine;
  if (s == "manhattan") return DistanceKind::Manhattan;
  if (s == "canberra") return DistanceKind::Canberra;
  throw InvalidArgument("unknown distance '" + std::string(s) + "'");
}

double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine_distance: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine_distance: zero vector");
  if (a == b) return 0.0;
  return std::max(0.0, 1.0 - a.dot(b) / (na * nb));
}

double canberra_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InvalidArgument("canberra_distance: dimension mismatch");
  double d = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double den = std::abs(a(i)) + std::abs(b(i));
    if (den > 0.0) d += std::abs(a(i) - b(i)) / den;
  }
  return d;
}

void KernelParams::validate() const {
  if (distance == DistanceKind::Minkowski && !(minkowski_order >= 1.0))
    throw InvalidArgument("Minkowski order must be >= 1");
  if (!(length_scale > 0.0)) throw InvalidArgument("kernel length scale must be positive");
}

double distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelParams& params) {
  switch (params.distance) {
    case DistanceKind::Minkowski: return minkowski_distance(a, b, params.minkowski_order);
    case DistanceKind::Manhattan: return minkowski_distance(a, b, 1.0);
    case DistanceKind::Cosine: return cosine_distance(a, b);
    case DistanceKind::Canberra: return canberra_distance(a, b);
  }
  return 0.0;
}

double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelParams& params) {
  params.validate();
  return std::exp(-distance(a, b, params) / params.length_scale);
}

double median_pairwise_distance(const Eigen::MatrixXd& rows, const KernelParams& params) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = i + 1; j < rows.rows(); ++j)
      d.push_back(distance(rows.row(i).transpose(), rows.row(j).transpose(), params));
  if (d.empty()) throw InvalidArgument("median_pairwise_distance: need at least two rows");
  const std::size_t m = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<long>(m), d.end());
  if (d.size() % 2) return d[m];
  return 0.5 * (d[m] + *std::max_element(d.begin(), d.begin() + static_cast<long>(m)));
}

Eigen::VectorXd GprModel::kernel_vector(const Eigen::VectorXd& s) const {
  if (s.size() != calibration.cols())
    throw InvalidArgument("gpr_predict: frame has " + std::to_string(s.size()) +
                          " features, calibration vectors have " + std::to_string(calibration.cols()));
  Eigen::VectorXd k(size());
  for (Eigen::Index i = 0; i < size(); ++i) k(i) = kernel(s, calibration.row(i).transpose(), params);
  return k;
}

Eigen::MatrixXd GprModel::covariance() const {
  const Eigen::Index p = size();
  Eigen::MatrixXd c(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    c(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < p; ++j)
      c(i, j) = c(j, i) = kernel(calibration.row(i).transpose(), calibration.row(j).transpose(), params);
  }
  return c;
}

GprModel gpr_fit(const Eigen::MatrixXd& calibration, const Eigen::MatrixXd& targets,
                 KernelParams params, const GprOptions& options) {
  const Eigen::Index p = calibration.rows();
  if (p < 2) throw InvalidArgument("gpr_fit: need at least two calibration points");
  if (targets.rows() != p || targets.cols() != 2)
    throw InvalidArgument("gpr_fit: targets must be p x 2, aligned with calibration rows");
  if (options.jitter < 0.0) throw InvalidArgument("gpr_fit: jitter must be non-negative");
  if (params.length_scale <= 0.0) params.length_scale = median_pairwise_distance(calibration, params);
  params.validate();

  if (options.jitter == 0.0) {
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = i + 1; j < p; ++j)
        if (calibration.row(i) == calibration.row(j))
          throw NumericalError("gpr_fit: calibration vectors " + std::to_string(i) + " and " +
                               std::to_string(j) + " are identical; C is singular without jitter");
  }

  GprModel model;
  model.calibration = calibration;
  model.targets = targets;
  model.params = params;
  const Eigen::MatrixXd c = model.covariance();
  double jitter = options.jitter;
  for (;;) {
    const Eigen::MatrixXd cj = c + jitter * Eigen::MatrixXd::Identity(p, p);
    const Eigen::LLT<Eigen::MatrixXd> llt(cj);
    if (llt.info() == Eigen::Success && llt.rcond() >= options.min_rcond) {
      model.jitter = jitter;
      model.weights = llt.solve(targets);
      return model;
    }
    const double next = jitter > 0.0 ? jitter * 100.0 : 1e-10;
    if (!options.escalate || next > 1e-2)
      throw NumericalError("gpr_fit: factorization of C + " + std::to_string(jitter) +
                           " I failed; retry with a larger jitter (escalation path x100 up to 1e-2)");
    jitter = next;
  }
}

Eigen::Vector2d gpr_predict(const GprModel& model, const Eigen::VectorXd& s) {
  return model.weights.transpose() * model.kernel_vector(s);
}

Eigen::Vector2d ewma_step(EwmaState& state, const Eigen::Vector2d& raw) {
  if (!(state.alpha > 0.0 && state.alpha <= 1.0)) throw InvalidArgument("EWMA alpha must lie in (0, 1]");
  if (!state.previous) {
    state.previous = raw;
  } else {
    state.previous = state.alpha * raw + (1.0 - state.alpha) * *state.previous;
  }
  return *state.previous;
}

}  // namespace sparsegaze
