#include "sparsegaze/gaze_model.hpp"

#include <algorithm>
#include <cmath>

namespace sparsegaze {

void PreprocessConfig::validate() const {
  if (sg_window < 1 || sg_window % 2 == 0) throw InvalidArgument("SG window must be odd");
  if (sg_order < 0 || sg_order >= sg_window) throw InvalidArgument("SG order must lie in [0, window)");
  if (!(blink_factor > 0.0) || blink_floor < 0.0)
    throw InvalidArgument("blink threshold factor must be positive and the floor non-negative");
  if (blink_margin < 0) throw InvalidArgument("blink margin must be non-negative");
  if (downsample < 2) throw InvalidArgument("downsampling needs at least two points");
}

namespace {

// Short units (never shorter than a few samples in practice) get the
// largest odd window that fits.
Eigen::MatrixXd smooth(const Eigen::MatrixXd& x, const PreprocessConfig& c) {
  int w = c.sg_window;
  if (x.rows() < w) w = static_cast<int>(x.rows() % 2 ? x.rows() : x.rows() - 1);
  if (w < 1) return x;
  return savitzky_golay(x, w, std::min(c.sg_order, w - 1));
}

// Replaces masked rows by linear interpolation between the nearest
// unmasked rows, holding the end values.
Eigen::MatrixXd bridge(const Eigen::MatrixXd& x, const std::vector<bool>& masked) {
  Eigen::MatrixXd out = x;
  const Eigen::Index n = x.rows();
  Eigen::Index prev = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (masked[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = prev + 1; j < i; ++j)
      if (prev < 0)
        out.row(j) = x.row(i);
      else
        out.row(j) = x.row(prev) + (x.row(i) - x.row(prev)) * double(j - prev) / double(i - prev);
    prev = i;
  }
  if (prev >= 0)
    for (Eigen::Index j = prev + 1; j < n; ++j) out.row(j) = x.row(prev);
  return out;
}

std::vector<const DatasetUnit*> training_units(const GazeDataset& ds) {
  std::vector<const DatasetUnit*> out;
  for (const auto& u : ds.units)
    if (u.role() == SegmentRole::Train) out.push_back(&u);
  if (out.empty()) throw InvalidArgument("dataset has no training units");
  return out;
}

Eigen::MatrixXd stack_rows(const std::vector<Eigen::MatrixXd>& parts, Eigen::Index cols) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.rows();
  Eigen::MatrixXd out(n, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return out;
}

Eigen::MatrixXd unmasked_rows(const Eigen::MatrixXd& x, const std::vector<bool>& masked) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (!masked[static_cast<std::size_t>(i)]) keep.push_back(i);
  return x(keep, Eigen::all);
}

}  // namespace

Eigen::VectorXd fit_blink_thresholds(const GazeDataset& dataset, const PreprocessConfig& config) {
  config.validate();
  std::vector<Eigen::MatrixXd> raw, filtered;
  for (const DatasetUnit* u : training_units(dataset)) {
    raw.push_back(u->data.readings);
    filtered.push_back(smooth(u->data.readings, config));
  }
  return blink_thresholds(stack_rows(raw, dataset.channels()), stack_rows(filtered, dataset.channels()),
                          config.blink_factor, config.blink_floor);
}

Segment preprocess_unit(const DatasetUnit& unit, const Eigen::VectorXd& thresholds,
                        const PreprocessConfig& config) {
  config.validate();
  Segment out = unit.data;
  const BlinkMask blinks =
      remove_blinks(unit.data.readings, smooth(unit.data.readings, config), thresholds,
                    config.blink_margin);
  out.masked = blinks.masked;
  for (Eigen::Index i = 0; i < std::min(unit.settle, unit.size()); ++i)
    out.masked[static_cast<std::size_t>(i)] = true;
  if (out.unmasked_count() == 0) return out;
  out.readings = smooth(bridge(unit.data.readings, out.masked), config);
  return out;
}

// ---------------------------------------------------------------- NextGaze

Eigen::MatrixXd NextGazeModel::inputs(const Eigen::MatrixXd& readings) const {
  if (readings.cols() != scaler.min.size())
    throw InvalidArgument("model expects " + std::to_string(scaler.min.size()) +
                          " channels, got " + std::to_string(readings.cols()));
  return pca.transform(scaler.apply(readings));
}

Eigen::MatrixXd NextGazeModel::predict(const Eigen::MatrixXd& readings) const {
  return mlp_forward(mlp, inputs(readings));
}

NextGazeFit train_nextgaze(const GazeDataset& dataset, const PreprocessConfig& preprocess,
                           const TrainConfig& train, std::optional<int> pca_components) {
  preprocess.validate();
  if (dataset.mode != Mode::NextGaze) throw InvalidArgument("train_nextgaze: dataset is not a NextGaze recording");
  NextGazeFit fit;
  NextGazeModel& m = fit.model;
  m.preprocess = preprocess;
  m.thresholds = fit_blink_thresholds(dataset, preprocess);
  std::vector<Eigen::MatrixXd> x, y;
  for (const DatasetUnit* u : training_units(dataset)) {
    if (u->kind != UnitKind::Pursuit) continue;
    const Segment seg = preprocess_unit(*u, m.thresholds, preprocess);
    if (seg.unmasked_count() < 2) continue;
    const Segment ds = downsample_segment(seg, preprocess.downsample);
    x.push_back(ds.readings);
    y.push_back(ds.gaze);
  }
  if (x.empty()) throw InvalidArgument("no usable training pursuit segments");
  const Eigen::MatrixXd readings = stack_rows(x, dataset.channels());
  const Eigen::MatrixXd targets = stack_rows(y, 2);
  m.scaler = fit_scaler(readings);
  const Eigen::MatrixXd scaled = m.scaler.apply(readings);
  m.pca = pca_fit(scaled, pca_components);
  const Eigen::MatrixXd inputs = m.pca.transform(scaled);
  fit.samples = inputs.rows();
  fit.training = mlp_train(inputs, targets, train);
  m.mlp = fit.training.model;
  return fit;
}

// ---------------------------------------------------------------- LED2Gaze

Eigen::MatrixXd Led2GazeModel::predict(const Eigen::MatrixXd& readings) const {
  if (readings.cols() != gpr.calibration.cols())
    throw InvalidArgument("model expects " + std::to_string(gpr.calibration.cols()) +
                          " channels, got " + std::to_string(readings.cols()));
  const Eigen::MatrixXd s = scaler.apply(readings);
  Eigen::MatrixXd out(s.rows(), 2);
  for (Eigen::Index i = 0; i < s.rows(); ++i) out.row(i) = gpr_predict(gpr, s.row(i).transpose()).transpose();
  return out;
}

Led2GazeModel train_led2gaze(const GazeDataset& dataset, const Led2GazeConfig& config) {
  config.preprocess.validate();
  if (dataset.mode != Mode::Led2Gaze) throw InvalidArgument("train_led2gaze: dataset is not a LED2Gaze recording");
  if (config.pursuit_points < 0 || config.pursuit_window < 1)
    throw InvalidArgument("pursuit calibration needs a non-negative count and a positive window");
  Led2GazeModel m;
  m.preprocess = config.preprocess;
  m.thresholds = fit_blink_thresholds(dataset, config.preprocess);
  std::vector<Eigen::MatrixXd> c, u;
  for (const DatasetUnit* unit : training_units(dataset)) {
    const Segment seg = preprocess_unit(*unit, m.thresholds, config.preprocess);
    if (seg.unmasked_count() == 0) continue;
    if (unit->kind != UnitKind::Pursuit) {
      c.push_back(unmasked_rows(seg.readings, seg.masked).colwise().mean());
      u.push_back(unmasked_rows(seg.gaze, seg.masked).colwise().mean());
      continue;
    }
    const Eigen::MatrixXd r = unmasked_rows(seg.readings, seg.masked);
    const Eigen::MatrixXd g = unmasked_rows(seg.gaze, seg.masked);
    const Eigen::Index n = r.rows(), w = std::min<Eigen::Index>(config.pursuit_window, n);
    for (int k = 0; k < config.pursuit_points; ++k) {
      const auto centre = static_cast<Eigen::Index>(
          std::llround((k + 0.5) * static_cast<double>(n) / config.pursuit_points));
      const Eigen::Index lo = std::clamp<Eigen::Index>(centre - w / 2, 0, n - w);
      c.push_back(r.middleRows(lo, w).colwise().mean());
      u.push_back(g.middleRows(lo, w).colwise().mean());
    }
  }
  if (c.size() < 2) throw InvalidArgument("LED2Gaze calibration needs at least two vectors");
  const Eigen::MatrixXd calibration = stack_rows(c, dataset.channels());
  m.scaler = fit_scaler(calibration);
  m.gpr = gpr_fit(m.scaler.apply(calibration), stack_rows(u, 2), config.kernel, config.gpr);
  return m;
}

Mode model_mode(const GazeModel& model) {
  return std::holds_alternative<NextGazeModel>(model) ? Mode::NextGaze : Mode::Led2Gaze;
}

Eigen::Index model_channels(const GazeModel& model) {
  if (const auto* m = std::get_if<NextGazeModel>(&model)) return m->scaler.min.size();
  return std::get<Led2GazeModel>(model).gpr.calibration.cols();
}

// -------------------------------------------------------------- evaluation

const SubsetReport& EvalReport::subset(const std::string& name) const {
  for (const auto& s : subsets)
    if (s.name == name) return s;
  throw InvalidArgument("report has no subset '" + name + "'");
}

const ErrorStats& EvalReport::headline(const std::string& name) const {
  const SubsetReport& s = subset(name);
  return smoothed ? s.smoothed : s.raw;
}

EvalReport evaluate_model(const GazeModel& model, const GazeDataset& dataset,
                          const EvalOptions& options) {
  if (!(options.ewma_alpha > 0.0 && options.ewma_alpha <= 1.0))
    throw InvalidArgument("EWMA alpha must lie in (0, 1]");
  const Mode mode = model_mode(model);
  if (mode != dataset.mode) throw InvalidArgument("model and dataset modes differ");
  if (model_channels(model) != dataset.channels())
    throw InvalidArgument("model expects " + std::to_string(model_channels(model)) +
                          " channels but the dataset has " + std::to_string(dataset.channels()));
  const auto& pre = std::visit([](const auto& m) -> const PreprocessConfig& { return m.preprocess; }, model);
  const auto& thresholds =
      std::visit([](const auto& m) -> const Eigen::VectorXd& { return m.thresholds; }, model);

  struct Bucket {
    std::vector<double> raw, smooth;
  };
  Bucket pursuit, fixation, central, overall;
  EvalReport report;
  report.mode = mode;
  report.ewma_alpha = options.ewma_alpha;
  report.smoothed = options.smoothed;
  for (const auto& unit : dataset.units) {
    if (unit.role() != SegmentRole::Test) continue;
    const Segment seg = preprocess_unit(unit, thresholds, pre);
    report.masked += seg.size() - seg.unmasked_count();
    if (seg.unmasked_count() == 0) continue;
    const Eigen::MatrixXd x = unmasked_rows(seg.readings, seg.masked);
    const Eigen::MatrixXd truth = unmasked_rows(seg.gaze, seg.masked);
    const Eigen::MatrixXd pred = std::visit([&](const auto& m) { return m.predict(x); }, model);
    EwmaState ewma{options.ewma_alpha, std::nullopt};
    const bool is_central = unit.kind != UnitKind::Pursuit && truth.cwiseAbs().maxCoeff() <= 10.0 + 1e-9;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      const Eigen::Vector2d t = truth.row(i).transpose();
      const double raw = angular_error(pred.row(i).transpose(), t);
      const double sm = angular_error(ewma_step(ewma, pred.row(i).transpose()), t);
      Bucket& b = unit.kind == UnitKind::Pursuit ? pursuit : fixation;
      for (Bucket* k : {&b, &overall}) {
        k->raw.push_back(raw);
        k->smooth.push_back(sm);
      }
      if (is_central) {
        central.raw.push_back(raw);
        central.smooth.push_back(sm);
      }
    }
  }
  const auto add = [&](const std::string& name, const Bucket& b, ReferenceFigures ref) {
    if (b.raw.empty()) return;
    const auto stats = [](const std::vector<double>& v) {
      return error_stats(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    report.subsets.push_back({name, stats(b.raw), stats(b.smooth), ref});
  };
  if (mode == Mode::NextGaze) {
    add("pursuit", pursuit, {1.68, std::nullopt, 0.56});
    add("fixation", fixation, {2.67, std::nullopt, 0.98});
    add("central", central, {2.35, std::nullopt, 0.58});
    add("overall", overall, {});
  } else {
    add("grid", fixation, {1.57, 1.12, 2.00});
    add("overall", overall, {1.57, 1.12, 2.00});
  }
  if (report.subsets.empty()) throw InvalidArgument("evaluate: empty test split");
  return report;
}

}  // namespace sparsegaze
