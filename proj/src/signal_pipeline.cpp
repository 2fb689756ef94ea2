#include "sparsegaze/signal_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sparsegaze {

std::string_view to_string(SegmentRole role) { return role == SegmentRole::Train ? "train" : "test"; }

SegmentRole segment_role_from_string(std::string_view s) {
  if (s == "train") return SegmentRole::Train;
  if (s == "test") return SegmentRole::Test;
  throw InvalidArgument("unknown segment role '" + std::string(s) + "'");
}

Eigen::Index Segment::unmasked_count() const {
  return static_cast<Eigen::Index>(std::count(masked.begin(), masked.end(), false));
}

void Segment::validate() const {
  const Eigen::Index n = t.size();
  if (readings.rows() != n || gaze.rows() != n || static_cast<Eigen::Index>(masked.size()) != n)
    throw InvalidArgument("segment " + std::to_string(id) + ": field lengths differ");
  if (gaze.cols() != 2) throw InvalidArgument("segment gaze must have two columns");
  for (Eigen::Index i = 1; i < n; ++i)
    if (!(t(i) > t(i - 1)))
      throw InvalidArgument("segment " + std::to_string(id) + ": timestamps not increasing");
}

namespace {

double median(std::vector<double> v) {
  const std::size_t m = v.size();
  std::nth_element(v.begin(), v.begin() + m / 2, v.end());
  const double hi = v[m / 2];
  if (m % 2) return hi;
  return 0.5 * (*std::max_element(v.begin(), v.begin() + m / 2) + hi);
}

}  // namespace

Eigen::VectorXd blink_thresholds(const Eigen::MatrixXd& signal, const Eigen::MatrixXd& filtered,
                                 double factor, double floor_fraction) {
  if (signal.rows() != filtered.rows() || signal.cols() != filtered.cols())
    throw InvalidArgument("blink_thresholds: signal and filtered differ in shape");
  if (signal.rows() == 0) throw InvalidArgument("blink_thresholds: empty signal");
  Eigen::VectorXd out(signal.cols());
  for (Eigen::Index c = 0; c < signal.cols(); ++c) {
    const Eigen::VectorXd r = signal.col(c) - filtered.col(c);
    const double med = median({r.data(), r.data() + r.size()});
    std::vector<double> dev(static_cast<std::size_t>(r.size()));
    for (Eigen::Index i = 0; i < r.size(); ++i) dev[static_cast<std::size_t>(i)] = std::abs(r(i) - med);
    const double range = signal.col(c).maxCoeff() - signal.col(c).minCoeff();
    out(c) = std::max(factor * median(std::move(dev)), floor_fraction * range);
  }
  return out;
}

BlinkMask remove_blinks(const Eigen::MatrixXd& signal, const Eigen::MatrixXd& filtered,
                        const Eigen::VectorXd& thresholds, int margin) {
  if (signal.rows() != filtered.rows() || signal.cols() != filtered.cols())
    throw InvalidArgument("remove_blinks: signal and filtered differ in shape");
  if (thresholds.size() != signal.cols())
    throw InvalidArgument("remove_blinks: one threshold per channel expected");
  if (margin < 0) throw InvalidArgument("remove_blinks: margin must be non-negative");
  const Eigen::Index n = signal.rows();
  std::vector<bool> hit(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i)
    hit[static_cast<std::size_t>(i)] =
        ((signal.row(i) - filtered.row(i)).cwiseAbs().transpose().array() > thresholds.array()).any();
  BlinkMask out;
  out.masked.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!hit[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = std::max<Eigen::Index>(i - margin, 0);
         j <= std::min<Eigen::Index>(i + margin, n - 1); ++j)
      out.masked[static_cast<std::size_t>(j)] = true;
  }
  out.count = static_cast<Eigen::Index>(std::count(out.masked.begin(), out.masked.end(), true));
  out.all_masked = n > 0 && out.count == n;
  return out;
}

BlinkMask remove_blinks(const Eigen::MatrixXd& signal, const Eigen::MatrixXd& filtered,
                        double threshold, int margin) {
  return remove_blinks(signal, filtered, Eigen::VectorXd::Constant(signal.cols(), threshold),
                       margin);
}

Segment downsample_segment(const Segment& segment, int n) {
  segment.validate();
  if (n < 2) throw InvalidArgument("downsample_segment: need at least two output points");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < segment.size(); ++i)
    if (!segment.masked[static_cast<std::size_t>(i)]) keep.push_back(i);
  if (keep.size() < 2)
    throw InvalidArgument("downsample_segment: segment " + std::to_string(segment.id) +
                          " has fewer than two unmasked samples");
  Segment out;
  out.id = segment.id;
  out.role = segment.role;
  out.t.resize(n);
  out.readings.resize(n, segment.channels());
  out.gaze.resize(n, 2);
  out.masked.assign(static_cast<std::size_t>(n), false);
  const double t0 = segment.t(keep.front()), t1 = segment.t(keep.back());
  std::size_t k = 0;
  for (int j = 0; j < n; ++j) {
    const double tj = j == n - 1 ? t1 : t0 + (t1 - t0) * j / (n - 1);
    while (k + 2 < keep.size() && segment.t(keep[k + 1]) <= tj) ++k;
    const Eigen::Index a = keep[k], b = keep[k + 1];
    const double w = std::clamp((tj - segment.t(a)) / (segment.t(b) - segment.t(a)), 0.0, 1.0);
    out.t(j) = tj;
    out.readings.row(j) = (1.0 - w) * segment.readings.row(a) + w * segment.readings.row(b);
    out.gaze.row(j) = (1.0 - w) * segment.gaze.row(a) + w * segment.gaze.row(b);
  }
  return out;
}

Scaler fit_scaler(const Eigen::MatrixXd& training) {
  if (training.rows() == 0) throw InvalidArgument("fit_scaler: no training frames");
  Scaler s;
  s.min = training.colwise().minCoeff().transpose();
  s.max = training.colwise().maxCoeff().transpose();
  s.degenerate.resize(static_cast<std::size_t>(training.cols()));
  for (Eigen::Index c = 0; c < training.cols(); ++c)
    s.degenerate[static_cast<std::size_t>(c)] = !(s.max(c) > s.min(c));
  return s;
}

PcaBasis pca_fit(const Eigen::MatrixXd& training, std::optional<int> n_components) {
  const Eigen::Index rows = training.rows(), d = training.cols();
  const int k = n_components.value_or(static_cast<int>(d));
  if (k < 1 || k > d) throw InvalidArgument("pca_fit: n_components must lie in [1, channels]");
  if (rows < std::max<Eigen::Index>(k, 2)) throw InvalidArgument("pca_fit: too few frames");
  PcaBasis basis;
  basis.mean = training.colwise().mean().transpose();
  const Eigen::MatrixXd centred = training.rowwise() - basis.mean.transpose();
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(rows - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("pca_fit: eigen-decomposition failed");
  // Eigen sorts ascending; reverse to descending variance.
  const Eigen::VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const double total = values.sum();
  if (n_components) {
    const double tol = values(0) * static_cast<double>(d) * std::numeric_limits<double>::epsilon() * 16;
    const Eigen::Index rank = (values.array() > tol).count();
    if (rank < k)
      throw NumericalError("pca_fit: data rank " + std::to_string(rank) + " is below the " +
                           std::to_string(k) + " requested components");
  }
  basis.components = vectors.leftCols(k).transpose();
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::Index arg;
    basis.components.row(i).cwiseAbs().maxCoeff(&arg);
    if (basis.components(i, arg) < 0.0) basis.components.row(i) *= -1.0;
  }
  basis.explained = total > 0.0 ? Eigen::VectorXd(values.head(k) / total) : Eigen::VectorXd::Zero(k);
  return basis;
}

}  // namespace sparsegaze
