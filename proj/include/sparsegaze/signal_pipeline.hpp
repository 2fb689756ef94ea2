#pragma once

#include "sparsegaze/core.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string_view>
#include <vector>

namespace sparsegaze {

enum class SegmentRole { Train, Test };

std::string_view to_string(SegmentRole role);
SegmentRole segment_role_from_string(std::string_view s);

/// A contiguous run of frames recorded while following one path or
/// holding one fixation. Rows are samples; readings has one column per
/// sensor, gaze holds (h, v) in degrees.
struct Segment {
  int id = 0;
  SegmentRole role = SegmentRole::Train;
  Eigen::VectorXd t;
  Eigen::MatrixXd readings;
  Eigen::MatrixXd gaze;
  std::vector<bool> masked;

  Eigen::Index size() const { return t.size(); }
  Eigen::Index channels() const { return readings.cols(); }
  Eigen::Index unmasked_count() const;
  void validate() const;
};

namespace detail {

// Weights that evaluate, at offset `at`, the degree-`order` least-squares
// polynomial through samples at offsets lo..hi (relative to the output).
template <typename Scalar>
VectorX<Scalar> sg_weights(int lo, int hi, int order, int at) {
  const int m = hi - lo + 1;
  const int deg = std::min(order, m - 1);
  const Scalar scale = std::max<Scalar>(Scalar(std::max(std::abs(lo), std::abs(hi))), Scalar(1));
  MatrixX<Scalar> a(m, deg + 1);
  for (int j = 0; j < m; ++j) {
    const Scalar x = Scalar(lo + j) / scale;
    Scalar p = 1;
    for (int k = 0; k <= deg; ++k, p *= x) a(j, k) = p;
  }
  VectorX<Scalar> basis(deg + 1);
  Scalar p = 1;
  for (int k = 0; k <= deg; ++k, p *= Scalar(at) / scale) basis(k) = p;
  // w = A (A^T A)^-1 basis, via QR for conditioning.
  const Eigen::HouseholderQR<MatrixX<Scalar>> qr(a);
  const MatrixX<Scalar> r =
      qr.matrixQR().topRows(deg + 1).template triangularView<Eigen::Upper>();
  const VectorX<Scalar> y = r.transpose().template triangularView<Eigen::Lower>().solve(basis);
  VectorX<Scalar> padded = VectorX<Scalar>::Zero(m);
  padded.head(deg + 1) = y;
  return qr.householderQ() * padded;
}

}  // namespace detail

/// Savitzky-Golay smoothing of every column. Interior samples use the
/// symmetric window; the first and last window/2 samples are fitted on the
/// window truncated at the series boundary (degree capped by its length).
template <typename Derived>
MatrixX<typename Derived::Scalar> savitzky_golay(const Eigen::MatrixBase<Derived>& signal,
                                                 int window = 11, int order = 3) {
  using Scalar = typename Derived::Scalar;
  if (window < 1 || window % 2 == 0) throw InvalidArgument("savitzky_golay: window must be odd");
  if (order < 0 || order >= window)
    throw InvalidArgument("savitzky_golay: order must lie in [0, window)");
  const Eigen::Index n = signal.rows();
  if (n < window) throw InvalidArgument("savitzky_golay: series shorter than the window");
  const int h = window / 2;
  MatrixX<Scalar> out(n, signal.cols());
  const VectorX<Scalar> centre = detail::sg_weights<Scalar>(-h, h, order, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int lo = static_cast<int>(std::max<Eigen::Index>(i - h, 0) - i);
    const int hi = static_cast<int>(std::min<Eigen::Index>(i + h, n - 1) - i);
    const auto rows = signal.middleRows(i + lo, hi - lo + 1);
    if (lo == -h && hi == h) {
      out.row(i) = centre.transpose() * rows;
    } else {
      out.row(i) = detail::sg_weights<Scalar>(lo, hi, order, 0).transpose() * rows;
    }
  }
  return out;
}

/// Per-channel blink thresholds: factor * MAD(signal - filtered), floored
/// at `floor_fraction` of the channel's range.
Eigen::VectorXd blink_thresholds(const Eigen::MatrixXd& signal, const Eigen::MatrixXd& filtered,
                                 double factor = 4.0, double floor_fraction = 0.01);

struct BlinkMask {
  std::vector<bool> masked;
  Eigen::Index count = 0;
  bool all_masked = false;
};

/// Masks samples where any channel deviates from its filtered value by more
/// than that channel's threshold, then dilates the mask by `margin`.
BlinkMask remove_blinks(const Eigen::MatrixXd& signal, const Eigen::MatrixXd& filtered,
                        const Eigen::VectorXd& thresholds, int margin = 2);
BlinkMask remove_blinks(const Eigen::MatrixXd& signal, const Eigen::MatrixXd& filtered,
                        double threshold, int margin = 2);

/// Resamples the unmasked frames of a segment to `n` points uniform in time
/// between its first and last unmasked sample, interpolating readings and
/// gaze linearly. The result has no masked samples.
Segment downsample_segment(const Segment& segment, int n = 100);

struct Scaler {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
  std::vector<bool> degenerate;

  /// (x - min) / (max - min) per channel, unclamped; degenerate channels map to 0.
  template <typename Derived>
  Eigen::MatrixXd apply(const Eigen::MatrixBase<Derived>& rows) const {
    Eigen::MatrixXd out(rows.rows(), rows.cols());
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      if (degenerate[static_cast<std::size_t>(c)])
        out.col(c).setZero();
      else
        out.col(c) = (rows.col(c).array() - min(c)) / (max(c) - min(c));
    }
    return out;
  }
};

/// Rows are frames, columns channels.
Scaler fit_scaler(const Eigen::MatrixXd& training);

struct PcaBasis {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // rows are orthonormal directions
  Eigen::VectorXd explained;   // variance fractions, non-increasing

  Eigen::Index count() const { return components.rows(); }

  template <typename Derived>
  Eigen::MatrixXd transform(const Eigen::MatrixBase<Derived>& rows) const {
    return (rows.rowwise() - mean.transpose()) * components.transpose();
  }
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& reduced) const {
    return (reduced * components).rowwise() + mean.transpose();
  }
};

/// Eigen-decomposition of the training covariance. Without `n_components`
/// every direction is kept; otherwise the data must have at least that
/// rank (NumericalError otherwise, naming the achieved rank).
PcaBasis pca_fit(const Eigen::MatrixXd& training, std::optional<int> n_components = std::nullopt);

}  // namespace sparsegaze
