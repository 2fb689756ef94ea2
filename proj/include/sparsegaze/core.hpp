#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sparsegaze {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kPi = std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or violated preconditions.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

// Iterative solve failed to converge.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

// Matrix factorization failure, divergence, rank deficiency.
class NumericalError : public Error {
public:
  using Error::Error;
};

// A clipped (saturated) image was about to be integrated. Context fields
// are -1 / NaN when unknown.
class SaturationError : public Error {
public:
  explicit SaturationError(const std::string& what, int sensor = -1, int emitter = -1,
                           double gaze_h = std::nan(""), double gaze_v = std::nan(""))
      : Error(what), sensor(sensor), emitter(emitter), gaze_h(gaze_h), gaze_v(gaze_v) {}

  int sensor;
  int emitter;
  double gaze_h;
  double gaze_v;
};

/// Unit gaze vector for (horizontal, vertical) angles in degrees.
///
/// The forward axis (+z) is yawed by `h_deg` about +y (positive toward +x)
/// and then pitched by `v_deg` (positive toward +y):
/// (cos v sin h, sin v, cos v cos h).
inline Vec3 gaze_direction(double h_deg, double v_deg) {
  const double h = deg2rad(h_deg), v = deg2rad(v_deg);
  return {std::cos(v) * std::sin(h), std::sin(v), std::cos(v) * std::cos(h)};
}

/// Rotation taking +z onto gaze_direction(h, v): yaw about y after pitch about x.
inline Mat3 gaze_rotation(double h_deg, double v_deg) {
  const Eigen::AngleAxisd yaw(deg2rad(h_deg), Vec3::UnitY());
  const Eigen::AngleAxisd pitch(-deg2rad(v_deg), Vec3::UnitX());
  return (yaw * pitch).toRotationMatrix();
}

}  // namespace sparsegaze
