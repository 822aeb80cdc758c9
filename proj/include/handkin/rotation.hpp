#pragma once

#include <array>

#include "handkin/types.hpp"

namespace handkin {

// Below this angle the closed-form coefficients of Rodrigues' formula are
// replaced by their Taylor series.
inline constexpr double kSmallAngle = 1e-3;

Mat3 skew(const Vec3& v);

// Axis-angle vector -> rotation matrix.
Mat3 rodrigues(const Vec3& axis_angle);

struct RotationJacobian {
  Mat3 rotation;
  std::array<Mat3, 3> d_rotation;  // dR / d(axis_angle[i])
};

RotationJacobian rodrigues_with_jacobian(const Vec3& axis_angle);

// Rotation matrix -> axis-angle with angle in [0, pi].
Vec3 log_rotation(const Mat3& rotation);

}  // namespace handkin
