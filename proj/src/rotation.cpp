#include "handkin/rotation.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace handkin {

namespace {

// Coefficients of R = I + a K + b K^2 and the radial derivatives
// c = a'(theta) / theta, d = b'(theta) / theta.
struct RodriguesCoefficients {
  double a, b, c, d;
};

RodriguesCoefficients coefficients(double theta) {
  const double t2 = theta * theta;
  if (theta < kSmallAngle) {
    const double t4 = t2 * t2;
    return {1.0 - t2 / 6.0 + t4 / 120.0, 0.5 - t2 / 24.0 + t4 / 720.0,
            -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0,
            -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0};
  }
  const double s = std::sin(theta);
  const double co = std::cos(theta);
  return {s / theta, (1.0 - co) / t2, (theta * co - s) / (t2 * theta),
          (theta * s - 2.0 * (1.0 - co)) / (t2 * t2)};
}

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return k;
}

Mat3 rodrigues(const Vec3& axis_angle) {
  const auto co = coefficients(axis_angle.norm());
  const Mat3 k = skew(axis_angle);
  return Mat3::Identity() + co.a * k + co.b * (k * k);
}

RotationJacobian rodrigues_with_jacobian(const Vec3& axis_angle) {
  const auto co = coefficients(axis_angle.norm());
  const Mat3 k = skew(axis_angle);
  const Mat3 k2 = k * k;
  RotationJacobian out;
  out.rotation = Mat3::Identity() + co.a * k + co.b * k2;
  for (int i = 0; i < 3; ++i) {
    const Mat3 e = skew(Vec3::Unit(i));
    out.d_rotation[i] = co.a * e + co.b * (e * k + k * e) +
                        (co.c * axis_angle[i]) * k + (co.d * axis_angle[i]) * k2;
  }
  return out;
}

Vec3 log_rotation(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

}  // namespace handkin
