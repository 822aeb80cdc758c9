#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace handkin {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// N x 3 point array, one point per row (millimeters unless stated).
using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Rigid transform x -> rotation * x + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
};

}  // namespace handkin
