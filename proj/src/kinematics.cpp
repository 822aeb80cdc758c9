#include "handkin/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "handkin/error.hpp"
#include "handkin/rotation.hpp"

namespace handkin {

namespace {

constexpr int kPoseFeatures = kPoseBasisPerJoint * (kArticulatedCount - 1);

void validate_pose(const FullPose& pose) {
  if (!pose.global_rot.allFinite() || !pose.articulation.allFinite() ||
      !pose.translation.allFinite())
    throw NumericalError("pose contains non-finite values");
  for (int a = 0; a < kArticulatedCount; ++a) {
    const double angle =
        a == 0 ? pose.global_rot.norm() : pose.articulation.segment<3>(3 * (a - 1)).norm();
    if (angle >= std::numbers::pi)
      throw DomainError(std::string("axis-angle magnitude of ") +
                        joint_name(articulated_to_joint(a)) + " must be below pi");
  }
}

}  // namespace

const std::vector<int> KinematicsEvaluator::kNoIndices{};

KinematicsEvaluator::KinematicsEvaluator(const HandModel& model, ForwardOptions options)
    : model_(model), options_(options) {
  use_pose_basis_ = options_.pose_blendshapes && model_.has_pose_basis();
  all_indices_.resize(model_.vertex_count());
  std::iota(all_indices_.begin(), all_indices_.end(), 0);
}

void KinematicsEvaluator::evaluate(const FullPose& pose, const ShapeParams& beta,
                                   VertexSubset subset) {
  if (!pose.global_rot.allFinite() || !pose.articulation.allFinite() ||
      !pose.translation.allFinite() || !beta.beta.allFinite())
    throw NumericalError("non-finite kinematic parameters");

  translation_ = pose.translation;
  rest_ = rest_joints(model_, beta);
  const auto& rj = rest_.joints;

  for (int a = 0; a < kArticulatedCount; ++a) {
    const Vec3 w = a == 0 ? pose.global_rot : Vec3(pose.articulation.segment<3>(3 * (a - 1)));
    auto jac = rodrigues_with_jacobian(w);
    local_[a] = jac.rotation;
    d_local_[a] = jac.d_rotation;
  }

  global_[0] = {local_[0], local_[0] * rj.row(0).transpose()};
  for (int a = 1; a < kArticulatedCount; ++a) {
    const int j = articulated_to_joint(a);
    const int p = kParents[j];
    const auto& gp = global_[joint_to_articulated(p)];
    const Vec3 bone = (rj.row(j) - rj.row(p)).transpose();
    global_[a] = {gp.rotation * local_[a], gp.rotation * bone + gp.translation};
  }
  for (int a = 0; a < kArticulatedCount; ++a) {
    const Vec3 jr = rj.row(articulated_to_joint(a)).transpose();
    skinning_[a] = {global_[a].rotation, global_[a].translation - global_[a].rotation * jr};
  }

  posed_skeleton_.joints.resize(kJointCount, 3);
  for (int j = 0; j < kJointCount; ++j) {
    const int a = joint_to_articulated(j);
    Vec3 x;
    if (a >= 0) {
      x = global_[a].translation;
    } else {
      const int p = kParents[j];
      const auto& gp = global_[joint_to_articulated(p)];
      x = gp.rotation * (rj.row(j) - rj.row(p)).transpose() + gp.translation;
    }
    posed_skeleton_.joints.row(j) = (x + translation_).transpose();
  }

  switch (subset) {
    case VertexSubset::all: indices_ = &all_indices_; break;
    case VertexSubset::regressor_support: indices_ = &model_.regressor_support(); break;
    case VertexSubset::none: indices_ = &kNoIndices; break;
  }
  const auto& idx = *indices_;
  const auto n = static_cast<Eigen::Index>(idx.size());

  regressor_rows_.clear();
  if (subset != VertexSubset::none) {
    if (subset == VertexSubset::all) {
      regressor_rows_ = model_.regressor_support();
    } else {
      regressor_rows_.resize(idx.size());
      std::iota(regressor_rows_.begin(), regressor_rows_.end(), 0);
    }
  }

  Eigen::Matrix<double, kPoseFeatures, 1> pose_feature;
  if (use_pose_basis_) {
    for (int a = 1; a < kArticulatedCount; ++a) {
      const Mat3 d = local_[a] - Mat3::Identity();
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) pose_feature[9 * (a - 1) + 3 * r + c] = d(r, c);
    }
  }

  blended_.resize(n, 3);
  posed_vertices_.resize(n, 3);
  const auto& sb = model_.shape_basis();
  const auto& pb = model_.pose_basis();
  for (Eigen::Index r = 0; r < n; ++r) {
    const int v = idx[r];
    Vec3 t = model_.rest_vertices().row(v).transpose() + sb.middleRows<3>(3 * v) * beta.beta;
    if (use_pose_basis_) t += pb.middleRows<3>(3 * v) * pose_feature;
    blended_.row(r) = t.transpose();
    Vec3 out = translation_;
    for (const auto& inf : model_.influences(v))
      out += inf.weight * skinning_[inf.joint].apply(t);
    posed_vertices_.row(r) = out.transpose();
  }

  if (!posed_vertices_.allFinite() || !posed_skeleton_.joints.allFinite())
    throw NumericalError("non-finite values in forward kinematics");
}

Skeleton KinematicsEvaluator::regressed_joints() const {
  const auto& support = model_.regressor_support();
  if (regressor_rows_.size() != support.size())
    throw ShapeError("evaluated vertex subset does not cover the joint regressor");
  const auto& reg = model_.joint_regressor();
  Skeleton s;
  s.joints.setZero(kJointCount, 3);
  for (std::size_t i = 0; i < support.size(); ++i)
    for (int j = 0; j < kJointCount; ++j) {
      const double w = reg(j, support[i]);
      if (w != 0.0) s.joints.row(j) += w * posed_vertices_.row(regressor_rows_[i]);
    }
  return s;
}

PoseGradient KinematicsEvaluator::backward_regressed(const Points3& d_regressed) const {
  const auto& support = model_.regressor_support();
  if (regressor_rows_.size() != support.size())
    throw ShapeError("evaluated vertex subset does not cover the joint regressor");
  if (d_regressed.rows() != kJointCount) throw ShapeError("regressed-joint gradient must be 21 x 3");
  const auto& reg = model_.joint_regressor();
  Points3 dv = Points3::Zero(posed_vertices_.rows(), 3);
  for (std::size_t i = 0; i < support.size(); ++i)
    for (int j = 0; j < kJointCount; ++j) {
      const double w = reg(j, support[i]);
      if (w != 0.0) dv.row(regressor_rows_[i]) += w * d_regressed.row(j);
    }
  return backward(dv, Points3());
}

PoseGradient KinematicsEvaluator::backward(const Points3& d_vertices,
                                           const Points3& d_joints) const {
  const bool has_v = d_vertices.rows() > 0;
  const bool has_j = d_joints.rows() > 0;
  if (has_v && d_vertices.rows() != posed_vertices_.rows())
    throw ShapeError("vertex gradient rows do not match the evaluated subset");
  if (has_j && d_joints.rows() != kJointCount) throw ShapeError("joint gradient must be 21 x 3");

  PoseGradient g;
  const auto& rj = rest_.joints;
  std::array<Mat3, kArticulatedCount> g_rot;      // d/d global_[a].rotation
  std::array<Vec3, kArticulatedCount> g_trans;    // d/d global_[a].translation
  std::array<Mat3, kArticulatedCount> g_local;    // d/d local_[a]
  for (int a = 0; a < kArticulatedCount; ++a) {
    g_rot[a].setZero();
    g_trans[a].setZero();
    g_local[a].setZero();
  }
  Points3 g_rest = Points3::Zero(kJointCount, 3);

  // Skinning.
  if (has_v) {
    const auto& idx = *indices_;
    std::array<Mat3, kArticulatedCount> g_skin_rot;
    std::array<Vec3, kArticulatedCount> g_skin_trans;
    for (int a = 0; a < kArticulatedCount; ++a) {
      g_skin_rot[a].setZero();
      g_skin_trans[a].setZero();
    }
    Eigen::Matrix<double, kPoseFeatures, 1> g_feature = Eigen::Matrix<double, kPoseFeatures, 1>::Zero();
    const auto& sb = model_.shape_basis();
    const auto& pb = model_.pose_basis();
    for (Eigen::Index r = 0; r < d_vertices.rows(); ++r) {
      const Vec3 gv = d_vertices.row(r).transpose();
      if (gv.isZero(0.0)) continue;
      g.translation += gv;
      const Vec3 t = blended_.row(r).transpose();
      Vec3 g_blend = Vec3::Zero();
      for (const auto& inf : model_.influences(idx[r])) {
        const Vec3 wg = inf.weight * gv;
        g_skin_rot[inf.joint] += wg * t.transpose();
        g_skin_trans[inf.joint] += wg;
        g_blend += skinning_[inf.joint].rotation.transpose() * wg;
      }
      const int v = idx[r];
      g.beta += sb.middleRows<3>(3 * v).transpose() * g_blend;
      if (use_pose_basis_) g_feature += pb.middleRows<3>(3 * v).transpose() * g_blend;
    }
    for (int a = 0; a < kArticulatedCount; ++a) {
      const Vec3 jr = rj.row(articulated_to_joint(a)).transpose();
      // skinning = (R, t - R j)
      g_rot[a] += g_skin_rot[a] - g_skin_trans[a] * jr.transpose();
      g_trans[a] += g_skin_trans[a];
      g_rest.row(articulated_to_joint(a)) -= (global_[a].rotation.transpose() * g_skin_trans[a]).transpose();
    }
    if (use_pose_basis_) {
      for (int a = 1; a < kArticulatedCount; ++a)
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) g_local[a](r, c) += g_feature[9 * (a - 1) + 3 * r + c];
    }
  }

  // Posed skeleton.
  if (has_j) {
    for (int j = 0; j < kJointCount; ++j) {
      const Vec3 gj = d_joints.row(j).transpose();
      g.translation += gj;
      const int a = joint_to_articulated(j);
      if (a >= 0) {
        g_trans[a] += gj;
      } else {
        const int p = kParents[j];
        const int pa = joint_to_articulated(p);
        const Vec3 bone = (rj.row(j) - rj.row(p)).transpose();
        g_rot[pa] += gj * bone.transpose();
        g_trans[pa] += gj;
        const Vec3 gb = global_[pa].rotation.transpose() * gj;
        g_rest.row(j) += gb.transpose();
        g_rest.row(p) -= gb.transpose();
      }
    }
  }

  // Kinematic chain, children before parents (indices are topologically sorted).
  for (int a = kArticulatedCount - 1; a >= 1; --a) {
    const int j = articulated_to_joint(a);
    const int p = kParents[j];
    const int pa = joint_to_articulated(p);
    const auto& gp = global_[pa];
    const Vec3 bone = (rj.row(j) - rj.row(p)).transpose();
    // global_[a] = (Rp * L, Rp * bone + tp)
    g_rot[pa] += g_rot[a] * local_[a].transpose() + g_trans[a] * bone.transpose();
    g_local[a] += gp.rotation.transpose() * g_rot[a];
    g_trans[pa] += g_trans[a];
    const Vec3 gb = gp.rotation.transpose() * g_trans[a];
    g_rest.row(j) += gb.transpose();
    g_rest.row(p) -= gb.transpose();
  }
  // global_[0] = (L0, L0 * j0)
  {
    const Vec3 j0 = rj.row(0).transpose();
    g_local[0] += g_rot[0] + g_trans[0] * j0.transpose();
    g_rest.row(0) += (local_[0].transpose() * g_trans[0]).transpose();
  }

  for (int a = 0; a < kArticulatedCount; ++a) {
    Vec3 gw;
    for (int i = 0; i < 3; ++i) gw[i] = (g_local[a].array() * d_local_[a][i].array()).sum();
    if (a == 0)
      g.global_rot = gw;
    else
      g.articulation.segment<3>(3 * (a - 1)) = gw;
  }

  for (int s = 0; s < kShapeCount; ++s)
    g.beta[s] += (g_rest.array() * model_.shape_joints()[s].array()).sum();

  return g;
}

ForwardResult forward(const HandModel& model, const FullPose& pose, const ShapeParams& beta,
                      const ForwardOptions& options) {
  validate_pose(pose);
  KinematicsEvaluator eval(model, options);
  eval.evaluate(pose, beta, VertexSubset::all);
  return {Mesh{eval.vertices(), model.faces()}, eval.skeleton()};
}

}  // namespace handkin
