#include "handkin/hand_model.hpp"

#include <cmath>
#include <string>

#include "handkin/error.hpp"

namespace handkin {

namespace {

constexpr double kWeightSumTolerance = 1e-6;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError("invalid hand model: " + what);
}

}  // namespace

const char* finger_name(Finger f) {
  static constexpr const char* names[] = {"thumb", "index", "middle", "ring", "little"};
  return names[static_cast<int>(f)];
}

const char* joint_name(int joint) {
  static constexpr const char* names[kJointCount] = {
      "wrist",      "thumb_mcp",  "thumb_pip",  "thumb_dip",  "thumb_tip",
      "index_mcp",  "index_pip",  "index_dip",  "index_tip",  "middle_mcp",
      "middle_pip", "middle_dip", "middle_tip", "ring_mcp",   "ring_pip",
      "ring_dip",   "ring_tip",   "little_mcp", "little_pip", "little_dip",
      "little_tip"};
  return names[joint];
}

HandModel::HandModel(HandModelData data) : data_(std::move(data)) {
  const auto v = data_.rest_vertices.rows();
  require(v >= 1, "no vertices");
  require(data_.rest_vertices.allFinite(), "non-finite rest vertices");
  require(data_.shape_basis.rows() == 3 * v && data_.shape_basis.cols() == kShapeCount,
          "shape basis must be 3V x 10");
  require(data_.shape_basis.allFinite(), "non-finite shape basis");
  if (data_.pose_basis.size() > 0) {
    require(data_.pose_basis.rows() == 3 * v &&
                data_.pose_basis.cols() == kPoseBasisPerJoint * (kArticulatedCount - 1),
            "pose basis must be 3V x 135");
    require(data_.pose_basis.allFinite(), "non-finite pose basis");
  }
  require(data_.parents == kParents, "parents must encode the 21-joint hand tree");

  const auto& reg = data_.joint_regressor;
  require(reg.rows() == kJointCount && reg.cols() == v, "joint regressor must be 21 x V");
  require(reg.allFinite() && reg.minCoeff() >= 0.0, "joint regressor must be finite and nonnegative");
  for (int j = 0; j < kJointCount; ++j)
    require(std::abs(reg.row(j).sum() - 1.0) <= kWeightSumTolerance,
            std::string("joint regressor row ") + joint_name(j) + " does not sum to 1");

  const auto& w = data_.skinning_weights;
  require(w.rows() == v && w.cols() == kArticulatedCount, "skinning weights must be V x 16");
  require(w.allFinite() && w.minCoeff() >= 0.0, "skinning weights must be finite and nonnegative");
  influences_.resize(v);
  for (Eigen::Index i = 0; i < v; ++i) {
    require(std::abs(w.row(i).sum() - 1.0) <= kWeightSumTolerance,
            "skinning weights of vertex " + std::to_string(i) + " do not sum to 1");
    for (int k = 0; k < kArticulatedCount; ++k)
      if (w(i, k) != 0.0) influences_[i].push_back({k, w(i, k)});
  }

  if (data_.faces.size() > 0) {
    require(data_.faces.minCoeff() >= 0 && data_.faces.maxCoeff() < v, "face index out of range");
  }

  for (Eigen::Index i = 0; i < v; ++i)
    if ((reg.col(i).array() != 0.0).any()) regressor_support_.push_back(static_cast<int>(i));

  template_joints_ = reg * data_.rest_vertices;
  for (int s = 0; s < kShapeCount; ++s) {
    const Eigen::Map<const Points3> offsets(data_.shape_basis.col(s).data(), v, 3);
    shape_joints_[s] = reg * offsets;
  }
}

Points3 shape_offset(const HandModel& model, const ShapeParams& beta) {
  if (!beta.beta.allFinite()) throw NumericalError("non-finite shape parameters");
  const Eigen::VectorXd flat = model.shape_basis() * beta.beta;
  return Eigen::Map<const Points3>(flat.data(), model.vertex_count(), 3);
}

Skeleton rest_joints(const HandModel& model, const ShapeParams& beta) {
  if (!beta.beta.allFinite()) throw NumericalError("non-finite shape parameters");
  Skeleton s;
  s.joints = model.template_joints();
  for (int i = 0; i < kShapeCount; ++i) s.joints += beta.beta[i] * model.shape_joints()[i];
  return s;
}

Skeleton regress_joints(const HandModel& model, const Points3& vertices) {
  if (vertices.rows() != model.vertex_count())
    throw ShapeError("mesh has " + std::to_string(vertices.rows()) + " vertices, model expects " +
                     std::to_string(model.vertex_count()));
  Skeleton s;
  s.joints = model.joint_regressor() * vertices;
  return s;
}

Skeleton regress_joints(const HandModel& model, const Mesh& mesh) {
  return regress_joints(model, mesh.vertices);
}

std::array<Vec3, kJointCount - 1> bone_vectors(const Skeleton& skeleton) {
  std::array<Vec3, kJointCount - 1> bones;
  for (int j = 1; j < kJointCount; ++j)
    bones[j - 1] = (skeleton.joints.row(j) - skeleton.joints.row(kParents[j])).transpose();
  return bones;
}

}  // namespace handkin
