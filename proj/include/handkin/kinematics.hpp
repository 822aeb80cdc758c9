#pragma once

#include <array>
#include <vector>

#include "handkin/hand_model.hpp"

namespace handkin {

struct ForwardOptions {
  // Apply pose-corrective blendshapes when the model carries them.
  bool pose_blendshapes = true;
};

struct ForwardResult {
  Mesh mesh;
  Skeleton skeleton;
};

// Linear blend skinning of T(theta, beta) = template + B_S(beta) + B_P(theta)
// around the rest joints J(beta). The skeleton is the rest skeleton carried
// through the chained joint transforms. The global rotation pivots about the
// origin and the translation is added last, so a pose with zero articulation
// is a rigid motion of the rest mesh.
ForwardResult forward(const HandModel& model, const FullPose& pose, const ShapeParams& beta,
                      const ForwardOptions& options = {});

// Gradient of a scalar with respect to the inputs of forward().
struct PoseGradient {
  Vec3 global_rot = Vec3::Zero();
  Articulation articulation = Articulation::Zero();
  Vec3 translation = Vec3::Zero();
  Beta beta = Beta::Zero();
};

// Which mesh vertices an evaluation materializes.
enum class VertexSubset {
  all,
  regressor_support,  // just what regress_joints needs
  none,               // skeleton only
};

// Forward pass that keeps its intermediates for a reverse-mode sweep.
//
//   KinematicsEvaluator eval(model);
//   eval.evaluate(pose, beta, VertexSubset::all);
//   PoseGradient g = eval.backward(dloss_dvertices, dloss_djoints);
//
// Not thread-safe; use one evaluator per thread.
class KinematicsEvaluator {
 public:
  explicit KinematicsEvaluator(const HandModel& model, ForwardOptions options = {});

  void evaluate(const FullPose& pose, const ShapeParams& beta, VertexSubset subset);

  // Indices (into the model's vertices) of the rows of vertices().
  const std::vector<int>& vertex_indices() const { return *indices_; }
  const Points3& vertices() const { return posed_vertices_; }
  const Skeleton& skeleton() const { return posed_skeleton_; }
  const Skeleton& rest_skeleton() const { return rest_; }
  // Global transform of articulated joint a, before the final translation.
  const RigidTransform& joint_transform(int a) const { return global_[a]; }

  // Joint regressor applied to the evaluated vertices. Requires the subset
  // to cover the regressor support.
  Skeleton regressed_joints() const;

  // Reverse-mode sweep. d_vertices has one row per vertex_indices() entry
  // (or is empty); d_joints is 21 x 3 against skeleton() (or empty).
  PoseGradient backward(const Points3& d_vertices, const Points3& d_joints) const;

  // Backward for a loss on regressed_joints().
  PoseGradient backward_regressed(const Points3& d_regressed) const;

  const HandModel& model() const { return model_; }

 private:
  const HandModel& model_;
  ForwardOptions options_;
  bool use_pose_basis_ = false;

  std::vector<int> all_indices_;
  const std::vector<int>* indices_ = &all_indices_;
  std::vector<int> regressor_rows_;  // row in vertices() of each regressor support vertex
  static const std::vector<int> kNoIndices;

  Vec3 translation_ = Vec3::Zero();
  Skeleton rest_;
  std::array<Mat3, kArticulatedCount> local_;
  std::array<std::array<Mat3, 3>, kArticulatedCount> d_local_;
  std::array<RigidTransform, kArticulatedCount> global_;
  std::array<RigidTransform, kArticulatedCount> skinning_;
  Points3 blended_;  // T(theta, beta) rows for vertex_indices()
  Points3 posed_vertices_;
  Skeleton posed_skeleton_;
};

}  // namespace handkin
