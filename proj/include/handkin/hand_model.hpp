#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "handkin/types.hpp"

namespace handkin {

// Joint layout (21 joints, FreiHAND order):
//   0 wrist, then per finger f (thumb, index, middle, ring, little)
//   1 + 4f MCP, 2 + 4f PIP, 3 + 4f DIP, 4 + 4f TIP.
// The 16 joints with children are articulated: wrist plus MCP/PIP/DIP of each
// finger. The 45-value articulation is finger-major: finger f owns values
// [9f, 9f + 9), three axis-angle triplets for MCP, PIP, DIP.
inline constexpr int kJointCount = 21;
inline constexpr int kArticulatedCount = 16;
inline constexpr int kFingerCount = 5;
inline constexpr int kShapeCount = 10;
inline constexpr int kArticulationSize = 45;
inline constexpr int kPoseBasisPerJoint = 9;
inline constexpr int kDefaultVertexCount = 778;

enum class Finger : int { thumb = 0, index = 1, middle = 2, ring = 3, little = 4 };
enum class Segment : int { mcp = 0, pip = 1, dip = 2, tip = 3 };

constexpr int joint_index(Finger f, Segment s) {
  return 1 + 4 * static_cast<int>(f) + static_cast<int>(s);
}
constexpr int joint_index(int finger, int segment) { return 1 + 4 * finger + segment; }

inline constexpr std::array<int, kJointCount> kParents = {
    -1, 0, 1, 2, 3, 0, 5, 6, 7, 0, 9, 10, 11, 0, 13, 14, 15, 0, 17, 18, 19};

// Skeleton joint index of articulated joint a (0 = wrist).
constexpr int articulated_to_joint(int a) {
  return a == 0 ? 0 : joint_index((a - 1) / 3, (a - 1) % 3);
}
// Articulated index of a skeleton joint, or -1 for fingertips.
constexpr int joint_to_articulated(int j) {
  if (j == 0) return 0;
  const int f = (j - 1) / 4;
  const int s = (j - 1) % 4;
  return s == 3 ? -1 : 1 + 3 * f + s;
}

const char* finger_name(Finger f);
const char* joint_name(int joint);

using Articulation = Eigen::Matrix<double, kArticulationSize, 1>;
using Beta = Eigen::Matrix<double, kShapeCount, 1>;

struct ShapeParams {
  Beta beta = Beta::Zero();
};

struct FullPose {
  Vec3 global_rot = Vec3::Zero();
  Articulation articulation = Articulation::Zero();
  Vec3 translation = Vec3::Zero();
};

struct Skeleton {
  Points3 joints = Points3::Zero(kJointCount, 3);
};

struct Mesh {
  Points3 vertices;
  Faces faces;
};

// Raw arrays describing a hand model; validated by HandModel's constructor.
struct HandModelData {
  Points3 rest_vertices;              // V x 3, mm
  Eigen::MatrixXd shape_basis;        // 3V x 10, column i is the flattened offset per unit beta_i
  Eigen::MatrixXd pose_basis;         // 3V x (9 * 15) or empty
  Eigen::MatrixXd joint_regressor;    // 21 x V
  Eigen::MatrixXd skinning_weights;   // V x 16
  std::array<int, kJointCount> parents = kParents;
  Faces faces;
  std::string name = "unnamed";
};

// Parametric hand mesh. Immutable after construction.
class HandModel {
 public:
  explicit HandModel(HandModelData data);

  int vertex_count() const { return static_cast<int>(data_.rest_vertices.rows()); }
  int face_count() const { return static_cast<int>(data_.faces.rows()); }
  bool has_pose_basis() const { return data_.pose_basis.size() > 0; }
  const std::string& name() const { return data_.name; }

  const Points3& rest_vertices() const { return data_.rest_vertices; }
  const Eigen::MatrixXd& shape_basis() const { return data_.shape_basis; }
  const Eigen::MatrixXd& pose_basis() const { return data_.pose_basis; }
  const Eigen::MatrixXd& joint_regressor() const { return data_.joint_regressor; }
  const Eigen::MatrixXd& skinning_weights() const { return data_.skinning_weights; }
  const Faces& faces() const { return data_.faces; }
  const std::array<int, kJointCount>& parents() const { return data_.parents; }
  const HandModelData& data() const { return data_; }

  struct Influence {
    int joint;  // articulated index
    double weight;
  };
  // Nonzero skinning weights of vertex v.
  const std::vector<Influence>& influences(int v) const { return influences_[v]; }
  // Vertices with a nonzero joint-regressor weight, ascending.
  const std::vector<int>& regressor_support() const { return regressor_support_; }

  // Regressor applied to the template and to each shape basis column, so
  // rest joints are template_joints + sum_i beta_i * shape_joints[i].
  const Points3& template_joints() const { return template_joints_; }
  const std::array<Points3, kShapeCount>& shape_joints() const { return shape_joints_; }

 private:
  HandModelData data_;
  std::vector<std::vector<Influence>> influences_;
  std::vector<int> regressor_support_;
  Points3 template_joints_;
  std::array<Points3, kShapeCount> shape_joints_;
};

// sum_i beta_i * shape_basis[i], V x 3.
Points3 shape_offset(const HandModel& model, const ShapeParams& beta);

// Joint regressor applied to the shaped template.
Skeleton rest_joints(const HandModel& model, const ShapeParams& beta);

// Joint regressor applied to an arbitrary mesh.
Skeleton regress_joints(const HandModel& model, const Mesh& mesh);
Skeleton regress_joints(const HandModel& model, const Points3& vertices);

// Bone vector child - parent for each of the 20 tree edges, ordered by child joint.
std::array<Vec3, kJointCount - 1> bone_vectors(const Skeleton& skeleton);

}  // namespace handkin
