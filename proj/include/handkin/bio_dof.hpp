#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "handkin/hand_model.hpp"

namespace handkin {

inline constexpr int kBioDofCount = 23;

// The 23 biomechanically feasible degrees of freedom, in storage order:
// for index, middle, ring, little: mcp_flex, mcp_abd, pip_flex, dip_flex;
// for the thumb: mcp_rot, mcp_abd, mcp_flex, pip_rot, pip_abd, pip_flex, dip_flex.
// Angles in radians.
struct BioPose {
  Eigen::Matrix<double, kBioDofCount, 1> angles = Eigen::Matrix<double, kBioDofCount, 1>::Zero();

  static std::string_view dof_name(int i);
  // Index of a named DoF, or -1.
  static int dof_index(std::string_view name);
};

enum class DofAxis { flex, abd, twist };

// Which articulated joint and which local axis a DoF rotates about.
struct DofBinding {
  int articulated;  // 1..15
  DofAxis axis;
};
DofBinding dof_binding(int dof);

struct DofLimits {
  Eigen::Matrix<double, kBioDofCount, 1> lower;
  Eigen::Matrix<double, kBioDofCount, 1> upper;

  // Anatomical ranges used when no limits file is supplied.
  static DofLimits defaults();

  // Plain text, one "<dof_name> <min> <max>" per line; '#' starts a comment.
  // Every DoF must appear exactly once and satisfy min <= 0 <= max.
  static DofLimits parse(const std::string& text);
  static DofLimits load(const std::filesystem::path& path);
  std::string to_text() const;
  void validate() const;
};

BioPose clamp(const BioPose& bio, const DofLimits& limits);
bool is_feasible(const BioPose& bio, const DofLimits& limits);

struct JointAxes {
  Vec3 flex;
  Vec3 abd;
  Vec3 twist;  // along the outgoing bone
};

// Local axes of the 15 articulated finger joints, in the rest-pose frame,
// indexed by articulated index - 1.
struct AxisTable {
  std::array<JointAxes, kArticulatedCount - 1> joints;

  const JointAxes& at(int articulated) const { return joints[articulated - 1]; }
  // Linear map from BioPose angles to the 45-value articulation.
  Eigen::Matrix<double, kArticulationSize, kBioDofCount> expansion_matrix() const;
};

// Palm normal from the wrist / index MCP / little MCP plane; for a right
// hand it points out of the palm.
Vec3 palm_normal(const Skeleton& rest);

// twist = outgoing bone direction; abd = palm normal with its twist
// component removed; flex = twist x abd. Positive flexion turns the bone
// toward the palm normal.
AxisTable derive_axes(const Skeleton& rest);
AxisTable derive_axes(const HandModel& model);

// Sum of angle * axis per joint. Finger joints never receive a twist component.
Articulation expand(const BioPose& bio, const AxisTable& axes);

}  // namespace handkin
