#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "handkin/bio_dof.hpp"
#include "handkin/hand_model.hpp"
#include "handkin/ik_optim.hpp"
#include "handkin/metrics.hpp"

namespace handkin {

// JSON text artifacts. Writers use fixed 9-significant-digit numbers so
// repeated runs produce identical bytes.

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Pose file:
//   {"articulation": [45] | "bio": [23], "global_rot": [3], "translation": [3], "beta": [10]}
// Every key is optional except one of articulation / bio; missing blocks are zero.
struct PoseRecord {
  FullPose pose;
  ShapeParams shape;
  std::optional<BioPose> bio;
};
PoseRecord parse_pose_json(const std::string& text, const AxisTable& axes);
std::string pose_to_json(const PoseRecord& record);

// {"unit": "mm", "joints": [[x, y, z] x 21]}
std::string skeleton_to_json(const Skeleton& skeleton);

enum class Unit { mm, m };
Unit unit_from_string(const std::string& s);
double unit_to_mm(Unit unit);

// Annotations, accepted as one record object, a list of records, or a bare
// list of 21 x 3 joint arrays (FreiHAND xyz layout). A record is
//   {"joints": [[x, y, z] x 21], "vertices": [[x, y, z] x V], "K": [[3] x 3], "unit": "mm" | "m"}
// with vertices, K and unit optional. Records without a unit use
// default_unit. Coordinates are returned in mm.
struct AnnotationRecord {
  Points3 joints;
  std::optional<Points3> vertices;
  std::optional<Mat3> intrinsics;
};
std::vector<AnnotationRecord> parse_annotations(const std::string& text, Unit default_unit = Unit::mm);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path,
                                               Unit default_unit = Unit::mm);

// Fit parameters: {"bio": [23], "beta": [10], "global_rot": [3], "translation": [3]};
// writers add the expanded "articulation" for reference.
FitState parse_fit_state_json(const std::string& text);
std::string fit_state_to_json(const FitState& state, const AxisTable& axes);

std::string loss_trace_csv(const FitResult& result);

}  // namespace handkin
