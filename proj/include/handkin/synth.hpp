#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "handkin/bio_dof.hpp"
#include "handkin/hand_model.hpp"

namespace handkin {

struct CameraPose {
  double elevation = 0.0;  // rad
  double azimuth = 0.0;    // rad
  Vec3 position = Vec3::UnitX();  // unit sphere; scaled by a radius at use
  Vec3 target = Vec3::Zero();     // look-at point, mm
};

struct CameraGrid {
  double elev_min = -std::numbers::pi / 3.0;
  double elev_max = std::numbers::pi / 2.0;
  double azim_step = std::numbers::pi / 36.0;
  double elev_step = std::numbers::pi / 36.0;
};

// Elevations from elev_min to elev_max inclusive, azimuths over [0, 2 pi);
// position = (cos e cos a, sin e, cos e sin a). Elevation-major order.
std::vector<CameraPose> sample_cameras(const CameraGrid& grid = {});

// "elevation,azimuth,x,y,z" rows.
std::string cameras_csv(const std::vector<CameraPose>& cameras);

// Finger subset; entry f selects Finger f.
using FingerMask = std::array<bool, kFingerCount>;

// a with the 9-value block of every selected finger taken from b.
Articulation swap_fingers(const Articulation& a, const Articulation& b, const FingerMask& fingers);

struct PoseLibrary {
  std::vector<Articulation> poses;
};

inline constexpr int kBaseLibrarySize = 895;

struct AugmentOptions {
  int per_pose = 64;
  // Each finger is swapped independently with this probability; 0 makes
  // every variant a copy of its base pose.
  double swap_probability = 0.5;
  std::uint64_t seed = 0;
};

// For every base pose, per_pose variants swapping a random finger subset
// with a uniformly drawn donor. Variant k of base i uses its own generator
// seeded from (seed, i, k), so output is independent of evaluation order.
PoseLibrary augment_library(const PoseLibrary& library, const AugmentOptions& options = {});

// Stand-in base library: feasible BioPose samples expanded to articulations.
PoseLibrary generate_base_library(const AxisTable& axes, const DofLimits& limits,
                                  int count = kBaseLibrarySize, std::uint64_t seed = 0);

// Dense (N, 45) array named "poses".
void save_pose_library(const PoseLibrary& library, const std::filesystem::path& path);
PoseLibrary load_pose_library(const std::filesystem::path& path);

struct Intrinsics {
  double fx = 500.0, fy = 500.0, cx = 112.0, cy = 112.0;
};

// World-to-camera rotation rows: right, down, forward (camera looks along
// +Z, image y grows downward). World +Y projects upward in the image.
Mat3 camera_rotation(const CameraPose& camera);

// Look-at view from target + position * radius, then pinhole projection.
// Throws DomainError if a point is not strictly in front of the camera.
Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> project(const Points3& points,
                                                                  const CameraPose& camera,
                                                                  double radius_mm,
                                                                  const Intrinsics& k = {});
Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> project(const Skeleton& skeleton,
                                                                  const CameraPose& camera,
                                                                  double radius_mm,
                                                                  const Intrinsics& k = {});

}  // namespace handkin
