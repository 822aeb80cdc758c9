#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "handkin/bio_dof.hpp"
#include "handkin/desk_hand.hpp"
#include "handkin/hand_model.hpp"

namespace test {

using namespace handkin;

inline const HandModel& desk() {
  static const HandModel m = make_desk_hand();
  return m;
}

inline const HandModel& desk_posed_basis() {
  static const HandModel m = [] {
    DeskHandOptions o;
    o.with_pose_basis = true;
    return make_desk_hand(o);
  }();
  return m;
}

inline BioPose random_bio(std::mt19937_64& rng, const DofLimits& l = DofLimits::defaults()) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BioPose b;
  for (int d = 0; d < kBioDofCount; ++d) b.angles[d] = l.lower[d] + u(rng) * (l.upper[d] - l.lower[d]);
  return b;
}

inline ShapeParams random_beta(std::mt19937_64& rng, double sigma = 0.5) {
  std::normal_distribution<double> n(0.0, sigma);
  ShapeParams s;
  for (int i = 0; i < kShapeCount; ++i) s.beta[i] = n(rng);
  return s;
}

inline Vec3 random_rotvec(std::mt19937_64& rng, double max_angle = 2.5) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return Vec3(n(rng), n(rng), n(rng)).normalized() * u(rng);
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  return Vec3(n(rng), n(rng), n(rng));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() /
                 ("handkin_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace test
