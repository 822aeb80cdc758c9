#include "handkin/synth.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "handkin/array_bundle.hpp"
#include "handkin/error.hpp"
#include "handkin/text_format.hpp"

namespace handkin {

namespace {

constexpr double kGridSlack = 1e-9;
constexpr int kFingerBlock = 9;
constexpr double kMinDepth = 1e-9;

std::mt19937_64 variant_rng(std::uint64_t seed, std::size_t base, int variant) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(variant)};
  return std::mt19937_64(seq);
}

}  // namespace

std::vector<CameraPose> sample_cameras(const CameraGrid& g) {
  if (!(g.azim_step > 0.0) || !(g.elev_step > 0.0)) throw DomainError("camera steps must be > 0");
  if (!(g.elev_max >= g.elev_min)) throw DomainError("elevation range is empty");
  const double two_pi = 2.0 * std::numbers::pi;
  const int n_elev = static_cast<int>(std::floor((g.elev_max - g.elev_min) / g.elev_step + kGridSlack)) + 1;
  const int n_azim = static_cast<int>(std::ceil(two_pi / g.azim_step - kGridSlack));
  std::vector<CameraPose> out;
  out.reserve(static_cast<std::size_t>(n_elev) * n_azim);
  for (int i = 0; i < n_elev; ++i) {
    const double e = std::min(g.elev_min + i * g.elev_step, g.elev_max);
    for (int j = 0; j < n_azim; ++j) {
      const double a = j * g.azim_step;
      CameraPose c;
      c.elevation = e;
      c.azimuth = a;
      c.position = Vec3(std::cos(e) * std::cos(a), std::sin(e), std::cos(e) * std::sin(a));
      out.push_back(c);
    }
  }
  return out;
}

std::string cameras_csv(const std::vector<CameraPose>& cameras) {
  std::ostringstream os;
  os << "elevation,azimuth,x,y,z\n";
  for (const auto& c : cameras)
    os << format_number(c.elevation) << ',' << format_number(c.azimuth) << ','
       << format_number(c.position.x()) << ',' << format_number(c.position.y()) << ','
       << format_number(c.position.z()) << '\n';
  return os.str();
}

Articulation swap_fingers(const Articulation& a, const Articulation& b, const FingerMask& fingers) {
  Articulation out = a;
  for (int f = 0; f < kFingerCount; ++f)
    if (fingers[f]) out.segment<kFingerBlock>(kFingerBlock * f) = b.segment<kFingerBlock>(kFingerBlock * f);
  return out;
}

PoseLibrary augment_library(const PoseLibrary& lib, const AugmentOptions& o) {
  if (lib.poses.empty()) throw DomainError("pose library is empty");
  if (o.per_pose < 1) throw DomainError("per_pose must be >= 1");
  if (!(o.swap_probability >= 0.0 && o.swap_probability <= 1.0))
    throw DomainError("swap probability must lie in [0, 1]");
  PoseLibrary out;
  out.poses.reserve(lib.poses.size() * o.per_pose);
  std::uniform_int_distribution<std::size_t> donor_pick(0, lib.poses.size() - 1);
  std::bernoulli_distribution coin(o.swap_probability);
  for (std::size_t i = 0; i < lib.poses.size(); ++i) {
    for (int k = 0; k < o.per_pose; ++k) {
      auto rng = variant_rng(o.seed, i, k);
      const std::size_t donor = donor_pick(rng);
      FingerMask mask{};
      for (auto& m : mask) m = coin(rng);
      out.poses.push_back(swap_fingers(lib.poses[i], lib.poses[donor], mask));
    }
  }
  return out;
}

PoseLibrary generate_base_library(const AxisTable& axes, const DofLimits& limits, int count,
                                  std::uint64_t seed) {
  if (count < 1) throw DomainError("library size must be >= 1");
  limits.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  PoseLibrary lib;
  lib.poses.reserve(count);
  for (int n = 0; n < count; ++n) {
    BioPose bio;
    for (int d = 0; d < kBioDofCount; ++d)
      bio.angles[d] = limits.lower[d] + u01(rng) * (limits.upper[d] - limits.lower[d]);
    lib.poses.push_back(expand(bio, axes));
  }
  return lib;
}

void save_pose_library(const PoseLibrary& lib, const std::filesystem::path& path) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(lib.poses.size()), kArticulationSize);
  for (std::size_t i = 0; i < lib.poses.size(); ++i) m.row(i) = lib.poses[i].transpose();
  ArrayBundle b;
  b.set_attribute("kind", "pose_library");
  b.add_matrix("poses", DType::f64, m);
  b.save_binary(path);
}

PoseLibrary load_pose_library(const std::filesystem::path& path) {
  const ArrayBundle b = ArrayBundle::load(path);
  if (!b.contains("poses")) throw ParseError("pose library has no 'poses' array");
  const NamedArray& a = b.at("poses");
  if (a.shape.size() != 2 || a.shape[1] != static_cast<std::size_t>(kArticulationSize))
    throw ShapeError("pose library must be an (N, 45) array");
  const Eigen::MatrixXd m = b.matrix("poses");
  if (!m.allFinite()) throw NumericalError("pose library contains non-finite values");
  PoseLibrary lib;
  for (Eigen::Index i = 0; i < m.rows(); ++i) lib.poses.push_back(m.row(i).transpose());
  return lib;
}

Mat3 camera_rotation(const CameraPose& c) {
  const double e = c.elevation, a = c.azimuth;
  const Vec3 forward = -c.position.normalized();
  // d(position)/d(elevation): well defined at the poles, unlike forward x Y.
  const Vec3 up(-std::sin(e) * std::cos(a), std::cos(e), -std::sin(e) * std::sin(a));
  const Vec3 right = forward.cross(up);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = -up.transpose();
  r.row(2) = forward.transpose();
  return r;
}

Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> project(const Points3& points,
                                                                  const CameraPose& camera,
                                                                  double radius_mm,
                                                                  const Intrinsics& k) {
  if (!(radius_mm > 0.0)) throw DomainError("camera radius must be > 0");
  const Mat3 r = camera_rotation(camera);
  const Vec3 eye = camera.target + radius_mm * camera.position;
  Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> uv(points.rows(), 2);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Vec3 pc = r * (points.row(i).transpose() - eye);
    if (!(pc.z() > kMinDepth))
      throw DomainError("point " + std::to_string(i) + " is not in front of the camera");
    uv(i, 0) = k.fx * pc.x() / pc.z() + k.cx;
    uv(i, 1) = k.fy * pc.y() / pc.z() + k.cy;
  }
  if (!uv.allFinite()) throw NumericalError("projection produced non-finite coordinates");
  return uv;
}

Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> project(const Skeleton& skeleton,
                                                                  const CameraPose& camera,
                                                                  double radius_mm,
                                                                  const Intrinsics& k) {
  return project(skeleton.joints, camera, radius_mm, k);
}

}  // namespace handkin
