#include "handkin/desk_hand.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Geometry>

#include "handkin/error.hpp"

namespace handkin {

namespace {

struct FingerLayout {
  Vec3 mcp;
  Vec3 direction;
  std::array<double, 3> lengths;  // MCP-PIP, PIP-DIP, DIP-TIP
  double radius;
};

// Thumb, index, middle, ring, little.
std::array<FingerLayout, kFingerCount> finger_layouts() {
  return {{
      {{-20.0, 22.0, -6.0}, Vec3(-0.75, 0.66, -0.10).normalized(), {38.0, 32.0, 27.0}, 10.0},
      {{-25.0, 85.0, 0.0}, Vec3(-0.12, 1.0, 0.0).normalized(), {40.0, 24.0, 20.0}, 9.0},
      {{-5.0, 90.0, 0.0}, Vec3(-0.02, 1.0, 0.0).normalized(), {44.0, 27.0, 21.0}, 9.0},
      {{15.0, 86.0, 0.0}, Vec3(0.08, 1.0, 0.0).normalized(), {41.0, 26.0, 20.0}, 8.5},
      {{33.0, 78.0, 0.0}, Vec3(0.18, 1.0, 0.0).normalized(), {32.0, 19.0, 18.0}, 7.5},
  }};
}

constexpr double kPalmHalfThickness = 12.0;
constexpr double kWristRadius = 25.0;
const Vec3 kPalmNormal(0.0, 0.0, -1.0);

// Fractions of the finger chain (in joint units: 0 MCP, 1 PIP, 2 DIP, 3 TIP)
// at which rings are placed; rings 0, 2, 4 sit on the articulated joints.
constexpr std::array<double, 7> kRingStations = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 2.85};

enum class Region { palm, wrist, finger };

struct VertexInfo {
  Region region;
  int finger = -1;
  Vec3 anchor;  // center the thickness mode scales about
};

class Builder {
 public:
  int add(const Vec3& p, const VertexInfo& info) {
    points.push_back(p);
    infos.push_back(info);
    weights.emplace_back();
    return static_cast<int>(points.size()) - 1;
  }
  void weight(int v, int articulated, double w) { weights[v].push_back({articulated, w}); }
  void tri(int a, int b, int c) { faces.push_back({a, b, c}); }

  std::vector<Vec3> points;
  std::vector<VertexInfo> infos;
  std::vector<std::vector<std::pair<int, double>>> weights;
  std::vector<std::array<int, 3>> faces;
};

}  // namespace

int desk_hand_vertex_count(const DeskHandOptions& o) {
  return 2 * o.palm_columns * o.palm_rows +
         kFingerCount * (static_cast<int>(kRingStations.size()) * o.ring_segments + 1) +
         o.wrist_segments;
}

HandModel make_desk_hand(const DeskHandOptions& o) {
  if (o.ring_segments < 3 || o.wrist_segments < 3 || o.palm_columns < 2 || o.palm_rows < 2)
    throw DomainError("desk hand needs >= 3 ring/wrist segments and a >= 2x2 palm grid");

  const auto layouts = finger_layouts();
  std::array<Vec3, kJointCount> joints;
  joints[0] = Vec3::Zero();
  for (int f = 0; f < kFingerCount; ++f) {
    Vec3 p = layouts[f].mcp;
    joints[joint_index(f, 0)] = p;
    for (int s = 0; s < 3; ++s) {
      p += layouts[f].lengths[s] * layouts[f].direction;
      joints[joint_index(f, s + 1)] = p;
    }
  }

  Builder b;
  std::vector<std::vector<int>> joint_members(kJointCount);

  // Palm: two bilinear sheets between the wrist line and the knuckle line.
  const Vec3 c00(-30.0, 5.0, 0.0), c10(30.0, 5.0, 0.0), c01(-32.0, 84.0, 0.0), c11(40.0, 76.0, 0.0);
  for (double side : {1.0, -1.0}) {
    const int base = static_cast<int>(b.points.size());
    for (int r = 0; r < o.palm_rows; ++r) {
      const double v = static_cast<double>(r) / (o.palm_rows - 1);
      for (int c = 0; c < o.palm_columns; ++c) {
        const double u = static_cast<double>(c) / (o.palm_columns - 1);
        const Vec3 mid = (1 - u) * (1 - v) * c00 + u * (1 - v) * c10 + (1 - u) * v * c01 + u * v * c11;
        const int id = b.add(mid + Vec3(0, 0, side * kPalmHalfThickness), {Region::palm, -1, mid});
        b.weight(id, 0, 1.0);
      }
    }
    for (int r = 0; r + 1 < o.palm_rows; ++r)
      for (int c = 0; c + 1 < o.palm_columns; ++c) {
        const int i00 = base + r * o.palm_columns + c;
        const int i10 = i00 + 1, i01 = i00 + o.palm_columns, i11 = i01 + 1;
        b.tri(i00, i10, i11);
        b.tri(i00, i11, i01);
      }
  }

  // Wrist ring in the XZ plane around the wrist joint.
  {
    const int base = static_cast<int>(b.points.size());
    for (int k = 0; k < o.wrist_segments; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / o.wrist_segments;
      const Vec3 p(kWristRadius * std::cos(phi), 0.0, kWristRadius * std::sin(phi));
      const int id = b.add(p, {Region::wrist, -1, Vec3::Zero()});
      b.weight(id, 0, 1.0);
      joint_members[0].push_back(id);
    }
    for (int k = 1; k + 1 < o.wrist_segments; ++k) b.tri(base, base + k, base + k + 1);
  }

  // Finger tubes.
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& L = layouts[f];
    const Vec3 axis = L.direction;
    const Vec3 e1 = kPalmNormal.cross(axis).normalized();
    const Vec3 e2 = axis.cross(e1);
    const int mcp_a = joint_to_articulated(joint_index(f, 0));
    std::vector<int> ring_start;
    for (std::size_t k = 0; k < kRingStations.size(); ++k) {
      const double station = kRingStations[k];
      const int seg = std::min(static_cast<int>(station), 2);
      const double frac = station - seg;
      const Vec3 center = joints[joint_index(f, seg)] +
                          frac * (joints[joint_index(f, seg + 1)] - joints[joint_index(f, seg)]);
      const double radius = L.radius * (1.0 - 0.22 * station / 3.0);
      ring_start.push_back(static_cast<int>(b.points.size()));
      for (int s = 0; s < o.ring_segments; ++s) {
        const double phi = 2.0 * std::numbers::pi * s / o.ring_segments;
        const Vec3 p = center + radius * (std::cos(phi) * e1 + std::sin(phi) * e2);
        const int id = b.add(p, {Region::finger, f, center});
        // Rings on a joint blend half-and-half between the joint and its parent.
        if (k % 2 == 0 && k <= 4) {
          const int joint_art = mcp_a + static_cast<int>(k / 2);
          const int parent_art = k == 0 ? 0 : joint_art - 1;
          b.weight(id, parent_art, 0.5);
          b.weight(id, joint_art, 0.5);
          joint_members[joint_index(f, static_cast<int>(k / 2))].push_back(id);
        } else {
          b.weight(id, mcp_a + std::min(seg, 2), 1.0);
        }
      }
    }
    const int cap = b.add(joints[joint_index(f, 3)], {Region::finger, f, joints[joint_index(f, 3)]});
    b.weight(cap, mcp_a + 2, 1.0);
    joint_members[joint_index(f, 3)].push_back(cap);

    for (std::size_t k = 0; k + 1 < ring_start.size(); ++k)
      for (int s = 0; s < o.ring_segments; ++s) {
        const int s1 = (s + 1) % o.ring_segments;
        const int a0 = ring_start[k] + s, a1 = ring_start[k] + s1;
        const int b0 = ring_start[k + 1] + s, b1 = ring_start[k + 1] + s1;
        b.tri(a0, a1, b1);
        b.tri(a0, b1, b0);
      }
    for (int s = 0; s < o.ring_segments; ++s)
      b.tri(ring_start.back() + s, ring_start.back() + (s + 1) % o.ring_segments, cap);
  }

  const int nv = static_cast<int>(b.points.size());
  HandModelData d;
  d.name = "desk_hand";
  d.rest_vertices.resize(nv, 3);
  for (int i = 0; i < nv; ++i) d.rest_vertices.row(i) = b.points[i].transpose();

  d.skinning_weights = Eigen::MatrixXd::Zero(nv, kArticulatedCount);
  for (int i = 0; i < nv; ++i)
    for (auto [a, w] : b.weights[i]) d.skinning_weights(i, a) += w;

  d.joint_regressor = Eigen::MatrixXd::Zero(kJointCount, nv);
  for (int j = 0; j < kJointCount; ++j)
    for (int id : joint_members[j])
      d.joint_regressor(j, id) = 1.0 / static_cast<double>(joint_members[j].size());

  d.faces.resize(static_cast<Eigen::Index>(b.faces.size()), 3);
  for (std::size_t i = 0; i < b.faces.size(); ++i)
    d.faces.row(static_cast<Eigen::Index>(i)) << b.faces[i][0], b.faces[i][1], b.faces[i][2];

  // Shape modes, offsets in mm per unit coefficient.
  d.shape_basis = Eigen::MatrixXd::Zero(3 * nv, kShapeCount);
  const Vec3 thumb_mcp = joints[joint_index(Finger::thumb, Segment::mcp)];
  for (int i = 0; i < nv; ++i) {
    const Vec3 p = b.points[i];
    const auto& info = b.infos[i];
    auto set = [&](int mode, const Vec3& off) { d.shape_basis.block<3, 1>(3 * i, mode) += off; };
    set(0, 0.04 * p);                               // overall size
    set(2, Vec3(0.06 * p.x(), 0.0, 0.0));           // palm width
    set(3, 0.08 * (p - info.anchor));               // girth
    if (info.region == Region::finger) {
      const auto& L = layouts[info.finger];
      const Vec3 along = ((p - L.mcp).dot(L.direction)) * L.direction;
      set(1, 0.05 * along);                         // finger length, all fingers
      set(4 + info.finger, 0.06 * along);           // finger length, one finger
      if (info.finger == 0) set(9, 0.08 * kPalmNormal.cross(p - thumb_mcp));  // thumb spread
    }
  }

  if (o.with_pose_basis) {
    const int nf = kPoseBasisPerJoint * (kArticulatedCount - 1);
    d.pose_basis.resize(3 * nv, nf);
    for (int i = 0; i < nv; ++i)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < nf; ++k)
          d.pose_basis(3 * i + c, k) =
              o.pose_basis_amplitude * std::sin(0.37 * i + 1.3 * c + 0.71 * k) *
              std::cos(0.011 * i * (k % 7 + 1));
  }

  return HandModel(std::move(d));
}

}  // namespace handkin
