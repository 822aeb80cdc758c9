#include "handkin/bio_dof.hpp"

#include <fstream>
#include <sstream>

#include "handkin/error.hpp"
#include "handkin/text_format.hpp"

namespace handkin {

namespace {

constexpr std::array<std::string_view, kBioDofCount> kDofNames = {
    "index_mcp_flex",  "index_mcp_abd",  "index_pip_flex",  "index_dip_flex",
    "middle_mcp_flex", "middle_mcp_abd", "middle_pip_flex", "middle_dip_flex",
    "ring_mcp_flex",   "ring_mcp_abd",   "ring_pip_flex",   "ring_dip_flex",
    "little_mcp_flex", "little_mcp_abd", "little_pip_flex", "little_dip_flex",
    "thumb_mcp_rot",   "thumb_mcp_abd",  "thumb_mcp_flex",  "thumb_pip_rot",
    "thumb_pip_abd",   "thumb_pip_flex", "thumb_dip_flex"};

constexpr double kDegenerateLength = 1e-9;

Vec3 unit(const Vec3& v, const char* what) {
  const double n = v.norm();
  if (!(n > kDegenerateLength)) throw NumericalError(std::string("degenerate ") + what);
  return v / n;
}

}  // namespace

std::string_view BioPose::dof_name(int i) { return kDofNames.at(i); }

int BioPose::dof_index(std::string_view name) {
  for (int i = 0; i < kBioDofCount; ++i)
    if (kDofNames[i] == name) return i;
  return -1;
}

DofBinding dof_binding(int dof) {
  if (dof < 0 || dof >= kBioDofCount) throw DomainError("DoF index out of range");
  if (dof < 16) {
    const int finger = 1 + dof / 4;  // index..little
    const int mcp = 1 + 3 * finger;
    switch (dof % 4) {
      case 0: return {mcp, DofAxis::flex};
      case 1: return {mcp, DofAxis::abd};
      case 2: return {mcp + 1, DofAxis::flex};
      default: return {mcp + 2, DofAxis::flex};
    }
  }
  static constexpr std::array<DofBinding, 7> thumb = {{{1, DofAxis::twist},
                                                       {1, DofAxis::abd},
                                                       {1, DofAxis::flex},
                                                       {2, DofAxis::twist},
                                                       {2, DofAxis::abd},
                                                       {2, DofAxis::flex},
                                                       {3, DofAxis::flex}}};
  return thumb[dof - 16];
}

DofLimits DofLimits::defaults() {
  DofLimits l;
  for (int f = 0; f < 4; ++f) {
    l.lower.segment<4>(4 * f) << -0.3, -0.35, 0.0, 0.0;
    l.upper.segment<4>(4 * f) << 1.6, 0.35, 1.9, 1.6;
  }
  l.lower.segment<7>(16) << -0.6, -0.6, -0.3, -0.6, -0.6, -0.3, 0.0;
  l.upper.segment<7>(16) << 0.6, 0.6, 1.6, 0.6, 0.6, 1.6, 1.6;
  return l;
}

void DofLimits::validate() const {
  for (int i = 0; i < kBioDofCount; ++i) {
    if (!(lower[i] <= 0.0 && 0.0 <= upper[i]))
      throw DomainError("limits of " + std::string(kDofNames[i]) + " must satisfy min <= 0 <= max");
  }
}

DofLimits DofLimits::parse(const std::string& text) {
  DofLimits l;
  std::array<bool, kBioDofCount> seen{};
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    double lo = 0, hi = 0;
    std::string extra;
    if (!(ls >> lo >> hi) || (ls >> extra))
      throw ParseError("limits line " + std::to_string(line_no) + ": expected '<name> <min> <max>'");
    const int i = BioPose::dof_index(name);
    if (i < 0) throw ParseError("limits line " + std::to_string(line_no) + ": unknown DoF '" + name + "'");
    if (seen[i]) throw ParseError("limits: duplicate DoF '" + name + "'");
    seen[i] = true;
    l.lower[i] = lo;
    l.upper[i] = hi;
  }
  for (int i = 0; i < kBioDofCount; ++i)
    if (!seen[i]) throw ParseError("limits: missing DoF '" + std::string(kDofNames[i]) + "'");
  l.validate();
  return l;
}

DofLimits DofLimits::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open limits file '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string DofLimits::to_text() const {
  std::ostringstream os;
  os << "# dof min max (radians)\n";
  for (int i = 0; i < kBioDofCount; ++i)
    os << kDofNames[i] << ' ' << format_number(lower[i]) << ' ' << format_number(upper[i]) << '\n';
  return os.str();
}

BioPose clamp(const BioPose& bio, const DofLimits& limits) {
  BioPose out;
  out.angles = bio.angles.cwiseMax(limits.lower).cwiseMin(limits.upper);
  return out;
}

bool is_feasible(const BioPose& bio, const DofLimits& limits) {
  return (bio.angles.array() >= limits.lower.array()).all() &&
         (bio.angles.array() <= limits.upper.array()).all();
}

Vec3 palm_normal(const Skeleton& rest) {
  const Vec3 wrist = rest.joints.row(0).transpose();
  const Vec3 to_index = rest.joints.row(joint_index(Finger::index, Segment::mcp)).transpose() - wrist;
  const Vec3 to_little = rest.joints.row(joint_index(Finger::little, Segment::mcp)).transpose() - wrist;
  return unit(to_index.cross(to_little), "palm plane");
}

AxisTable derive_axes(const Skeleton& rest) {
  const Vec3 normal = palm_normal(rest);
  AxisTable table;
  for (int a = 1; a < kArticulatedCount; ++a) {
    const int j = articulated_to_joint(a);
    const Vec3 bone = (rest.joints.row(j + 1) - rest.joints.row(j)).transpose();
    JointAxes& ax = table.joints[a - 1];
    ax.twist = unit(bone, "bone");
    ax.abd = unit(normal - normal.dot(ax.twist) * ax.twist, "abduction axis");
    // Re-orthogonalize against rounding and close the frame.
    ax.abd = unit(ax.abd - ax.abd.dot(ax.twist) * ax.twist, "abduction axis");
    ax.flex = ax.twist.cross(ax.abd).normalized();
  }
  return table;
}

AxisTable derive_axes(const HandModel& model) { return derive_axes(rest_joints(model, {})); }

Eigen::Matrix<double, kArticulationSize, kBioDofCount> AxisTable::expansion_matrix() const {
  Eigen::Matrix<double, kArticulationSize, kBioDofCount> e;
  e.setZero();
  for (int d = 0; d < kBioDofCount; ++d) {
    const auto b = dof_binding(d);
    const auto& ax = at(b.articulated);
    const Vec3& v = b.axis == DofAxis::flex ? ax.flex : b.axis == DofAxis::abd ? ax.abd : ax.twist;
    e.block<3, 1>(3 * (b.articulated - 1), d) = v;
  }
  return e;
}

Articulation expand(const BioPose& bio, const AxisTable& axes) {
  Articulation out = Articulation::Zero();
  for (int d = 0; d < kBioDofCount; ++d) {
    const auto b = dof_binding(d);
    const auto& ax = axes.at(b.articulated);
    const Vec3& v = b.axis == DofAxis::flex ? ax.flex : b.axis == DofAxis::abd ? ax.abd : ax.twist;
    out.segment<3>(3 * (b.articulated - 1)) += bio.angles[d] * v;
  }
  return out;
}

}  // namespace handkin
