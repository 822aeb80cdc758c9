#include "handkin/formats.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "handkin/error.hpp"
#include "handkin/text_format.hpp"

namespace handkin {

namespace {

using nlohmann::json;

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ParseError(what + ": expected a number");
  return j.get<double>();
}

Eigen::VectorXd vector_of(const json& j, const std::string& what, Eigen::Index n) {
  if (!j.is_array()) throw ParseError(what + ": expected an array");
  if (static_cast<Eigen::Index>(j.size()) != n)
    throw ShapeError(what + ": expected " + std::to_string(n) + " values, got " + std::to_string(j.size()));
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = number(j[i], what);
  if (!v.allFinite()) throw NumericalError(what + ": non-finite value");
  return v;
}

Points3 points_of(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + ": expected an array of [x, y, z] rows");
  Points3 p(static_cast<Eigen::Index>(j.size()), 3);
  for (std::size_t i = 0; i < j.size(); ++i)
    p.row(static_cast<Eigen::Index>(i)) = vector_of(j[i], what + "[" + std::to_string(i) + "]", 3).transpose();
  return p;
}

std::string list(const double* v, Eigen::Index n) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < n; ++i) s += (i ? ", " : "") + format_number(v[i]);
  return s + "]";
}

template <class V>
std::string list(const V& v) {
  const Eigen::VectorXd tmp = v;
  return list(tmp.data(), tmp.size());
}

std::string rows(const Points3& p, const std::string& indent) {
  std::string s = "[\n";
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const Eigen::Vector3d r = p.row(i).transpose();
    s += indent + "  " + list(r) + (i + 1 < p.rows() ? ",\n" : "\n");
  }
  return s + indent + "]";
}

bool is_point_row(const json& j) { return j.is_array() && j.size() == 3 && j[0].is_number(); }

// A bare 21 x 3 array: [[x, y, z], ...].
bool is_bare_joints(const json& j) {
  return j.is_array() && j.size() == static_cast<std::size_t>(kJointCount) && is_point_row(j[0]);
}

AnnotationRecord record_from(const json& j, Unit default_unit, const std::string& what) {
  AnnotationRecord r;
  Unit unit = default_unit;
  json joints;
  if (is_bare_joints(j)) {
    joints = j;
  } else if (j.is_object()) {
    if (!j.contains("joints")) throw ParseError(what + ": missing \"joints\"");
    joints = j.at("joints");
    if (j.contains("unit")) {
      if (!j.at("unit").is_string()) throw ParseError(what + ": \"unit\" must be a string");
      unit = unit_from_string(j.at("unit").get<std::string>());
    }
  } else {
    throw ParseError(what + ": expected a record object or a 21 x 3 joint list");
  }
  const double scale = unit_to_mm(unit);
  r.joints = points_of(joints, what + ".joints") * scale;
  if (r.joints.rows() != kJointCount)
    throw ShapeError(what + ": expected 21 joints, got " + std::to_string(r.joints.rows()));
  if (j.is_object() && j.contains("vertices")) r.vertices = points_of(j.at("vertices"), what + ".vertices") * scale;
  if (j.is_object() && j.contains("K")) {
    const Points3 k = points_of(j.at("K"), what + ".K");
    if (k.rows() != 3) throw ShapeError(what + ": K must be 3 x 3");
    r.intrinsics = Mat3(k);
  }
  return r;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << text;
  if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

PoseRecord parse_pose_json(const std::string& text, const AxisTable& axes) {
  const json j = parse_json(text);
  if (!j.is_object()) throw ParseError("pose file must be a JSON object");
  const bool has_art = j.contains("articulation"), has_bio = j.contains("bio");
  if (has_art == has_bio) throw ParseError("pose file needs exactly one of \"articulation\" or \"bio\"");
  PoseRecord r;
  if (has_art) {
    r.pose.articulation = vector_of(j.at("articulation"), "articulation", kArticulationSize);
  } else {
    BioPose bio;
    bio.angles = vector_of(j.at("bio"), "bio", kBioDofCount);
    r.bio = bio;
    r.pose.articulation = expand(bio, axes);
  }
  if (j.contains("global_rot")) r.pose.global_rot = vector_of(j.at("global_rot"), "global_rot", 3);
  if (j.contains("translation")) r.pose.translation = vector_of(j.at("translation"), "translation", 3);
  if (j.contains("beta")) r.shape.beta = vector_of(j.at("beta"), "beta", kShapeCount);
  return r;
}

std::string pose_to_json(const PoseRecord& r) {
  std::ostringstream os;
  os << "{\n";
  if (r.bio) os << "  \"bio\": " << list(r.bio->angles) << ",\n";
  else os << "  \"articulation\": " << list(r.pose.articulation) << ",\n";
  os << "  \"global_rot\": " << list(r.pose.global_rot) << ",\n"
     << "  \"translation\": " << list(r.pose.translation) << ",\n"
     << "  \"beta\": " << list(r.shape.beta) << "\n}\n";
  return os.str();
}

std::string skeleton_to_json(const Skeleton& s) {
  return "{\n  \"unit\": \"mm\",\n  \"joints\": " + rows(s.joints, "  ") + "\n}\n";
}

Unit unit_from_string(const std::string& s) {
  if (s == "mm") return Unit::mm;
  if (s == "m") return Unit::m;
  throw ParseError("unknown unit '" + s + "' (expected mm or m)");
}

double unit_to_mm(Unit u) { return u == Unit::m ? 1000.0 : 1.0; }

std::vector<AnnotationRecord> parse_annotations(const std::string& text, Unit default_unit) {
  const json j = parse_json(text);
  std::vector<AnnotationRecord> out;
  if (j.is_object() || is_bare_joints(j)) {
    // A single record; a bare list of exactly 21 joint rows is one skeleton.
    out.push_back(record_from(j, default_unit, "record 0"));
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i)
      out.push_back(record_from(j[i], default_unit, "record " + std::to_string(i)));
  } else {
    throw ParseError("annotation file must hold a record or a list of records");
  }
  if (out.empty()) throw ParseError("annotation file holds no records");
  return out;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path, Unit default_unit) {
  return parse_annotations(read_text_file(path), default_unit);
}

FitState parse_fit_state_json(const std::string& text) {
  const json j = parse_json(text);
  if (!j.is_object()) throw ParseError("parameter file must be a JSON object");
  if (!j.contains("bio")) throw ParseError("parameter file needs \"bio\" (23 values)");
  FitState s;
  s.bio.angles = vector_of(j.at("bio"), "bio", kBioDofCount);
  if (j.contains("beta")) s.shape.beta = vector_of(j.at("beta"), "beta", kShapeCount);
  if (j.contains("global_rot")) s.global_rot = vector_of(j.at("global_rot"), "global_rot", 3);
  if (j.contains("translation")) s.translation = vector_of(j.at("translation"), "translation", 3);
  return s;
}

std::string fit_state_to_json(const FitState& s, const AxisTable& axes) {
  std::ostringstream os;
  os << "{\n"
     << "  \"bio\": " << list(s.bio.angles) << ",\n"
     << "  \"beta\": " << list(s.shape.beta) << ",\n"
     << "  \"global_rot\": " << list(s.global_rot) << ",\n"
     << "  \"translation\": " << list(s.translation) << ",\n"
     << "  \"articulation\": " << list(expand(s.bio, axes)) << "\n}\n";
  return os.str();
}

std::string loss_trace_csv(const FitResult& r) {
  std::ostringstream os;
  os << "iteration,loss\n0," << format_number(r.initial_loss) << '\n';
  for (std::size_t i = 0; i < r.loss_trace.size(); ++i)
    os << i + 1 << ',' << format_number(r.loss_trace[i]) << '\n';
  return os.str();
}

}  // namespace handkin
