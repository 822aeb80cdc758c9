#include "handkin/model_io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "handkin/desk_hand.hpp"
#include "handkin/error.hpp"
#include "handkin/text_format.hpp"

namespace handkin {

namespace {

constexpr int kPoseFeatures = kPoseBasisPerJoint * (kArticulatedCount - 1);

// Our articulated index -> MANO joint index.
constexpr std::array<int, kArticulatedCount> kManoJoint = {0,  13, 14, 15, 1, 2, 3, 4,
                                                           5,  6,  10, 11, 12, 7, 8, 9};

// Reads a (K, V, 3) array into a 3V x K matrix of flattened columns.
Eigen::MatrixXd basis_from_kv3(const NamedArray& a, Eigen::Index v, int k) {
  if (a.shape != std::vector<std::size_t>{static_cast<std::size_t>(k), static_cast<std::size_t>(v), 3})
    throw ShapeError("array '" + a.name + "' must have shape (" + std::to_string(k) + "," +
                     std::to_string(v) + ",3)");
  Eigen::MatrixXd m(3 * v, k);
  for (int c = 0; c < k; ++c)
    for (Eigen::Index i = 0; i < 3 * v; ++i) m(i, c) = a.data[c * 3 * v + i];
  return m;
}

NamedArray basis_to_kv3(const std::string& name, const Eigen::MatrixXd& basis, Eigen::Index v) {
  NamedArray a{name, DType::f32,
               {static_cast<std::size_t>(basis.cols()), static_cast<std::size_t>(v), 3}, {}};
  a.data.resize(basis.size());
  for (Eigen::Index c = 0; c < basis.cols(); ++c)
    for (Eigen::Index i = 0; i < 3 * v; ++i) a.data[c * 3 * v + i] = basis(i, c);
  return a;
}

Eigen::MatrixXd checked_matrix(const ArrayBundle& b, const std::string& name, Eigen::Index rows,
                               Eigen::Index cols) {
  const auto& a = b.at(name);
  if (a.shape.size() != 2 || static_cast<Eigen::Index>(a.shape[0]) != rows ||
      static_cast<Eigen::Index>(a.shape[1]) != cols)
    throw ShapeError("array '" + name + "' must have shape (" + std::to_string(rows) + "," +
                     std::to_string(cols) + ")");
  return b.matrix(name);
}

int int_attribute(const ArrayBundle& b, const std::string& key) {
  try {
    return std::stoi(b.attribute(key));
  } catch (const std::logic_error&) {
    throw ParseError("attribute '" + key + "' is not an integer");
  }
}

double unit_scale(const std::string& unit) {
  if (unit == "mm") return 1.0;
  if (unit == "m") return 1000.0;
  throw ParseError("unknown unit '" + unit + "' (expected mm or m)");
}

}  // namespace

ArrayBundle model_to_bundle(const HandModel& model) {
  const auto v = model.vertex_count();
  ArrayBundle b;
  b.set_attribute("kind", "hand_model");
  b.set_attribute("unit", "mm");
  b.set_attribute("name", model.name());
  b.set_attribute("vertex_count", std::to_string(v));
  b.set_attribute("joint_count", std::to_string(kJointCount));
  b.set_attribute("articulated_count", std::to_string(kArticulatedCount));
  b.set_attribute("shape_count", std::to_string(kShapeCount));
  b.set_attribute("face_count", std::to_string(model.face_count()));
  b.set_attribute("has_pose_basis", model.has_pose_basis() ? "1" : "0");

  b.add_matrix("rest_vertices", DType::f32, model.rest_vertices());
  b.add(basis_to_kv3("shape_basis", model.shape_basis(), v));
  if (model.has_pose_basis()) b.add(basis_to_kv3("pose_basis", model.pose_basis(), v));
  b.add_matrix("joint_regressor", DType::f32, model.joint_regressor());
  b.add_matrix("skinning_weights", DType::f32, model.skinning_weights());
  b.add_vector("parents", DType::i32,
               std::vector<double>(model.parents().begin(), model.parents().end()));
  b.add_matrix("faces", DType::i32, model.faces().cast<double>());
  return b;
}

HandModel model_from_bundle(const ArrayBundle& b) {
  if (!b.has_attribute("kind") || b.attribute("kind") != "hand_model")
    throw ParseError("bundle is not a hand model");
  const double scale = unit_scale(b.has_attribute("unit") ? b.attribute("unit") : "mm");
  const int v = int_attribute(b, "vertex_count");
  if (v < 1) throw ShapeError("vertex_count must be positive");
  if (int_attribute(b, "joint_count") != kJointCount ||
      int_attribute(b, "articulated_count") != kArticulatedCount ||
      int_attribute(b, "shape_count") != kShapeCount)
    throw ShapeError("model header counts do not match the 21-joint / 16-articulated / 10-shape layout");
  const bool has_pose = int_attribute(b, "has_pose_basis") != 0;
  if (has_pose != b.contains("pose_basis"))
    throw ShapeError("has_pose_basis flag disagrees with the stored arrays");

  HandModelData d;
  d.name = b.has_attribute("name") ? b.attribute("name") : "unnamed";
  d.rest_vertices = checked_matrix(b, "rest_vertices", v, 3) * scale;
  d.shape_basis = basis_from_kv3(b.at("shape_basis"), v, kShapeCount) * scale;
  if (has_pose) d.pose_basis = basis_from_kv3(b.at("pose_basis"), v, kPoseFeatures) * scale;
  d.joint_regressor = checked_matrix(b, "joint_regressor", kJointCount, v);
  d.skinning_weights = checked_matrix(b, "skinning_weights", v, kArticulatedCount);
  const auto& parents = b.at("parents");
  if (parents.data.size() != kJointCount) throw ShapeError("parents must list 21 joints");
  for (int j = 0; j < kJointCount; ++j) d.parents[j] = static_cast<int>(parents.data[j]);
  if (b.contains("faces")) {
    const int f = b.has_attribute("face_count") ? int_attribute(b, "face_count")
                                                : static_cast<int>(b.at("faces").shape.at(0));
    d.faces = checked_matrix(b, "faces", f, 3).cast<int>();
  }
  return HandModel(std::move(d));
}

void save_model(const HandModel& model, const std::filesystem::path& path, ModelEncoding encoding) {
  const auto b = model_to_bundle(model);
  if (encoding == ModelEncoding::binary)
    b.save_binary(path);
  else
    b.save_text(path);
}

HandModel load_model(const std::filesystem::path& path) {
  return model_from_bundle(ArrayBundle::load(path));
}

HandModel default_model() {
  if (const char* env = std::getenv(kModelEnvVar); env != nullptr && *env != '\0')
    return load_model(env);
  return make_desk_hand();
}

HandModel model_from_mano_arrays(const ArrayBundle& mano, const ManoConversion& options) {
  const double scale = unit_scale(mano.has_attribute("unit") ? mano.attribute("unit") : "m");
  const auto& vt = mano.at("v_template");
  if (vt.shape.size() != 2 || vt.shape[1] != 3) throw ShapeError("v_template must be (V,3)");
  const auto v = static_cast<Eigen::Index>(vt.shape[0]);

  HandModelData d;
  d.name = mano.has_attribute("name") ? mano.attribute("name") : "mano";
  d.rest_vertices = mano.matrix("v_template") * scale;

  // (V,3,K) -> 3V x K with the same flattening as shape_basis.
  auto vk_basis = [&](const std::string& name, int k) {
    const auto& a = mano.at(name);
    if (a.shape != std::vector<std::size_t>{static_cast<std::size_t>(v), 3, static_cast<std::size_t>(k)})
      throw ShapeError("'" + name + "' must have shape (V,3," + std::to_string(k) + ")");
    Eigen::MatrixXd m(3 * v, k);
    for (Eigen::Index i = 0; i < 3 * v; ++i)
      for (int c = 0; c < k; ++c) m(i, c) = a.data[i * k + c] * scale;
    return m;
  };
  d.shape_basis = vk_basis("shapedirs", kShapeCount);
  if (mano.contains("posedirs")) {
    const Eigen::MatrixXd raw = vk_basis("posedirs", kPoseFeatures);
    d.pose_basis.resize(3 * v, kPoseFeatures);
    for (int a = 1; a < kArticulatedCount; ++a)
      d.pose_basis.middleCols<9>(9 * (a - 1)) = raw.middleCols<9>(9 * (kManoJoint[a] - 1));
  }

  const Eigen::MatrixXd reg = checked_matrix(mano, "J_regressor", kArticulatedCount, v);
  const Eigen::MatrixXd w = checked_matrix(mano, "weights", v, kArticulatedCount);
  d.joint_regressor = Eigen::MatrixXd::Zero(kJointCount, v);
  d.skinning_weights.resize(v, kArticulatedCount);
  for (int a = 0; a < kArticulatedCount; ++a) {
    d.joint_regressor.row(articulated_to_joint(a)) = reg.row(kManoJoint[a]);
    d.skinning_weights.col(a) = w.col(kManoJoint[a]);
  }
  for (int f = 0; f < kFingerCount; ++f) {
    const int tip = options.tip_vertices[f];
    if (tip < 0 || tip >= v) throw ShapeError("fingertip vertex index out of range");
    d.joint_regressor(joint_index(f, 3), tip) = 1.0;
  }
  if (mano.contains("f")) d.faces = mano.matrix("f").cast<int>();
  return HandModel(std::move(d));
}

Articulation articulation_from_mano(const Articulation& mano) {
  Articulation out;
  for (int a = 1; a < kArticulatedCount; ++a)
    out.segment<3>(3 * (a - 1)) = mano.segment<3>(3 * (kManoJoint[a] - 1));
  return out;
}

Articulation articulation_to_mano(const Articulation& ours) {
  Articulation out;
  for (int a = 1; a < kArticulatedCount; ++a)
    out.segment<3>(3 * (kManoJoint[a] - 1)) = ours.segment<3>(3 * (a - 1));
  return out;
}

std::string mesh_to_obj(const Mesh& mesh) {
  std::ostringstream os;
  os << "# handkin mesh, units mm\n";
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i)
    os << "v " << format_number(mesh.vertices(i, 0)) << ' ' << format_number(mesh.vertices(i, 1))
       << ' ' << format_number(mesh.vertices(i, 2)) << '\n';
  for (Eigen::Index i = 0; i < mesh.faces.rows(); ++i)
    os << "f " << mesh.faces(i, 0) + 1 << ' ' << mesh.faces(i, 1) + 1 << ' ' << mesh.faces(i, 2) + 1
       << '\n';
  return os.str();
}

void save_obj(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open '" + path.string() + "' for writing");
  os << mesh_to_obj(mesh);
}

}  // namespace handkin
