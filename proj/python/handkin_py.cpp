#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "handkin/bio_dof.hpp"
#include "handkin/cli.hpp"
#include "handkin/desk_hand.hpp"
#include "handkin/error.hpp"
#include "handkin/ik_optim.hpp"
#include "handkin/kinematics.hpp"
#include "handkin/lixel.hpp"
#include "handkin/metrics.hpp"
#include "handkin/model_io.hpp"
#include "handkin/profiler.hpp"

namespace py = pybind11;
using namespace handkin;

namespace {

FullPose make_pose(const Articulation& articulation, const Vec3& global_rot, const Vec3& translation) {
  FullPose p;
  p.articulation = articulation;
  p.global_rot = global_rot;
  p.translation = translation;
  return p;
}

ShapeParams make_shape(const Beta& beta) {
  ShapeParams s;
  s.beta = beta;
  return s;
}

}  // namespace

PYBIND11_MODULE(_handkin, m) {
  m.doc() = "Hand kinematics: parametric hand model, bio DoFs, IK fitting, metrics, profiler";
  m.attr("__version__") = "0.1.0";
  m.attr("JOINT_COUNT") = kJointCount;
  m.attr("BIO_DOF_COUNT") = kBioDofCount;
  m.attr("SHAPE_COUNT") = kShapeCount;

  auto base = py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  (void)base;

  py::class_<HandModel>(m, "HandModel")
      .def_property_readonly("vertex_count", &HandModel::vertex_count)
      .def_property_readonly("face_count", &HandModel::face_count)
      .def_property_readonly("name", &HandModel::name)
      .def_property_readonly("has_pose_basis", &HandModel::has_pose_basis)
      .def_property_readonly("rest_vertices", &HandModel::rest_vertices)
      .def_property_readonly("faces", &HandModel::faces)
      .def_property_readonly("joint_regressor", &HandModel::joint_regressor)
      .def_property_readonly("parents", &HandModel::parents);

  m.def("desk_hand", [](bool with_pose_basis) {
    DeskHandOptions o;
    o.with_pose_basis = with_pose_basis;
    return make_desk_hand(o);
  }, py::arg("with_pose_basis") = false);
  m.def("load_model", [](const std::string& path) { return load_model(path); }, py::arg("path"));
  m.def("save_model", [](const HandModel& model, const std::string& path) { save_model(model, path); },
        py::arg("model"), py::arg("path"));

  m.def("rest_joints", [](const HandModel& model, const Beta& beta) {
    return rest_joints(model, make_shape(beta)).joints;
  }, py::arg("model"), py::arg("beta") = Beta::Zero().eval());

  m.def("forward", [](const HandModel& model, const Articulation& articulation, const Vec3& global_rot,
                      const Vec3& translation, const Beta& beta) {
    const ForwardResult r = forward(model, make_pose(articulation, global_rot, translation), make_shape(beta));
    return py::make_tuple(r.mesh.vertices, r.skeleton.joints);
  }, py::arg("model"), py::arg("articulation"), py::arg("global_rot") = Vec3::Zero().eval(),
     py::arg("translation") = Vec3::Zero().eval(), py::arg("beta") = Beta::Zero().eval(),
     "Returns (vertices V x 3, joints 21 x 3) in mm.");

  m.def("bio_dof_names", [] {
    std::vector<std::string> names;
    for (int d = 0; d < kBioDofCount; ++d) names.emplace_back(BioPose::dof_name(d));
    return names;
  });
  m.def("expand_bio", [](const HandModel& model, const Eigen::Matrix<double, kBioDofCount, 1>& angles) {
    BioPose b;
    b.angles = angles;
    return Articulation(expand(b, derive_axes(model)));
  }, py::arg("model"), py::arg("bio"));
  m.def("expansion_matrix", [](const HandModel& model) {
    return Eigen::MatrixXd(derive_axes(model).expansion_matrix());
  }, py::arg("model"));

  m.def("fit_joints", [](const HandModel& model, const Points3& joints, int iterations, double step_size,
                         bool freeze_shape) {
    FitTarget target;
    target.joints = joints;
    FitConfig config;
    config.iterations = iterations;
    config.step_size = step_size;
    config.freeze_shape = freeze_shape;
    const AxisTable axes = derive_axes(model);
    const FitResult r = fit(model, axes, FitState{}, target, config);
    py::dict out;
    out["bio"] = Eigen::VectorXd(r.state.bio.angles);
    out["beta"] = Eigen::VectorXd(r.state.shape.beta);
    out["global_rot"] = r.state.global_rot;
    out["translation"] = r.state.translation;
    out["initial_loss"] = r.initial_loss;
    out["best_loss"] = r.best_loss;
    out["mean_error_mm"] = r.mean_error;
    out["loss_trace"] = r.loss_trace;
    return out;
  }, py::arg("model"), py::arg("joints"), py::arg("iterations") = 20, py::arg("step_size") = 0.05,
     py::arg("freeze_shape") = false);

  m.def("mpjpe", &mpjpe, py::arg("pred"), py::arg("gt"));
  m.def("pa_mpjpe", [](const Points3& pred, const Points3& gt) {
    return mpjpe(procrustes_align(pred, gt).aligned, gt);
  }, py::arg("pred"), py::arg("gt"));
  m.def("procrustes_align", [](const Points3& pred, const Points3& gt) {
    const ProcrustesResult r = procrustes_align(pred, gt);
    return py::make_tuple(r.aligned, r.transform.scale, r.transform.rotation, r.transform.translation);
  }, py::arg("pred"), py::arg("gt"), "Returns (aligned, scale, rotation, translation).");
  m.def("fscore", &fscore, py::arg("pred"), py::arg("gt"), py::arg("threshold"));

  m.def("lixel_encode", [](double coord, int lixels, double sigma) {
    return encode(coord, lixels, sigma).values;
  }, py::arg("coord"), py::arg("lixels") = kDefaultLixels, py::arg("sigma") = kDefaultLixelSigma);
  m.def("lixel_decode", [](const Eigen::VectorXd& values) {
    Heatmap1D h;
    h.values = values;
    return decode(h);
  }, py::arg("values"));
  m.def("lixel_soft_argmax", [](const Eigen::VectorXd& values) {
    Heatmap1D h;
    h.values = values;
    return soft_argmax(h);
  }, py::arg("values"));

  m.def("catalog_names", &catalog_names);
  m.def("profile_macs", [](const std::string& name, int resolution) {
    const ProfileReport r = profile(catalog(name), resolution);
    py::dict stages;
    for (const auto& s : r.stages) stages[py::str(s.name)] = s.macs;
    return py::make_tuple(r.total, stages);
  }, py::arg("name"), py::arg("resolution") = 256, "Returns (total MACs, {stage: MACs}).");

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs the command-line tool in process; returns (exit code, stdout, stderr).");
}
