#include "handkin/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "handkin/desk_hand.hpp"
#include "handkin/error.hpp"
#include "handkin/formats.hpp"
#include "handkin/ik_net.hpp"
#include "handkin/ik_optim.hpp"
#include "handkin/kinematics.hpp"
#include "handkin/lixel.hpp"
#include "handkin/metrics.hpp"
#include "handkin/model_io.hpp"
#include "handkin/profiler.hpp"
#include "handkin/synth.hpp"
#include "handkin/text_format.hpp"

namespace fs = std::filesystem;

namespace handkin {

namespace {

struct Common {
  std::string model;
  std::string limits;
  std::uint64_t seed = 0;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--model", c.model, "Hand model file (default: $HANDKIN_MODEL, else the built-in desk hand)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--limits", c.limits, "DoF limits file, one '<dof> <min> <max>' per line")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
}

struct Context {
  HandModel model;
  DofLimits limits;
  AxisTable axes;
  fs::path out;
};

Context load_context(const Common& c) {
  HandModel model = c.model.empty() ? default_model() : load_model(c.model);
  DofLimits limits = c.limits.empty() ? DofLimits::defaults() : DofLimits::load(c.limits);
  AxisTable axes = derive_axes(model);
  fs::create_directories(c.out);
  return {std::move(model), limits, axes, fs::path(c.out)};
}

fs::path prepare_out(const Common& c) {
  fs::create_directories(c.out);
  return fs::path(c.out);
}

const AnnotationRecord& pick(const std::vector<AnnotationRecord>& recs, int index) {
  if (index < 0 || index >= static_cast<int>(recs.size()))
    throw DomainError("record index " + std::to_string(index) + " out of range (file has " +
                      std::to_string(recs.size()) + ")");
  return recs[index];
}

// Translation that puts the wrist of the posed skeleton onto the target wrist.
Vec3 wrist_offset(const HandModel& model, const AxisTable& axes, const FitState& s, const Points3& target) {
  const ForwardResult fk = forward(model, s.full_pose(axes), s.shape);
  return (target.row(0) - fk.skeleton.joints.row(0)).transpose() + s.translation;
}

// ---- fk -------------------------------------------------------------------

struct FkArgs {
  Common common;
  std::string pose;
  bool no_blendshapes = false;
};

void cmd_fk(const FkArgs& a, std::ostream& out) {
  const Context ctx = load_context(a.common);
  const PoseRecord rec = parse_pose_json(read_text_file(a.pose), ctx.axes);
  ForwardOptions opt;
  opt.pose_blendshapes = !a.no_blendshapes;
  const ForwardResult r = forward(ctx.model, rec.pose, rec.shape, opt);
  save_obj(r.mesh, ctx.out / "mesh.obj");
  write_text_file(ctx.out / "skeleton.json", skeleton_to_json(r.skeleton));
  out << "vertices " << r.mesh.vertices.rows() << "\nfaces " << r.mesh.faces.rows() << '\n'
      << "wrote " << (ctx.out / "mesh.obj").string() << ' ' << (ctx.out / "skeleton.json").string() << '\n';
}

// ---- ik-fit ---------------------------------------------------------------

struct FitArgs {
  Common common;
  std::string target;
  std::string init;
  std::string from_ik_net;
  std::string unit = "mm";
  int record = 0;
  int iterations = 20;
  double step_size = 0.05;
  double final_step_fraction = 1.0;
  double bend_weight = 1e-2;
  std::string loss = "robust_l1";
  double robust_delta = 1.0;
  double tol = 1e-3;
  double weight_joints = 1.0;
  double weight_vertices = 1.0;
  double init_noise = 0.0;
  bool freeze_shape = false;
  bool joints_only = false;
};

void cmd_ik_fit(const FitArgs& a, std::ostream& out) {
  const Context ctx = load_context(a.common);
  const auto recs = load_annotations(a.target, unit_from_string(a.unit));
  const AnnotationRecord& rec = pick(recs, a.record);

  FitTarget target;
  target.joints = rec.joints;
  if (rec.vertices && !a.joints_only) target.vertices = *rec.vertices;
  target.weight_joints = a.weight_joints;
  target.weight_vertices = a.weight_vertices;
  target.validate(ctx.model.vertex_count());

  FitState init;
  if (!a.init.empty()) {
    init = parse_fit_state_json(read_text_file(a.init));
  } else if (!a.from_ik_net.empty()) {
    const MlpIk net = load_checkpoint(a.from_ik_net);
    const auto [theta, beta] = predict(net, featurize(Skeleton{rec.joints}, net.options().length_scale), ctx.limits);
    init.bio = theta;
    init.shape = beta;
    init.translation = wrist_offset(ctx.model, ctx.axes, init, rec.joints);
  } else {
    init.translation = wrist_offset(ctx.model, ctx.axes, init, rec.joints);
  }
  if (a.init_noise > 0.0) {
    std::mt19937_64 rng(a.common.seed);
    std::normal_distribution<double> n(0.0, a.init_noise);
    for (int d = 0; d < kBioDofCount; ++d) init.bio.angles[d] += n(rng);
    init.bio = clamp(init.bio, ctx.limits);
  }

  FitConfig cfg;
  cfg.iterations = a.iterations;
  cfg.step_size = a.step_size;
  cfg.final_step_fraction = a.final_step_fraction;
  cfg.bend_weight = a.bend_weight;
  cfg.loss_kind = loss_kind_from_string(a.loss);
  cfg.robust_delta = a.robust_delta;
  cfg.convergence_tol = a.tol;
  cfg.freeze_shape = a.freeze_shape;
  cfg.limits = ctx.limits;

  const FitResult r = fit(ctx.model, ctx.axes, init, target, cfg);
  write_text_file(ctx.out / "fit_report.txt", fit_report(r, cfg));
  write_text_file(ctx.out / "params.json", fit_state_to_json(r.state, ctx.axes));
  write_text_file(ctx.out / "loss_trace.csv", loss_trace_csv(r));
  const ForwardResult fk = forward(ctx.model, r.state.full_pose(ctx.axes), r.state.shape);
  write_text_file(ctx.out / "fitted_skeleton.json", skeleton_to_json(fk.skeleton));
  out << "initial_loss " << format_number(r.initial_loss) << "\nbest_loss " << format_number(r.best_loss)
      << "\nmean_error_mm " << format_number(r.mean_error) << "\nconverged " << (r.converged ? 1 : 0) << '\n';
}

// ---- ik-train / ik-predict -----------------------------------------------

struct TrainArgs {
  Common common;
  int pairs = 20000;
  int held_out = 1000;
  int epochs = 40;
  int batch = 32;
  double learning_rate = 1e-4;
  std::vector<int> decay_epochs = {30, 35};
  std::vector<int> widths = {256, 256, 256};
};

void cmd_ik_train(const TrainArgs& a, std::ostream& out) {
  const Context ctx = load_context(a.common);
  const std::uint64_t seed = a.common.seed;
  const SynthPairSet train_set = generate_pairs(ctx.model, ctx.axes, a.pairs, ctx.limits, seed);
  const SynthPairSet held = generate_pairs(ctx.model, ctx.axes, a.held_out, ctx.limits, seed + 1);
  MlpOptions mo;
  mo.widths = a.widths;
  MlpIk net(mo, seed);
  const double baseline = evaluate_net(net, ctx.model, ctx.axes, held, ctx.limits).pose;
  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.learning_rate = a.learning_rate;
  tc.decay_epochs = a.decay_epochs;
  tc.seed = seed;
  const TrainResult r = train(net, ctx.model, ctx.axes, train_set, tc, &held);
  save_checkpoint(net, ctx.out / "ik_net.hkb");
  write_text_file(ctx.out / "loss_curve.csv", loss_curve_csv(r));
  const double final_pose = r.curve.back().held_out_pose;
  std::ostringstream s;
  s << "train_pairs " << a.pairs << "\nheld_out_pairs " << a.held_out << "\nepochs " << a.epochs
    << "\nheld_out_pose_untrained_mm " << format_number(baseline) << "\nheld_out_pose_trained_mm "
    << format_number(final_pose) << "\nreduction " << format_number(baseline / final_pose) << '\n';
  write_text_file(ctx.out / "train_summary.txt", s.str());
  out << s.str();
}

struct PredictArgs {
  Common common;
  std::string checkpoint;
  std::string target;
  std::string unit = "mm";
  int record = 0;
};

void cmd_ik_predict(const PredictArgs& a, std::ostream& out) {
  const Context ctx = load_context(a.common);
  const MlpIk net = load_checkpoint(a.checkpoint);
  const auto recs = load_annotations(a.target, unit_from_string(a.unit));
  const AnnotationRecord& rec = pick(recs, a.record);
  const auto [theta, beta] = predict(net, featurize(Skeleton{rec.joints}, net.options().length_scale), ctx.limits);
  FitState s;
  s.bio = theta;
  s.shape = beta;
  s.translation = wrist_offset(ctx.model, ctx.axes, s, rec.joints);
  write_text_file(ctx.out / "params.json", fit_state_to_json(s, ctx.axes));
  const ForwardResult fk = forward(ctx.model, s.full_pose(ctx.axes), s.shape);
  write_text_file(ctx.out / "predicted_skeleton.json", skeleton_to_json(fk.skeleton));
  out << "mpjpe_mm " << format_number(mpjpe(fk.skeleton.joints, rec.joints)) << '\n';
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string pred, gt;
  std::vector<double> thresholds;
  std::string unit = "mm";
  bool root_center = false;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const fs::path dir = prepare_out(a.common);
  const Unit unit = unit_from_string(a.unit);
  auto to_samples = [](const std::vector<AnnotationRecord>& recs) {
    std::vector<EvalSample> s;
    for (const auto& r : recs) s.push_back({r.joints, r.vertices});
    return s;
  };
  const auto pred = to_samples(load_annotations(a.pred, unit));
  const auto gt = to_samples(load_annotations(a.gt, unit));
  EvalOptions opt;
  if (!a.thresholds.empty()) opt.thresholds = a.thresholds;
  opt.root_center = a.root_center;
  const std::string text = report_text(evaluate(pred, gt, opt));
  write_text_file(dir / "eval_report.txt", text);
  out << text;
}

// ---- profile --------------------------------------------------------------

struct ProfileArgs {
  Common common;
  std::string name;
  std::string graph;
  int resolution = 256;
  bool layers = false;
  bool dump_graph = false;
  std::vector<int> compare;
};

void cmd_profile(const ProfileArgs& a, std::ostream& out) {
  const fs::path dir = prepare_out(a.common);
  std::string text;
  if (!a.compare.empty()) {
    if (a.compare.size() != 2) throw DomainError("--compare takes <channels> <spatial>");
    text = comparison_text(compare_decoders(a.compare[0], a.compare[1]));
    write_text_file(dir / "decoder_comparison.txt", text);
    out << text;
    return;
  }
  if (a.name.empty() == a.graph.empty()) throw DomainError("give a catalog name or --graph, not both");
  const NetGraph g = a.graph.empty() ? catalog(a.name) : load_graph(a.graph);
  const ProfileReport r = profile(g, a.resolution);
  text = report_table(r);
  if (a.layers) {
    std::ostringstream os;
    os << "stage kind k cin cout stride groups input output macs\n";
    for (const auto& l : r.layers)
      os << l.stage << ' ' << to_string(l.layer.kind) << ' ' << l.layer.kernel << ' ' << l.layer.in_channels
         << ' ' << l.layer.out_channels << ' ' << l.layer.stride << ' ' << l.layer.groups << ' ' << l.input.c
         << 'x' << l.input.h << 'x' << l.input.w << ' ' << l.output.c << 'x' << l.output.h << 'x'
         << l.output.w << ' ' << l.macs << '\n';
    text += os.str();
  }
  write_text_file(dir / "profile_report.txt", text);
  if (a.dump_graph) write_text_file(dir / (g.name + ".graph"), graph_to_text(g));
  out << text;
}

// ---- synth ----------------------------------------------------------------

struct CamerasArgs {
  Common common;
  CameraGrid grid;
  int samples_per_camera = 32;
};

void cmd_synth_cameras(const CamerasArgs& a, std::ostream& out) {
  const fs::path dir = prepare_out(a.common);
  const auto cams = sample_cameras(a.grid);
  write_text_file(dir / "cameras.csv", cameras_csv(cams));
  out << "cameras " << cams.size() << "\nsamples " << cams.size() * a.samples_per_camera << '\n';
}

struct PosesArgs {
  Common common;
  std::string library;
  int base_count = kBaseLibrarySize;
  int per_pose = 64;
  double swap_probability = 0.5;
};

void cmd_synth_poses(const PosesArgs& a, std::ostream& out) {
  const Context ctx = load_context(a.common);
  const PoseLibrary base = a.library.empty()
                               ? generate_base_library(ctx.axes, ctx.limits, a.base_count, a.common.seed)
                               : load_pose_library(a.library);
  AugmentOptions o;
  o.per_pose = a.per_pose;
  o.swap_probability = a.swap_probability;
  o.seed = a.common.seed;
  const PoseLibrary aug = augment_library(base, o);
  save_pose_library(aug, ctx.out / "poses.hkb");
  out << "base_poses " << base.poses.size() << "\nper_pose " << a.per_pose << "\nposes " << aug.poses.size()
      << '\n';
}

// ---- model ----------------------------------------------------------------

struct ModelArgs {
  Common common;
  bool text = false;
  bool with_pose_basis = false;
  std::string input;
  std::string name;
};

void write_model(const HandModel& m, const fs::path& dir, const std::string& stem, bool text, std::ostream& out) {
  const fs::path p = dir / (stem + (text ? ".txt" : ".hkb"));
  save_model(m, p, text ? ModelEncoding::text : ModelEncoding::binary);
  out << "vertices " << m.vertex_count() << "\nfaces " << m.face_count() << "\npose_basis "
      << (m.has_pose_basis() ? 1 : 0) << "\nwrote " << p.string() << '\n';
}

void cmd_model_export_desk(const ModelArgs& a, std::ostream& out) {
  const fs::path dir = prepare_out(a.common);
  DeskHandOptions o;
  o.with_pose_basis = a.with_pose_basis;
  write_model(make_desk_hand(o), dir, a.name.empty() ? "desk_hand" : a.name, a.text, out);
}

void cmd_model_convert_mano(const ModelArgs& a, std::ostream& out) {
  const fs::path dir = prepare_out(a.common);
  write_model(model_from_mano_arrays(ArrayBundle::load(a.input)), dir, a.name.empty() ? "model" : a.name, a.text,
              out);
}

// ---- lixel ----------------------------------------------------------------

struct LixelArgs {
  Common common;
  std::vector<double> coord = {0.5, 0.5, 0.5};
  int lixels = kDefaultLixels;
  double sigma = kDefaultLixelSigma;
};

void cmd_lixel_dump(const LixelArgs& a, std::ostream& out) {
  const fs::path dir = prepare_out(a.common);
  if (a.coord.size() != 3) throw DomainError("--coord takes three values");
  std::array<Heatmap1D, 3> enc;
  for (int i = 0; i < 3; ++i) enc[i] = encode(a.coord[i], a.lixels, a.sigma, static_cast<Axis>(i));
  // Separable 3D likelihood, then back to three 1D maps.
  Grid3D grid(a.lixels, a.lixels, a.lixels);
  for (int x = 0; x < a.lixels; ++x)
    for (int y = 0; y < a.lixels; ++y)
      for (int z = 0; z < a.lixels; ++z)
        grid.at(x, y, z) = enc[0].values[x] * enc[1].values[y] * enc[2].values[z];
  const auto maps = marginalize(grid);
  write_text_file(dir / "heatmaps.csv", heatmaps_csv(maps));
  for (int i = 0; i < 3; ++i)
    out << "decoded_" << static_cast<char>('x' + i) << ' ' << format_number(decode(maps[i]))
        << " soft_argmax_" << static_cast<char>('x' + i) << ' ' << format_number(soft_argmax(maps[i])) << '\n';
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hand kinematics toolkit: forward/inverse kinematics, metrics, profiling, synthesis", "handkin"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "handkin 0.1.0");

  FkArgs fk;
  auto* c_fk = app.add_subcommand("fk", "Pose a hand model; writes mesh.obj and skeleton.json");
  add_common(c_fk, fk.common);
  c_fk->add_option("--pose", fk.pose, "Pose JSON file")->required()->check(CLI::ExistingFile);
  c_fk->add_flag("--no-pose-blendshapes", fk.no_blendshapes, "Skip pose-corrective blendshapes");

  FitArgs fa;
  auto* c_fit = app.add_subcommand("ik-fit", "Fit BioPose, shape and global pose to a joint/vertex target");
  add_common(c_fit, fa.common);
  c_fit->set_config("--config", "", "Config file (TOML/INI) with option values");
  c_fit->add_option("--target", fa.target, "Annotation file with the target joints")->required()->check(CLI::ExistingFile);
  auto* o_init = c_fit->add_option("--init", fa.init, "Initial parameters JSON")->check(CLI::ExistingFile);
  c_fit->add_option("--from-ik-net", fa.from_ik_net, "Initialize from an IK network checkpoint")
      ->check(CLI::ExistingFile)
      ->excludes(o_init);
  c_fit->add_option("--unit", fa.unit, "Unit of records without one (mm|m)")->capture_default_str();
  c_fit->add_option("--record", fa.record, "Record index in the target file")->capture_default_str();
  c_fit->add_option("--iterations", fa.iterations, "Optimizer iterations")->capture_default_str();
  c_fit->add_option("--step-size", fa.step_size, "Step size")->capture_default_str();
  c_fit->add_option("--final-step-fraction", fa.final_step_fraction, "Linear step decay target")->capture_default_str();
  c_fit->add_option("--bend-weight", fa.bend_weight, "Bend-consistency weight")->capture_default_str();
  c_fit->add_option("--loss", fa.loss, "Data loss: robust_l1 | l2")->capture_default_str();
  c_fit->add_option("--robust-delta", fa.robust_delta, "Robust loss scale (mm)")->capture_default_str();
  c_fit->add_option("--tol", fa.tol, "Stop at this mean error (mm)")->capture_default_str();
  c_fit->add_option("--weight-joints", fa.weight_joints, "Joint term weight")->capture_default_str();
  c_fit->add_option("--weight-vertices", fa.weight_vertices, "Vertex term weight")->capture_default_str();
  c_fit->add_option("--init-noise", fa.init_noise, "Seeded Gaussian noise (rad) added to the initial BioPose")
      ->capture_default_str();
  c_fit->add_flag("--freeze-shape", fa.freeze_shape, "Keep the shape coefficients fixed");
  c_fit->add_flag("--joints-only", fa.joints_only, "Ignore target vertices");

  TrainArgs ta;
  auto* c_train = app.add_subcommand("ik-train", "Train the IK network on synthetic FK pairs");
  add_common(c_train, ta.common);
  c_train->add_option("--pairs", ta.pairs, "Training pairs")->capture_default_str();
  c_train->add_option("--held-out", ta.held_out, "Held-out pairs")->capture_default_str();
  c_train->add_option("--epochs", ta.epochs, "Epochs")->capture_default_str();
  c_train->add_option("--batch", ta.batch, "Batch size")->capture_default_str();
  c_train->add_option("--learning-rate", ta.learning_rate, "Adam learning rate")->capture_default_str();
  c_train->add_option("--decay-epochs", ta.decay_epochs, "Epochs after which the rate drops 10x")->capture_default_str();
  c_train->add_option("--widths", ta.widths, "Hidden widths")->capture_default_str();

  PredictArgs pa;
  auto* c_pred = app.add_subcommand("ik-predict", "Predict BioPose and shape from a skeleton");
  add_common(c_pred, pa.common);
  c_pred->add_option("--checkpoint", pa.checkpoint, "Network checkpoint")->required()->check(CLI::ExistingFile);
  c_pred->add_option("--target", pa.target, "Annotation file")->required()->check(CLI::ExistingFile);
  c_pred->add_option("--unit", pa.unit, "Unit of records without one (mm|m)")->capture_default_str();
  c_pred->add_option("--record", pa.record, "Record index")->capture_default_str();

  EvalArgs ea;
  auto* c_eval = app.add_subcommand("eval", "MPJPE / PA-MPJPE / F-score of predictions against ground truth");
  add_common(c_eval, ea.common);
  c_eval->add_option("--pred", ea.pred, "Predicted annotations")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--gt", ea.gt, "Ground-truth annotations")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--threshold", ea.thresholds, "F-score threshold in mm (repeatable; default 5 and 15)")
      ->allow_extra_args(false);
  c_eval->add_option("--unit", ea.unit, "Unit of records without one (mm|m)")->capture_default_str();
  c_eval->add_flag("--root-center", ea.root_center, "Subtract the wrist before unaligned metrics");

  ProfileArgs pra;
  auto* c_prof = app.add_subcommand("profile", "MAC counts of a catalog network or a graph file");
  add_common(c_prof, pra.common);
  c_prof->add_option("name", pra.name, "Catalog graph name");
  c_prof->add_option("--graph", pra.graph, "Graph description file")->check(CLI::ExistingFile);
  c_prof->add_option("--resolution", pra.resolution, "Input resolution")->capture_default_str();
  c_prof->add_flag("--layers", pra.layers, "Append a per-layer breakdown");
  c_prof->add_flag("--dump-graph", pra.dump_graph, "Also write the graph description");
  c_prof->add_option("--compare", pra.compare, "Compare decoder blocks A/B/C at <channels> <spatial>")
      ->expected(2);

  auto* c_synth = app.add_subcommand("synth", "Synthetic camera grids and pose libraries");
  c_synth->require_subcommand(1);
  CamerasArgs ca;
  auto* c_cams = c_synth->add_subcommand("cameras", "Camera positions on the unit sphere");
  add_common(c_cams, ca.common);
  c_cams->add_option("--elev-min", ca.grid.elev_min, "Minimum elevation (rad)")->capture_default_str();
  c_cams->add_option("--elev-max", ca.grid.elev_max, "Maximum elevation (rad)")->capture_default_str();
  c_cams->add_option("--elev-step", ca.grid.elev_step, "Elevation step (rad)")->capture_default_str();
  c_cams->add_option("--azim-step", ca.grid.azim_step, "Azimuth step (rad)")->capture_default_str();
  c_cams->add_option("--samples-per-camera", ca.samples_per_camera, "Samples per camera")->capture_default_str();
  PosesArgs po;
  auto* c_poses = c_synth->add_subcommand("poses", "Finger-swap augmentation of a pose library");
  add_common(c_poses, po.common);
  c_poses->add_option("--library", po.library, "Base library (N, 45); default: generated stand-in")
      ->check(CLI::ExistingFile);
  c_poses->add_option("--base-count", po.base_count, "Size of the generated base library")->capture_default_str();
  c_poses->add_option("--per-pose", po.per_pose, "Variants per base pose")->capture_default_str();
  c_poses->add_option("--swap-probability", po.swap_probability, "Per-finger swap probability")
      ->capture_default_str();

  auto* c_model = app.add_subcommand("model", "Model files");
  c_model->require_subcommand(1);
  ModelArgs md;
  auto* c_desk = c_model->add_subcommand("export-desk", "Write the built-in desk hand");
  add_common(c_desk, md.common);
  c_desk->add_flag("--text", md.text, "Text encoding");
  c_desk->add_flag("--with-pose-basis", md.with_pose_basis, "Include a synthetic pose-corrective basis");
  c_desk->add_option("--name", md.name, "Output file stem");
  ModelArgs mm;
  auto* c_mano = c_model->add_subcommand("convert-mano", "Convert MANO-layout arrays to a model file");
  add_common(c_mano, mm.common);
  c_mano->add_option("--input", mm.input, "Bundle with v_template, shapedirs, posedirs, J_regressor, weights, f")
      ->required()
      ->check(CLI::ExistingFile);
  c_mano->add_flag("--text", mm.text, "Text encoding");
  c_mano->add_option("--name", mm.name, "Output file stem");

  auto* c_lixel = app.add_subcommand("lixel", "Lixel heatmap utilities");
  c_lixel->require_subcommand(1);
  LixelArgs la;
  auto* c_dump = c_lixel->add_subcommand("dump", "Encode a point, marginalize its 3D grid, write the 1D maps");
  add_common(c_dump, la.common);
  c_dump->add_option("--coord", la.coord, "Normalized x y z in [0, 1]")->expected(3);
  c_dump->add_option("--lixels", la.lixels, "Heatmap length")->capture_default_str();
  c_dump->add_option("--sigma", la.sigma, "Gaussian sigma (lixels)")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "handkin 0.1.0\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  }

  if (c_fk->parsed()) cmd_fk(fk, out);
  else if (c_fit->parsed()) cmd_ik_fit(fa, out);
  else if (c_train->parsed()) cmd_ik_train(ta, out);
  else if (c_pred->parsed()) cmd_ik_predict(pa, out);
  else if (c_eval->parsed()) cmd_eval(ea, out);
  else if (c_prof->parsed()) cmd_profile(pra, out);
  else if (c_cams->parsed()) cmd_synth_cameras(ca, out);
  else if (c_poses->parsed()) cmd_synth_poses(po, out);
  else if (c_desk->parsed()) cmd_model_export_desk(md, out);
  else if (c_mano->parsed()) cmd_model_convert_mano(mm, out);
  else if (c_dump->parsed()) cmd_lixel_dump(la, out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run(args, out, err);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const DomainError& e) {
    err << "invalid value: " << e.what() << '\n';
    return kExitParse;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kExitShape;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace handkin
