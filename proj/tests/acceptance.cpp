// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "chain_oracle.hpp"
#include "handkin/array_bundle.hpp"
#include "handkin/bio_dof.hpp"
#include "handkin/desk_hand.hpp"
#include "handkin/formats.hpp"
#include "handkin/ik_net.hpp"
#include "handkin/ik_optim.hpp"
#include "handkin/kinematics.hpp"
#include "handkin/lixel.hpp"
#include "handkin/metrics.hpp"
#include "handkin/model_io.hpp"
#include "handkin/profiler.hpp"
#include "handkin/rotation.hpp"
#include "handkin/synth.hpp"
#include "handkin/text_format.hpp"

using namespace handkin;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) { return format_number(v, digits); }

const HandModel& model() {
  static const HandModel m = make_desk_hand();
  return m;
}

const AxisTable& axes() {
  static const AxisTable a = derive_axes(model());
  return a;
}

BioPose random_bio(std::mt19937_64& rng, const DofLimits& l = DofLimits::defaults()) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BioPose b;
  for (int d = 0; d < kBioDofCount; ++d) b.angles[d] = l.lower[d] + u(rng) * (l.upper[d] - l.lower[d]);
  return b;
}

ShapeParams random_beta(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.5);
  ShapeParams s;
  for (int i = 0; i < kShapeCount; ++i) s.beta[i] = n(rng);
  return s;
}

Vec3 random_rotvec(std::mt19937_64& rng, double max_angle = 2.5) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return Vec3(n(rng), n(rng), n(rng)).normalized() * u(rng);
}

Vec3 random_vec(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  return Vec3(n(rng), n(rng), n(rng));
}

FitState random_state(std::mt19937_64& rng) {
  FitState s;
  s.bio = random_bio(rng);
  s.shape = random_beta(rng);
  s.global_rot = random_rotvec(rng);
  s.translation = random_vec(rng, 50.0);
  return s;
}

// ---- 1 ---------------------------------------------------------------------

Outcome camera_grid() {
  const auto cams = sample_cameras();
  const std::size_t samples = cams.size() * 32;
  return {cams.size() == 2232 && samples == 71424,
          std::to_string(cams.size()) + " cameras x 32 = " + std::to_string(samples) + " samples"};
}

// ---- 2 ---------------------------------------------------------------------

Outcome pose_augmentation() {
  const PoseLibrary base = generate_base_library(axes(), DofLimits::defaults());
  const PoseLibrary aug = augment_library(base, {});
  return {base.poses.size() == 895 && aug.poses.size() == 57280,
          std::to_string(base.poses.size()) + " base x 64 = " + std::to_string(aug.poses.size()) + " variants"};
}

// ---- 3 ---------------------------------------------------------------------

Outcome profiler_table() {
  const double resnet = profile(catalog("resnet50"), 256).gmacs();
  const double effnet = profile(catalog("efficientnet_b0"), 256).gmacs();
  const bool resnet_ok = std::abs(resnet - 5.38) <= 0.02 * 5.38;
  const bool effnet_ok = effnet <= 0.15 * resnet;
  int configs = 0, ordered = 0;
  for (int c : {8, 9, 12, 16, 24, 32, 48, 64, 96, 128, 256, 512, 1024, 1280, 2048})
    for (int s : {1, 2, 4, 8, 16, 32, 64}) {
      ++configs;
      if (compare_decoders(c, s).ordered) ++ordered;
    }
  return {resnet_ok && effnet_ok && ordered == configs,
          "resnet50 " + num(resnet) + " GMACs (target 5.38 +-2%), efficientnet_b0 " + num(effnet) + " (" +
              num(100 * effnet / resnet, 3) + "% of resnet50, limit 15%), C<A<B in " + std::to_string(ordered) +
              "/" + std::to_string(configs) + " configs with C >= 8"};
}

// ---- 4 ---------------------------------------------------------------------

Outcome fk_oracle() {
  std::mt19937_64 rng(4);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    FullPose pose;
    pose.articulation = expand(random_bio(rng), axes());
    pose.global_rot = random_rotvec(rng);
    pose.translation = random_vec(rng, 100.0);
    const ShapeParams beta = random_beta(rng);
    KinematicsEvaluator ev(model());
    ev.evaluate(pose, beta, VertexSubset::none);
    const ForwardResult want = test::chain_oracle(model(), pose, beta);
    worst = std::max(worst, (ev.skeleton().joints - want.skeleton.joints).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-6, "max joint deviation " + num(worst, 3) + " mm over 1000 feasible poses (limit 1e-6)"};
}

// ---- 5 ---------------------------------------------------------------------

// Relative error |a - b| / max(|a|, |b|); components where both are below
// `floor` are compared on the absolute scale of the floor instead.
double rel_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

Outcome gradient_fidelity() {
  std::mt19937_64 rng(5);
  constexpr double kFitFloor = 1e-6, kNetFloor = 1e-6;
  double worst_fit = 0;
  int components = 0, floored = 0;
  for (int t = 0; t < 100; ++t) {
    const FitState truth = random_state(rng), s = random_state(rng);
    const ForwardResult r = forward(model(), truth.full_pose(axes()), truth.shape);
    FitTarget target;
    target.joints = r.skeleton.joints;
    if (t % 2 == 1) target.vertices = r.mesh.vertices;
    const LossKind kind = t % 4 == 3 ? LossKind::l2 : LossKind::robust_l1;
    FitObjective obj(model(), axes(), target, kind, 1.0, 1e-2);
    FitVector g;
    obj.loss_and_gradient(s, g);
    const FitVector x = s.pack();
    for (int i = 0; i < kFitParamCount; ++i) {
      // Five-point stencil: the loss is O(100), so a plain central difference
      // loses small components to rounding before truncation error matters.
      auto f = [&](double d) {
        FitVector y = x;
        y[i] += d;
        return obj.loss(FitState::unpack(y)).total;
      };
      const double h = 1e-3;
      const double fd = (8 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12 * h);
      worst_fit = std::max(worst_fit, rel_error(g[i], fd, kFitFloor));
      ++components;
      if (std::max(std::abs(g[i]), std::abs(fd)) < kFitFloor) ++floored;
    }
  }

  const SynthPairSet pairs = generate_pairs(model(), axes(), 16, DofLimits::defaults(), 55);
  MlpIk net({}, 5);
  // Non-trivial running statistics so frozen mode differs from a plain affine map.
  std::mt19937_64 nrng(56);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (auto& b : net.blocks())
    for (Eigen::Index i = 0; i < b.running_var.size(); ++i) {
      b.running_var[i] = u(nrng);
      b.running_mean[i] = u(nrng) - 1.0;
    }
  std::vector<int> idx(16);
  for (int i = 0; i < 16; ++i) idx[i] = i;
  std::vector<Eigen::VectorXd> grad;
  batch_loss_and_gradient(net, model(), axes(), pairs, idx, NormMode::frozen, &grad);
  auto params = net.parameters();
  double worst_net = 0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(nrng);
    const Eigen::Index i = std::uniform_int_distribution<Eigen::Index>(0, params[t].size() - 1)(nrng);
    const double keep = params[t][i], h = 1e-6;
    params[t][i] = keep + h;
    const double up = batch_loss_and_gradient(net, model(), axes(), pairs, idx, NormMode::frozen, nullptr).total;
    params[t][i] = keep - h;
    const double down = batch_loss_and_gradient(net, model(), axes(), pairs, idx, NormMode::frozen, nullptr).total;
    params[t][i] = keep;
    worst_net = std::max(worst_net, rel_error(grad[t][i], (up - down) / (2 * h), kNetFloor));
  }
  return {worst_fit < 1e-4 && worst_net < 1e-3,
          "ik_optim worst relative error " + num(worst_fit, 3) + " over " + std::to_string(components) +
              " components in 100 configurations (" + std::to_string(floored) + " below the " +
              num(kFitFloor) + " absolute floor), ik_net " + num(worst_net, 3) + " over 50 weights (frozen statistics)"};
}

// ---- 6 ---------------------------------------------------------------------

double mean_joint_error(const FitState& s, const Points3& target) {
  return mpjpe(forward(model(), s.full_pose(axes()), s.shape).skeleton.joints, target);
}

// Truth with bio angles and global rotation perturbed by N(0, 0.1^2) rad.
FitState perturbed(const FitState& truth, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.1);
  FitState init = truth;
  for (int d = 0; d < kBioDofCount; ++d) init.bio.angles[d] += n(rng);
  init.bio = clamp(init.bio, DofLimits::defaults());
  for (int i = 0; i < 3; ++i) init.global_rot[i] += n(rng);
  return init;
}

Outcome fit_recovery() {
  double worst_pa = 0;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(600 + seed);
    const FitState truth = random_state(rng);
    const FitState init = perturbed(truth, rng);
    FitTarget target;
    target.joints = forward(model(), truth.full_pose(axes()), truth.shape).skeleton.joints;
    FitConfig cfg;
    cfg.iterations = 200;
    cfg.convergence_tol = 0.0;
    const FitResult r = fit(model(), axes(), init, target, cfg);
    const Points3 fitted = forward(model(), r.state.full_pose(axes()), r.state.shape).skeleton.joints;
    worst_pa = std::max(worst_pa, mpjpe(procrustes_align(fitted, *target.joints).aligned, *target.joints));
  }
  int improved = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(700 + seed);
    const FitState truth = random_state(rng);
    const FitState init = perturbed(truth, rng);
    FitTarget target;
    target.joints = forward(model(), truth.full_pose(axes()), truth.shape).skeleton.joints;
    FitConfig cfg;
    cfg.iterations = 20;
    const FitResult r = fit(model(), axes(), init, target, cfg);
    if (mean_joint_error(r.state, *target.joints) < mean_joint_error(init, *target.joints)) ++improved;
  }
  return {worst_pa < 1.0 && improved >= 90,
          "200 iterations: worst PA-MPJPE " + num(worst_pa, 3) + " mm over 20 runs (limit 1); 20 iterations: error "
              "decreased in " + std::to_string(improved) + "/100 runs (need 90)"};
}

// ---- 7 ---------------------------------------------------------------------

Outcome ik_net_training() {
  const SynthPairSet train_set = generate_pairs(model(), axes(), 20000, DofLimits::defaults(), 7001);
  const SynthPairSet held = generate_pairs(model(), axes(), 1000, DofLimits::defaults(), 7002);
  MlpIk net({}, 7);
  const double before = evaluate_net(net, model(), axes(), held).pose;
  TrainConfig cfg;
  cfg.seed = 7;
  const TrainResult r = train(net, model(), axes(), train_set, cfg, &held);
  const double after = r.curve.back().held_out_pose;
  const double ratio = before / after;
  return {ratio >= 5.0, "held-out L_pose " + num(before) + " mm untrained -> " + num(after) + " mm after " +
                            std::to_string(cfg.epochs) + " epochs (" + num(ratio, 3) + "x, need 5x)"};
}

// ---- 8 ---------------------------------------------------------------------

Points3 transform(const Points3& p, double s, const Mat3& r, const Vec3& t) {
  return (s * p * r.transpose()).rowwise() + t.transpose();
}

Outcome metric_properties() {
  std::mt19937_64 rng(8);
  std::vector<EvalSample> pred, gt, moved;
  for (int i = 0; i < 200; ++i) {
    const FitState a = random_state(rng), b = random_state(rng);
    const Points3 g = forward(model(), a.full_pose(axes()), a.shape).skeleton.joints;
    // A prediction: another hand pose, moved away from the ground truth.
    FitState p = a;
    std::normal_distribution<double> n(0.0, 0.15);
    for (int d = 0; d < kBioDofCount; ++d) p.bio.angles[d] += n(rng);
    p.global_rot += Vec3(n(rng), n(rng), n(rng));
    p.translation += random_vec(rng, 10.0);
    p.shape = b.shape;
    gt.push_back({g, std::nullopt});
    pred.push_back({forward(model(), p.full_pose(axes()), p.shape).skeleton.joints, std::nullopt});
    const double s = std::exp(std::uniform_real_distribution<double>(-0.7, 0.7)(rng));
    moved.push_back({transform(pred.back().joints, s, rodrigues(random_rotvec(rng, 3.0)), random_vec(rng, 200.0)),
                     std::nullopt});
  }
  const EvalReport base = evaluate(pred, gt), shifted = evaluate(moved, gt);
  double invariance = 0;
  int bounded = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    invariance = std::max(invariance, std::abs(base.per_sample_pa_mpjpe[i] - shifted.per_sample_pa_mpjpe[i]));
    if (base.per_sample_pa_mpjpe[i] <= base.per_sample_mpjpe[i]) ++bounded;
    if (shifted.per_sample_pa_mpjpe[i] <= shifted.per_sample_mpjpe[i]) ++bounded;
  }
  const Points3 g = gt[0].joints;
  const double f_same = fscore(g, g, 5.0);
  Points3 q(4, 3), r(4, 3);
  q << 0, 0, 0, 100, 0, 0, 0, 100, 0, 0, 0, 100;
  r << 1, 0, 0, 100, 1, 0, 50, 50, 50, -60, -60, -60;
  const double f_half = fscore(r, q, 5.0);
  return {invariance <= 1e-6 && bounded == 400 && f_same == 1.0 && f_half == 0.5,
          "PA-MPJPE residual under similarity " + num(invariance, 3) + " mm (limit 1e-6), PA <= MPJPE on " +
              std::to_string(bounded) + "/400 samples, F(identical) " + num(f_same) + ", F(half) " + num(f_half)};
}

// ---- 9 ---------------------------------------------------------------------

Outcome lixel_roundtrip() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    worst = std::max(worst, std::abs(decode(encode(x, 64)) - x));
  }
  double mass = 0;
  for (int t = 0; t < 20; ++t) {
    Grid3D g(64, 64, 64);
    for (double& v : g.values) v = u(rng);
    double total = 0;
    for (double v : g.values) total += v;
    for (const auto& h : marginalize(g)) mass = std::max(mass, std::abs(h.values.sum() - total) / total);
  }
  return {worst < 1.0 / 128 && mass <= 1e-9, "max |decode(encode(x)) - x| " + num(worst, 3) +
                                                 " over 1000 x at L = 64 (limit 1/128), marginal mass error " +
                                                 num(mass, 3) + " relative (limit 1e-9)"};
}

// ---- 10 --------------------------------------------------------------------

Outcome zero_twist() {
  std::mt19937_64 rng(10);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const Articulation a = expand(random_bio(rng), axes());
    for (int f = 1; f < kFingerCount; ++f)
      for (int s = 0; s < 3; ++s) {
        const int art = 1 + 3 * f + s;
        worst = std::max(worst, std::abs(a.segment<3>(3 * (art - 1)).dot(axes().at(art).twist)));
      }
  }
  return {worst <= 1e-12, "max twist component " + num(worst, 3) + " over 1000 poses x 12 finger joints"};
}

// ---- 11 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

// Writes the command inputs shared by both runs.
void write_inputs(const fs::path& dir) {
  std::mt19937_64 rng(11);
  PoseRecord pose;
  pose.bio = random_bio(rng);
  pose.pose.articulation = expand(*pose.bio, axes());
  pose.pose.global_rot = Vec3(0.3, -0.2, 0.1);
  pose.pose.translation = Vec3(10, -5, 350);
  pose.shape = random_beta(rng);
  write_text_file(dir / "pose.json", pose_to_json(pose));
  const ForwardResult r = forward(model(), pose.pose, pose.shape);
  write_text_file(dir / "target.json", skeleton_to_json(r.skeleton));

  Skeleton noisy = r.skeleton;
  for (int j = 0; j < kJointCount; ++j) noisy.joints.row(j) += random_vec(rng, 3.0).transpose();
  write_text_file(dir / "pred.json", skeleton_to_json(noisy));

  // MANO-layout arrays derived from the desk hand.
  const HandModel& m = model();
  const int v = m.vertex_count();
  const std::array<int, kArticulatedCount> ours_of_mano = {0, 4, 5, 6, 7, 8, 9, 13, 14, 15, 10, 11, 12, 1, 2, 3};
  Eigen::MatrixXd reg(kArticulatedCount, v), w(v, kArticulatedCount);
  for (int k = 0; k < kArticulatedCount; ++k) {
    reg.row(k) = m.joint_regressor().row(articulated_to_joint(ours_of_mano[k]));
    w.col(k) = m.skinning_weights().col(ours_of_mano[k]);
  }
  ArrayBundle b;
  b.set_attribute("unit", "m");
  b.add_matrix("v_template", DType::f32, m.rest_vertices() / 1000.0);
  NamedArray sd{"shapedirs", DType::f32, {std::size_t(v), 3, std::size_t(kShapeCount)}, {}};
  for (int i = 0; i < 3 * v; ++i)
    for (int c = 0; c < kShapeCount; ++c) sd.data.push_back(static_cast<float>(m.shape_basis()(i, c) / 1000.0));
  b.add(sd);
  b.add_matrix("J_regressor", DType::f32, reg);
  b.add_matrix("weights", DType::f32, w);
  b.add_matrix("f", DType::i32, m.faces().cast<double>());
  b.save_binary(dir / "mano.hkb");
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("handkin_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const fs::path in = root / "in";
  fs::create_directories(in);
  write_inputs(in);
  const std::string cli = HANDKIN_CLI_PATH;
  const std::vector<std::string> commands = {
      "fk --pose " + quote(in / "pose.json"),
      "ik-fit --target " + quote(in / "target.json") + " --init-noise 0.1 --seed 3 --iterations 30",
      "ik-train --pairs 256 --held-out 32 --epochs 3 --decay-epochs 2 --widths 32 32 --seed 4",
      "ik-predict --checkpoint {out}/ik_net.hkb --target " + quote(in / "target.json"),
      "ik-fit --target " + quote(in / "target.json") + " --from-ik-net {out}/ik_net.hkb --iterations 10",
      "eval --pred " + quote(in / "pred.json") + " --gt " + quote(in / "target.json"),
      "profile i2l_original --layers --dump-graph",
      "profile --compare 256 8",
      "synth cameras",
      "synth poses --seed 5",
      "model export-desk --with-pose-basis",
      "model convert-mano --input " + quote(in / "mano.hkb") + " --text",
      "lixel dump --coord 0.1 0.5 0.93",
  };
  std::vector<std::string> failures;
  int files = 0;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::vector<fs::path> runs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = root / ("cmd" + std::to_string(c)) / ("run" + std::to_string(rep));
      fs::create_directories(out);
      // Commands after ik-train read its checkpoint from their own run directory.
      if (c > 2) fs::copy_file(root / "cmd2" / ("run" + std::to_string(rep)) / "ik_net.hkb", out / "ik_net.hkb");
      std::string cmd = commands[c];
      for (auto p = cmd.find("{out}"); p != std::string::npos; p = cmd.find("{out}"))
        cmd.replace(p, 5, out.string());
      const std::string line = "'" + cli + "' " + cmd + " --out " + quote(out) + " > " + quote(out / "stdout.txt") +
                               " 2>&1";
      if (std::system(line.c_str()) != 0) failures.push_back("'" + commands[c] + "' failed");
      runs.push_back(out);
    }
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(runs[0])) names.insert(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(runs[1])) names.insert(e.path().filename().string());
    for (const auto& n : names) {
      if (n == "stdout.txt") continue;  // echoes the output paths
      ++files;
      if (!fs::exists(runs[0] / n) || !fs::exists(runs[1] / n) || slurp(runs[0] / n) != slurp(runs[1] / n))
        failures.push_back(commands[c].substr(0, commands[c].find(' ')) + ": " + n + " differs");
    }
  }
  std::string detail = std::to_string(commands.size()) + " commands, " + std::to_string(files) +
                       " artifacts compared byte for byte";
  for (const auto& f : failures) detail += "; " + f;
  if (failures.empty()) fs::remove_all(root);
  return {failures.empty() && files > 0, detail};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "camera grid identity", 1, camera_grid},
      {2, "pose augmentation identity", 1, pose_augmentation},
      {3, "profiler vs reference costs", 1, profiler_table},
      {4, "FK correctness", 10, fk_oracle},
      {5, "gradient fidelity", 60, gradient_fidelity},
      {6, "IK fitting recovery", 300, fit_recovery},
      {7, "IK-net training", 900, ik_net_training},
      {8, "metric properties", 10, metric_properties},
      {9, "lixel round-trip", 5, lixel_roundtrip},
      {10, "zero-twist invariant", 5, zero_twist},
      {11, "CLI determinism", 30, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.2f s of %.0f s%s", secs, c.budget_s, in_time ? "" : " OVER BUDGET");
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << timing << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
