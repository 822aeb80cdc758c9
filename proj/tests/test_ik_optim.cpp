#include <doctest.h>

#include <random>

#include "handkin/error.hpp"
#include "handkin/ik_optim.hpp"
#include "handkin/metrics.hpp"
#include "test_util.hpp"

using namespace handkin;

namespace {

const AxisTable& axes() {
  static const AxisTable a = derive_axes(test::desk());
  return a;
}

FitState random_state(std::mt19937_64& rng) {
  FitState s;
  s.bio = test::random_bio(rng);
  s.shape = test::random_beta(rng);
  s.global_rot = test::random_rotvec(rng);
  s.translation = test::random_vec(rng, 50.0);
  return s;
}

double huber(double d, double delta) { return delta * delta * (std::sqrt(1 + d * d / (delta * delta)) - 1); }

// Loss written from scratch on top of forward().
double oracle_loss(const FitState& s, const FitTarget& t, double bend_weight, double delta) {
  const ForwardResult r = forward(test::desk(), s.full_pose(axes()), s.shape);
  double loss = 0;
  auto term = [&](const Points3& p, const Points3& q, double w) {
    double sum = 0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (int c = 0; c < 3; ++c) sum += huber(p(i, c) - q(i, c), delta);
    loss += w * sum / static_cast<double>(p.rows());
  };
  if (t.joints) term(r.skeleton.joints, *t.joints, t.weight_joints);
  if (t.vertices) term(r.mesh.vertices, *t.vertices, t.weight_vertices);
  double bend = 0;
  for (int f = 1; f < kFingerCount; ++f) {
    const auto& j = r.skeleton.joints;
    const Vec3 a = (j.row(joint_index(f, 3)) - j.row(joint_index(f, 2))).transpose();
    const Vec3 b = (j.row(joint_index(f, 2)) - j.row(joint_index(f, 1))).transpose();
    const Vec3 c = (j.row(joint_index(f, 1)) - j.row(joint_index(f, 0))).transpose();
    bend += std::max(0.0, -(a.cross(b)).dot(b.cross(c)));
  }
  return loss + bend_weight * bend;
}

FitTarget target_from(const FitState& s, bool vertices) {
  const ForwardResult r = forward(test::desk(), s.full_pose(axes()), s.shape);
  FitTarget t;
  t.joints = r.skeleton.joints;
  if (vertices) t.vertices = r.mesh.vertices;
  return t;
}

}  // namespace

TEST_CASE("fit state packs into 39 values") {
  std::mt19937_64 rng(20);
  const FitState s = random_state(rng);
  const FitState r = FitState::unpack(s.pack());
  CHECK(r.pack() == s.pack());
  CHECK(s.pack().segment<3>(kBioDofCount + kShapeCount) == s.global_rot);
  CHECK(s.full_pose(axes()).articulation == expand(s.bio, axes()));
}

TEST_CASE("loss matches an independent evaluation") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 5; ++t) {
    const FitState truth = random_state(rng), s = random_state(rng);
    FitTarget target = target_from(truth, t % 2 == 0);
    target.weight_vertices = 0.5;
    const double got = fit_loss(test::desk(), axes(), s, target, 0.3, LossKind::robust_l1, 2.0);
    CHECK(got == doctest::Approx(oracle_loss(s, target, 0.3, 2.0)).epsilon(1e-10));
  }
}

TEST_CASE("analytic fit gradient matches central differences") {
  std::mt19937_64 rng(22);
  double worst = 0;
  for (int t = 0; t < 6; ++t) {
    const FitState truth = random_state(rng), s = random_state(rng);
    const FitTarget target = target_from(truth, t % 2 == 1);
    const LossKind kind = t % 3 == 2 ? LossKind::l2 : LossKind::robust_l1;
    const FitVector g = fit_jacobian(test::desk(), axes(), s, target, 0.1, kind);
    const FitVector x = s.pack();
    for (int i = 0; i < kFitParamCount; ++i) {
      const double h = 1e-6;
      FitVector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (fit_loss(test::desk(), axes(), FitState::unpack(xp), target, 0.1, kind) -
                         fit_loss(test::desk(), axes(), FitState::unpack(xm), target, 0.1, kind)) /
                        (2 * h);
      worst = std::max(worst, std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), 1e-2}));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("bend penalty gradient on folded fingers") {
  std::mt19937_64 rng(23);
  const Skeleton rest = rest_joints(test::desk(), {});
  int active = 0;
  for (int t = 0; t < 20; ++t) {
    Skeleton s = rest;
    for (int j = 1; j < kJointCount; ++j) s.joints.row(j) += test::random_vec(rng, 8.0).transpose();
    Points3 g;
    const double p = bend_penalty(s, &g);
    const auto scores = bend_scores(s);
    double want = 0;
    for (double sc : scores) want += std::max(0.0, -sc);
    CHECK(p == doctest::Approx(want));
    if (p > 0) ++active;
    for (int j = 0; j < kJointCount; ++j)
      for (int c = 0; c < 3; ++c) {
        const double h = 1e-5;
        Skeleton sp = s, sm = s;
        sp.joints(j, c) += h;
        sm.joints(j, c) -= h;
        const double fd = (bend_penalty(sp) - bend_penalty(sm)) / (2 * h);
        CHECK(g(j, c) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
      }
  }
  CHECK(active > 5);
  // The straight rest fingers sit on the boundary s = 0 up to rounding.
  CHECK(bend_penalty(rest) < 1e-6);
}

TEST_CASE("freeze_shape keeps shape bit-exact") {
  std::mt19937_64 rng(24);
  const FitState truth = random_state(rng);
  FitState init;
  init.shape = test::random_beta(rng);
  FitConfig cfg;
  cfg.freeze_shape = true;
  const FitResult r = fit(test::desk(), axes(), init, target_from(truth, false), cfg);
  CHECK(r.state.shape.beta == init.shape.beta);
}

TEST_CASE("fit recovers a noiseless target") {
  std::mt19937_64 rng(25);
  FitState truth = random_state(rng);
  FitState init = truth;
  std::normal_distribution<double> n(0.0, 0.1);
  for (int d = 0; d < kBioDofCount; ++d) init.bio.angles[d] += n(rng);
  init.bio = clamp(init.bio, DofLimits::defaults());
  FitConfig cfg;
  cfg.iterations = 200;
  cfg.convergence_tol = 0.0;
  const FitTarget target = target_from(truth, false);
  const FitResult r = fit(test::desk(), axes(), init, target, cfg);
  CHECK(r.loss_trace.size() == 200u);
  CHECK(r.best_loss < r.initial_loss);
  CHECK(is_feasible(r.state.bio, DofLimits::defaults()));
  const Skeleton s = forward(test::desk(), r.state.full_pose(axes()), r.state.shape).skeleton;
  EvalOptions eo;
  std::vector<EvalSample> ps, gs;
  ps.push_back({s.joints, std::nullopt});
  gs.push_back({*target.joints, std::nullopt});
  CHECK(evaluate(ps, gs, eo).pa_mpjpe < 1.0);
}

TEST_CASE("fit stops early when converged") {
  std::mt19937_64 rng(26);
  const FitState truth = random_state(rng);
  FitConfig cfg;
  cfg.convergence_tol = 1e-3;
  const FitResult r = fit(test::desk(), axes(), truth, target_from(truth, false), cfg);
  CHECK(r.converged);
  CHECK(r.best_iteration == 0);
  CHECK(r.mean_error < 1e-9);
}

TEST_CASE("fit config and target validation") {
  FitConfig cfg;
  cfg.iterations = -1;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  FitTarget t;
  CHECK_THROWS(t.validate(778));
  t.joints = Points3::Zero(20, 3);
  CHECK_THROWS_AS(t.validate(778), ShapeError);
  CHECK(loss_kind_from_string("l2") == LossKind::l2);
  CHECK(loss_kind_from_string(to_string(LossKind::robust_l1)) == LossKind::robust_l1);
  CHECK_THROWS_AS(loss_kind_from_string("l3"), ParseError);
}

TEST_CASE("fit report lists every section") {
  std::mt19937_64 rng(27);
  const FitState truth = random_state(rng);
  FitConfig cfg;
  cfg.iterations = 3;
  cfg.convergence_tol = 0;
  const FitResult r = fit(test::desk(), axes(), FitState{}, target_from(truth, false), cfg);
  const std::string rep = fit_report(r, cfg);
  for (const char* s : {"[config]", "[result]", "[loss_trace]", "[bio]", "[beta]", "[global]"})
    CHECK(rep.find(s) != std::string::npos);
}
