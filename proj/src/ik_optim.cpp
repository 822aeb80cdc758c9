#include "handkin/ik_optim.hpp"

#include <cmath>
#include <sstream>

#include "handkin/error.hpp"
#include "handkin/text_format.hpp"

namespace handkin {

namespace {

constexpr double kDegenerateBone = 1e-9;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct Rho {
  LossKind kind;
  double delta;

  double value(double d) const {
    if (kind == LossKind::l2) return 0.5 * d * d;
    const double r = d / delta;
    return delta * delta * (std::sqrt(1.0 + r * r) - 1.0);
  }
  double derivative(double d) const {
    if (kind == LossKind::l2) return d;
    const double r = d / delta;
    return d / std::sqrt(1.0 + r * r);
  }
};

// Mean over points of the summed per-coordinate penalty; fills the gradient
// (scaled by weight) and returns the unweighted value.
double point_term(const Points3& x, const Points3& target, const Rho& rho, double weight,
                  Points3* grad, double* mean_distance) {
  const double n = static_cast<double>(x.rows());
  double sum = 0.0, dist = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double d = x(i, c) - target(i, c);
      sum += rho.value(d);
      if (grad != nullptr) (*grad)(i, c) += weight * rho.derivative(d) / n;
    }
    dist += (x.row(i) - target.row(i)).norm();
  }
  if (mean_distance != nullptr) *mean_distance = dist / n;
  return sum / n;
}

}  // namespace

FitVector FitState::pack() const {
  FitVector v;
  v << bio.angles, shape.beta, global_rot, translation;
  return v;
}

FitState FitState::unpack(const FitVector& v) {
  FitState s;
  s.bio.angles = v.head<kBioDofCount>();
  s.shape.beta = v.segment<kShapeCount>(kBioDofCount);
  s.global_rot = v.segment<3>(kBioDofCount + kShapeCount);
  s.translation = v.tail<3>();
  return s;
}

FullPose FitState::full_pose(const AxisTable& axes) const {
  FullPose p;
  p.global_rot = global_rot;
  p.articulation = expand(bio, axes);
  p.translation = translation;
  return p;
}

void FitTarget::validate(int vertex_count) const {
  const bool use_j = joints.has_value() && weight_joints > 0.0;
  const bool use_v = vertices.has_value() && weight_vertices > 0.0;
  if (weight_joints < 0.0 || weight_vertices < 0.0) throw DomainError("fit weights must be nonnegative");
  if (!use_j && !use_v) throw DomainError("fit target needs joints or vertices with positive weight");
  if (joints && joints->rows() != kJointCount) throw ShapeError("target joints must be 21 x 3");
  if (vertices && vertices->rows() != vertex_count)
    throw ShapeError("target has " + std::to_string(vertices->rows()) + " vertices, model has " +
                     std::to_string(vertex_count));
  if ((joints && !joints->allFinite()) || (vertices && !vertices->allFinite()))
    throw NumericalError("fit target contains non-finite coordinates");
}

std::string to_string(LossKind kind) { return kind == LossKind::l2 ? "l2" : "robust_l1"; }

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "robust_l1" || s == "huber" || s == "robust") return LossKind::robust_l1;
  if (s == "l2") return LossKind::l2;
  throw ParseError("unknown loss kind '" + s + "' (expected robust_l1 or l2)");
}

void FitConfig::validate() const {
  if (iterations < 1) throw DomainError("iterations must be >= 1");
  if (!(bend_weight >= 0.0)) throw DomainError("bend weight must be >= 0");
  if (!(step_size >= 0.0)) throw DomainError("step size must be >= 0");
  if (!(robust_delta > 0.0)) throw DomainError("robust delta must be > 0");
  if (!(final_step_fraction >= 0.0 && final_step_fraction <= 1.0))
    throw DomainError("final step fraction must lie in [0, 1]");
  limits.validate();
}

std::array<double, 4> bend_scores(const Skeleton& sk) {
  std::array<double, 4> s{};
  for (int f = 1; f < kFingerCount; ++f) {
    const auto J = [&](int seg) -> Vec3 { return sk.joints.row(joint_index(f, seg)).transpose(); };
    const Vec3 a = J(3) - J(2), b = J(2) - J(1), c = J(1) - J(0);
    s[f - 1] = a.cross(b).dot(b.cross(c));
  }
  return s;
}

double bend_penalty(const Skeleton& sk, Points3* gradient) {
  if (gradient != nullptr) gradient->setZero(kJointCount, 3);
  double total = 0.0;
  for (int f = 1; f < kFingerCount; ++f) {
    const int j[4] = {joint_index(f, 0), joint_index(f, 1), joint_index(f, 2), joint_index(f, 3)};
    const Vec3 a = (sk.joints.row(j[3]) - sk.joints.row(j[2])).transpose();
    const Vec3 b = (sk.joints.row(j[2]) - sk.joints.row(j[1])).transpose();
    const Vec3 c = (sk.joints.row(j[1]) - sk.joints.row(j[0])).transpose();
    if (a.norm() < kDegenerateBone || b.norm() < kDegenerateBone || c.norm() < kDegenerateBone)
      throw NumericalError("degenerate skeleton: zero-length finger bone");
    // (a x b) . (b x c) = (a.b)(b.c) - (a.c)(b.b)
    const double ab = a.dot(b), bc = b.dot(c), ac = a.dot(c), bb = b.dot(b);
    const double s = ab * bc - ac * bb;
    if (s >= 0.0) continue;
    total -= s;
    if (gradient != nullptr) {
      const Vec3 ga = -(bc * b - bb * c);
      const Vec3 gb = -(ab * c + bc * a - 2.0 * ac * b);
      const Vec3 gc = -(ab * b - bb * a);
      gradient->row(j[3]) += ga.transpose();
      gradient->row(j[2]) += (gb - ga).transpose();
      gradient->row(j[1]) += (gc - gb).transpose();
      gradient->row(j[0]) -= gc.transpose();
    }
  }
  return total;
}

FitObjective::FitObjective(const HandModel& model, const AxisTable& axes, FitTarget target,
                           LossKind kind, double robust_delta, double bend_weight,
                           ForwardOptions forward)
    : model_(model),
      axes_(axes),
      expansion_(axes.expansion_matrix()),
      target_(std::move(target)),
      kind_(kind),
      delta_(robust_delta),
      bend_weight_(bend_weight),
      eval_(model, forward) {
  target_.validate(model.vertex_count());
  if (!(robust_delta > 0.0)) throw DomainError("robust delta must be > 0");
  if (!(bend_weight >= 0.0)) throw DomainError("bend weight must be >= 0");
}

LossBreakdown FitObjective::loss(const FitState& state) { return evaluate(state, nullptr); }

LossBreakdown FitObjective::loss_and_gradient(const FitState& state, FitVector& gradient) {
  return evaluate(state, &gradient);
}

LossBreakdown FitObjective::evaluate(const FitState& state, FitVector* gradient) {
  const bool use_j = target_.joints.has_value() && target_.weight_joints > 0.0;
  const bool use_v = target_.vertices.has_value() && target_.weight_vertices > 0.0;
  FullPose pose;
  pose.global_rot = state.global_rot;
  pose.articulation = expansion_ * state.bio.angles;
  pose.translation = state.translation;
  eval_.evaluate(pose, state.shape, use_v ? VertexSubset::all : VertexSubset::none);

  const Rho rho{kind_, delta_};
  LossBreakdown out;
  Points3 d_joints = Points3::Zero(kJointCount, 3);
  Points3 d_verts;
  Points3* gj = gradient != nullptr ? &d_joints : nullptr;
  double mean_j = 0.0, mean_v = 0.0;
  if (use_j)
    out.joints = target_.weight_joints * point_term(eval_.skeleton().joints, *target_.joints, rho,
                                                    target_.weight_joints, gj, &mean_j);
  if (use_v) {
    if (gradient != nullptr) d_verts = Points3::Zero(eval_.vertices().rows(), 3);
    out.vertices = target_.weight_vertices *
                   point_term(eval_.vertices(), *target_.vertices, rho, target_.weight_vertices,
                              gradient != nullptr ? &d_verts : nullptr, &mean_v);
  }
  out.mean_error = use_j ? mean_j : mean_v;
  if (bend_weight_ > 0.0) {
    Points3 gb;
    out.bend = bend_weight_ * bend_penalty(eval_.skeleton(), gradient != nullptr ? &gb : nullptr);
    if (gradient != nullptr) d_joints += bend_weight_ * gb;
  }
  out.total = out.joints + out.vertices + out.bend;

  if (gradient != nullptr) {
    const PoseGradient pg = eval_.backward(d_verts, d_joints);
    gradient->head<kBioDofCount>() = expansion_.transpose() * pg.articulation;
    gradient->segment<kShapeCount>(kBioDofCount) = pg.beta;
    gradient->segment<3>(kBioDofCount + kShapeCount) = pg.global_rot;
    gradient->tail<3>() = pg.translation;
  }
  return out;
}

double fit_loss(const HandModel& model, const AxisTable& axes, const FitState& state,
                const FitTarget& target, double bend_weight, LossKind kind, double robust_delta) {
  FitObjective obj(model, axes, target, kind, robust_delta, bend_weight);
  return obj.loss(state).total;
}

FitVector fit_jacobian(const HandModel& model, const AxisTable& axes, const FitState& state,
                       const FitTarget& target, double bend_weight, LossKind kind,
                       double robust_delta) {
  FitObjective obj(model, axes, target, kind, robust_delta, bend_weight);
  FitVector g;
  obj.loss_and_gradient(state, g);
  return g;
}

FitResult fit(const HandModel& model, const AxisTable& axes, const FitState& init,
              const FitTarget& target, const FitConfig& config) {
  config.validate();
  FitVector x = init.pack();
  if (!x.allFinite()) throw NumericalError("fit initialization contains non-finite values");

  FitObjective obj(model, axes, target, config.loss_kind, config.robust_delta, config.bend_weight,
                   config.forward);
  FitVector mask = FitVector::Ones();
  if (config.freeze_shape) mask.segment<kShapeCount>(kBioDofCount).setZero();

  auto clamp_bio = [&](FitVector& v) {
    v.head<kBioDofCount>() =
        v.head<kBioDofCount>().cwiseMax(config.limits.lower).cwiseMin(config.limits.upper);
  };
  clamp_bio(x);

  FitResult result;
  FitVector grad;
  LossBreakdown current = obj.loss_and_gradient(FitState::unpack(x), grad);
  if (!std::isfinite(current.total)) throw NumericalError("non-finite loss at the initial state");
  result.initial_loss = result.best_loss = current.total;
  result.mean_error = current.mean_error;
  FitVector best = x;
  if (current.mean_error <= config.convergence_tol) result.converged = true;

  FitVector m = FitVector::Zero(), v = FitVector::Zero();
  for (int it = 1; it <= config.iterations && !result.converged; ++it) {
    const double progress =
        config.iterations > 1 ? static_cast<double>(it - 1) / (config.iterations - 1) : 0.0;
    const double lr = config.step_size * (1.0 - (1.0 - config.final_step_fraction) * progress);
    grad = grad.cwiseProduct(mask);
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(kAdamBeta1, it);
    const double c2 = 1.0 - std::pow(kAdamBeta2, it);
    const FitVector step =
        (lr * (m / c1).array() / ((v / c2).array().sqrt() + kAdamEps)).matrix().cwiseProduct(mask);
    x -= step;
    clamp_bio(x);

    current = obj.loss_and_gradient(FitState::unpack(x), grad);
    if (!std::isfinite(current.total) || !grad.allFinite())
      throw NumericalError("non-finite loss at fit iteration " + std::to_string(it));
    result.loss_trace.push_back(current.total);
    if (current.total < result.best_loss) {
      result.best_loss = current.total;
      result.best_iteration = it;
      result.mean_error = current.mean_error;
      best = x;
    }
    if (current.mean_error <= config.convergence_tol) result.converged = true;
  }

  result.state = FitState::unpack(best);
  if (config.freeze_shape) result.state.shape = init.shape;
  return result;
}

std::string fit_report(const FitResult& r, const FitConfig& c) {
  std::ostringstream os;
  os << "[config]\n"
     << "iterations " << c.iterations << '\n'
     << "step_size " << format_number(c.step_size) << '\n'
     << "final_step_fraction " << format_number(c.final_step_fraction) << '\n'
     << "bend_weight " << format_number(c.bend_weight) << '\n'
     << "loss_kind " << to_string(c.loss_kind) << '\n'
     << "robust_delta_mm " << format_number(c.robust_delta) << '\n'
     << "freeze_shape " << (c.freeze_shape ? 1 : 0) << '\n'
     << "convergence_tol_mm " << format_number(c.convergence_tol) << '\n';
  os << "[result]\n"
     << "initial_loss " << format_number(r.initial_loss) << '\n'
     << "best_loss " << format_number(r.best_loss) << '\n'
     << "best_iteration " << r.best_iteration << '\n'
     << "mean_error_mm " << format_number(r.mean_error) << '\n'
     << "converged " << (r.converged ? 1 : 0) << '\n';
  os << "[loss_trace]\n";
  for (std::size_t i = 0; i < r.loss_trace.size(); ++i)
    os << i + 1 << ' ' << format_number(r.loss_trace[i]) << '\n';
  os << "[bio]\n";
  for (int i = 0; i < kBioDofCount; ++i)
    os << BioPose::dof_name(i) << ' ' << format_number(r.state.bio.angles[i]) << '\n';
  os << "[beta]\n";
  for (int i = 0; i < kShapeCount; ++i)
    os << "beta" << i << ' ' << format_number(r.state.shape.beta[i]) << '\n';
  os << "[global]\n"
     << "global_rot " << format_number(r.state.global_rot.x()) << ' '
     << format_number(r.state.global_rot.y()) << ' ' << format_number(r.state.global_rot.z()) << '\n'
     << "translation " << format_number(r.state.translation.x()) << ' '
     << format_number(r.state.translation.y()) << ' ' << format_number(r.state.translation.z())
     << '\n';
  return os.str();
}

}  // namespace handkin
