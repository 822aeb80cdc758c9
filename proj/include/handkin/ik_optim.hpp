#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "handkin/bio_dof.hpp"
#include "handkin/hand_model.hpp"
#include "handkin/kinematics.hpp"

namespace handkin {

// Fitted parameter block: 23 bio angles, 10 shape coefficients, global
// rotation (axis-angle) and translation (mm). Packs to 39 values in that order.
inline constexpr int kFitParamCount = kBioDofCount + kShapeCount + 6;
using FitVector = Eigen::Matrix<double, kFitParamCount, 1>;

struct FitState {
  BioPose bio;
  ShapeParams shape;
  Vec3 global_rot = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  FitVector pack() const;
  static FitState unpack(const FitVector& v);
  FullPose full_pose(const AxisTable& axes) const;
};

struct FitTarget {
  std::optional<Points3> joints;    // 21 x 3, mm
  std::optional<Points3> vertices;  // V x 3, mm
  double weight_joints = 1.0;
  double weight_vertices = 1.0;

  void validate(int vertex_count) const;
};

enum class LossKind {
  robust_l1,  // pseudo-Huber: delta^2 (sqrt(1 + (d / delta)^2) - 1), smooth everywhere
  l2,         // d^2 / 2
};

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

struct FitConfig {
  int iterations = 20;
  double step_size = 0.05;
  double bend_weight = 1e-2;
  LossKind loss_kind = LossKind::robust_l1;
  double robust_delta = 1.0;  // mm
  bool freeze_shape = false;
  // Stop once the mean joint (or vertex) distance drops to this many mm.
  double convergence_tol = 1e-3;
  // The step size decays linearly to step_size * final_step_fraction over
  // the run; 1 keeps it constant.
  double final_step_fraction = 1.0;
  DofLimits limits = DofLimits::defaults();
  ForwardOptions forward;

  void validate() const;
};

struct FitResult {
  FitState state;                  // best iterate, bio clamped to limits
  std::vector<double> loss_trace;  // loss after each update
  double initial_loss = 0.0;
  double best_loss = 0.0;
  int best_iteration = 0;          // 0 = the initial state
  double mean_error = 0.0;         // mm, at the best iterate
  bool converged = false;
};

// Per-finger (index, middle, ring, little) bend score
//   s = (B_tip-dip x B_dip-pip) . (B_dip-pip x B_pip-mcp),
// where s >= 0 means PIP and DIP bend the same way.
std::array<double, 4> bend_scores(const Skeleton& skeleton);

// sum over the four fingers of max(0, -s); optional 21 x 3 gradient.
double bend_penalty(const Skeleton& skeleton, Points3* gradient = nullptr);

struct LossBreakdown {
  double total = 0.0;
  double joints = 0.0;    // weighted
  double vertices = 0.0;  // weighted
  double bend = 0.0;      // weighted
  double mean_error = 0.0;
};

// Fitting objective around a shared read-only model. Holds scratch state;
// use one instance per thread.
class FitObjective {
 public:
  FitObjective(const HandModel& model, const AxisTable& axes, FitTarget target, LossKind kind,
               double robust_delta, double bend_weight, ForwardOptions forward = {});

  LossBreakdown loss(const FitState& state);
  LossBreakdown loss_and_gradient(const FitState& state, FitVector& gradient);

  const FitTarget& target() const { return target_; }

 private:
  LossBreakdown evaluate(const FitState& state, FitVector* gradient);

  const HandModel& model_;
  AxisTable axes_;
  Eigen::Matrix<double, kArticulationSize, kBioDofCount> expansion_;
  FitTarget target_;
  LossKind kind_;
  double delta_;
  double bend_weight_;
  KinematicsEvaluator eval_;
};

double fit_loss(const HandModel& model, const AxisTable& axes, const FitState& state,
                const FitTarget& target, double bend_weight,
                LossKind kind = LossKind::robust_l1, double robust_delta = 1.0);

FitVector fit_jacobian(const HandModel& model, const AxisTable& axes, const FitState& state,
                       const FitTarget& target, double bend_weight,
                       LossKind kind = LossKind::robust_l1, double robust_delta = 1.0);

// Adaptive-moment descent from init with per-iteration clamping to the DoF
// limits. Returns the lowest-loss iterate.
FitResult fit(const HandModel& model, const AxisTable& axes, const FitState& init,
              const FitTarget& target, const FitConfig& config);

// Structured text: config echo, loss trace, final parameters.
std::string fit_report(const FitResult& result, const FitConfig& config);

}  // namespace handkin
