#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "handkin/array_bundle.hpp"
#include "handkin/bio_dof.hpp"
#include "handkin/hand_model.hpp"

namespace handkin {

inline constexpr int kBoneCount = kJointCount - 1;
inline constexpr int kFeatureCount = 4 * kBoneCount;  // 60 direction + 20 length values

// Bone lengths are multiplied by this before entering the network (mm -> dm).
inline constexpr double kDefaultLengthScale = 0.01;

// Unit direction and scaled length of each tree edge, ordered by child
// joint: values [3e, 3e + 3) hold the direction of edge e, value 60 + e its
// length.
struct BoneFeatures {
  Eigen::Matrix<double, kFeatureCount, 1> values = Eigen::Matrix<double, kFeatureCount, 1>::Zero();
};

BoneFeatures featurize(const Skeleton& skeleton, double length_scale = kDefaultLengthScale);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

struct HiddenBlock {
  DenseLayer dense;
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

// How batch normalization treats a batch.
enum class NormMode {
  train,   // batch statistics, running statistics updated
  frozen,  // running statistics, nothing updated (inference, gradient checks)
};

struct MlpOptions {
  std::vector<int> widths = {256, 256, 256};
  double length_scale = kDefaultLengthScale;
  double norm_eps = 1e-5;
  double norm_momentum = 0.1;
  // Zero the two heads so an untrained net predicts the zero pose and shape.
  bool zero_heads = false;
};

// Inputs and outputs hold one sample per column.
struct MlpOutput {
  Eigen::MatrixXd beta;   // 10 x B
  Eigen::MatrixXd theta;  // 23 x B
};

// Scratch kept between forward() and backward().
struct MlpTape {
  NormMode mode = NormMode::frozen;
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> normalized;  // x_hat per hidden block
  std::vector<Eigen::VectorXd> inv_std;
  std::vector<Eigen::MatrixXd> activation;  // post-rectifier output per block
};

// Fully connected IK regressor: hidden blocks of affine + batch
// normalization + rectifier, then a 10-value shape head and a 23-value
// BioPose head. Trainable tensors are exposed in a fixed order through
// parameters() for the optimizer, finite-difference checks and checkpoints.
class MlpIk {
 public:
  explicit MlpIk(const MlpOptions& options = {}, std::uint64_t seed = 0);

  const MlpOptions& options() const { return options_; }
  std::vector<HiddenBlock>& blocks() { return blocks_; }
  const std::vector<HiddenBlock>& blocks() const { return blocks_; }
  DenseLayer& head_beta() { return head_beta_; }
  const DenseLayer& head_beta() const { return head_beta_; }
  DenseLayer& head_theta() { return head_theta_; }
  const DenseLayer& head_theta() const { return head_theta_; }

  // Trainable tensors in storage order: per block weight, bias, gamma, beta;
  // then head_beta weight, bias; head_theta weight, bias.
  std::vector<Eigen::Map<Eigen::VectorXd>> parameters();
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  MlpOutput forward(const Eigen::MatrixXd& input, NormMode mode, MlpTape* tape = nullptr);

  // Gradients of every parameter (same order as parameters()), given the
  // loss gradient with respect to both head outputs.
  std::vector<Eigen::VectorXd> backward(const MlpTape& tape, const MlpOutput& d_output) const;

  bool all_finite() const;

 private:
  MlpOptions options_;
  std::vector<HiddenBlock> blocks_;
  DenseLayer head_beta_;
  DenseLayer head_theta_;
};

// Inference with running statistics; the BioPose is clamped to the limits.
std::pair<BioPose, ShapeParams> predict(const MlpIk& net, const BoneFeatures& features,
                                        const DofLimits& limits = DofLimits::defaults());

struct IkLoss {
  double total = 0.0;
  double theta = 0.0;  // mean |theta_pred - theta_gt| over 23 values
  double beta = 0.0;   // mean |beta_pred - beta_gt| over 10 values
  double pose = 0.0;   // mean |J_pred - P_gt| over 63 coordinates, mm
};

// Joints are regress_joints(forward(expand(theta), beta)) with zero global
// rotation and translation.
IkLoss ik_loss(const HandModel& model, const AxisTable& axes, const BioPose& pred_theta,
               const ShapeParams& pred_beta, const BioPose& truth_theta,
               const ShapeParams& truth_beta);

struct SynthPair {
  BioPose theta;
  ShapeParams beta;
  Skeleton skeleton;  // regressed joints of the posed mesh
};
using SynthPairSet = std::vector<SynthPair>;

// theta uniform within the limits, beta ~ N(0, 0.5^2) per component.
SynthPairSet generate_pairs(const HandModel& model, const AxisTable& axes, int n,
                            const DofLimits& limits, std::uint64_t seed);

struct TrainConfig {
  int epochs = 40;
  std::vector<int> decay_epochs = {30, 35};  // rate divided by decay_factor at each
  double decay_factor = 10.0;
  int batch_size = 32;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double learning_rate = 0.0;
  IkLoss train;            // mean over the epoch's batches
  double held_out_pose = -1.0;  // mean L_pose on the held-out set, -1 when none
};

struct TrainResult {
  std::vector<EpochStats> curve;
};

// Mini-batch Adam. Batches are reshuffled each epoch; a trailing partial
// batch is dropped. Throws NumericalError naming the epoch and batch when
// the loss goes non-finite.
TrainResult train(MlpIk& net, const HandModel& model, const AxisTable& axes,
                  const SynthPairSet& data, const TrainConfig& config,
                  const SynthPairSet* held_out = nullptr);

// Batch loss and parameter gradients (in parameters() order). In frozen
// mode the result is a plain function of the weights.
IkLoss batch_loss_and_gradient(MlpIk& net, const HandModel& model, const AxisTable& axes,
                               const SynthPairSet& data, const std::vector<int>& indices,
                               NormMode mode, std::vector<Eigen::VectorXd>* gradient);

// Mean ik_loss of predict() over a set.
IkLoss evaluate_net(const MlpIk& net, const HandModel& model, const AxisTable& axes,
                    const SynthPairSet& data, const DofLimits& limits = DofLimits::defaults());

ArrayBundle net_to_bundle(const MlpIk& net);
MlpIk net_from_bundle(const ArrayBundle& bundle);
void save_checkpoint(const MlpIk& net, const std::filesystem::path& path);
MlpIk load_checkpoint(const std::filesystem::path& path);

// "epoch,learning_rate,total,theta,beta,pose,held_out_pose" rows.
std::string loss_curve_csv(const TrainResult& result);

}  // namespace handkin
