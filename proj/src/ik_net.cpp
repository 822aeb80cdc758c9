#include "handkin/ik_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "handkin/error.hpp"
#include "handkin/kinematics.hpp"
#include "handkin/text_format.hpp"

namespace handkin {

namespace {

constexpr double kDegenerateBone = 1e-9;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kShapeSigma = 0.5;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

DenseLayer make_dense(int in, int out, std::mt19937_64& rng, bool zero) {
  DenseLayer d;
  d.weight = Eigen::MatrixXd::Zero(out, in);
  d.bias = Eigen::VectorXd::Zero(out);
  if (zero) return d;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index c = 0; c < d.weight.cols(); ++c)
    for (Eigen::Index r = 0; r < d.weight.rows(); ++r) d.weight(r, c) = u(rng);
  for (Eigen::Index r = 0; r < d.bias.size(); ++r) d.bias[r] = u(rng);
  return d;
}

Eigen::Map<Eigen::VectorXd> flat(Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
Eigen::Map<Eigen::VectorXd> flat(Eigen::VectorXd& v) { return {v.data(), v.size()}; }

Eigen::VectorXd flat_copy(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

std::string widths_text(const std::vector<int>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) s += (i ? "," : "") + std::to_string(widths[i]);
  return s;
}

std::string exact(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

FullPose pose_from_theta(const Eigen::Matrix<double, kArticulationSize, kBioDofCount>& e,
                         const Eigen::Matrix<double, kBioDofCount, 1>& theta) {
  FullPose p;
  p.articulation = e * theta;
  return p;
}

}  // namespace

BoneFeatures featurize(const Skeleton& sk, double length_scale) {
  if (sk.joints.rows() != kJointCount) throw ShapeError("skeleton must have 21 joints");
  BoneFeatures f;
  for (int j = 1; j < kJointCount; ++j) {
    const Vec3 bone = (sk.joints.row(j) - sk.joints.row(kParents[j])).transpose();
    const double len = bone.norm();
    if (!(len > kDegenerateBone))
      throw NumericalError(std::string("zero-length bone ending at ") + joint_name(j));
    f.values.segment<3>(3 * (j - 1)) = bone / len;
    f.values[3 * kBoneCount + j - 1] = len * length_scale;
  }
  return f;
}

MlpIk::MlpIk(const MlpOptions& options, std::uint64_t seed) : options_(options) {
  if (options_.widths.empty()) throw DomainError("MLP needs at least one hidden block");
  for (int w : options_.widths)
    if (w < 1) throw DomainError("hidden widths must be >= 1");
  std::mt19937_64 rng(seed);
  int in = kFeatureCount;
  for (int w : options_.widths) {
    HiddenBlock b;
    b.dense = make_dense(in, w, rng, false);
    b.gamma = Eigen::VectorXd::Ones(w);
    b.beta = Eigen::VectorXd::Zero(w);
    b.running_mean = Eigen::VectorXd::Zero(w);
    b.running_var = Eigen::VectorXd::Ones(w);
    blocks_.push_back(std::move(b));
    in = w;
  }
  head_beta_ = make_dense(in, kShapeCount, rng, options_.zero_heads);
  head_theta_ = make_dense(in, kBioDofCount, rng, options_.zero_heads);
}

std::vector<Eigen::Map<Eigen::VectorXd>> MlpIk::parameters() {
  std::vector<Eigen::Map<Eigen::VectorXd>> p;
  for (auto& b : blocks_) {
    p.push_back(flat(b.dense.weight));
    p.push_back(flat(b.dense.bias));
    p.push_back(flat(b.gamma));
    p.push_back(flat(b.beta));
  }
  p.push_back(flat(head_beta_.weight));
  p.push_back(flat(head_beta_.bias));
  p.push_back(flat(head_theta_.weight));
  p.push_back(flat(head_theta_.bias));
  return p;
}

std::vector<std::string> MlpIk::parameter_names() const {
  std::vector<std::string> n;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string b = "block" + std::to_string(i) + ".";
    for (const char* s : {"weight", "bias", "gamma", "beta"}) n.push_back(b + s);
  }
  for (const char* s : {"head_beta.weight", "head_beta.bias", "head_theta.weight", "head_theta.bias"})
    n.emplace_back(s);
  return n;
}

std::size_t MlpIk::parameter_count() const {
  std::size_t n = 0;
  for (auto& p : const_cast<MlpIk*>(this)->parameters()) n += static_cast<std::size_t>(p.size());
  return n;
}

bool MlpIk::all_finite() const {
  for (auto& p : const_cast<MlpIk*>(this)->parameters())
    if (!p.allFinite()) return false;
  for (const auto& b : blocks_)
    if (!b.running_mean.allFinite() || !b.running_var.allFinite()) return false;
  return true;
}

MlpOutput MlpIk::forward(const Eigen::MatrixXd& input, NormMode mode, MlpTape* tape) {
  if (input.rows() != kFeatureCount) throw ShapeError("network input must have 80 rows");
  const Eigen::Index batch = input.cols();
  if (batch < 1) throw ShapeError("empty batch");
  if (mode == NormMode::train && batch < 2)
    throw DomainError("batch statistics need at least two samples");
  if (tape != nullptr) {
    tape->mode = mode;
    tape->input = input;
    tape->normalized.clear();
    tape->inv_std.clear();
    tape->activation.clear();
  }
  Eigen::MatrixXd x = input;
  for (auto& b : blocks_) {
    Eigen::MatrixXd z = b.dense.weight * x;
    z.colwise() += b.dense.bias;
    Eigen::VectorXd mean, var;
    if (mode == NormMode::train) {
      mean = z.rowwise().mean();
      var = (z.colwise() - mean).array().square().rowwise().mean();
      const double n = static_cast<double>(batch);
      const double m = options_.norm_momentum;
      b.running_mean = (1.0 - m) * b.running_mean + m * mean;
      b.running_var = (1.0 - m) * b.running_var + m * var * (n / (n - 1.0));
    } else {
      mean = b.running_mean;
      var = b.running_var;
    }
    const Eigen::VectorXd inv_std = (var.array() + options_.norm_eps).rsqrt();
    Eigen::MatrixXd xhat = (z.colwise() - mean).array().colwise() * inv_std.array();
    Eigen::MatrixXd y = (xhat.array().colwise() * b.gamma.array()).colwise() + b.beta.array();
    x = y.cwiseMax(0.0);
    if (tape != nullptr) {
      tape->normalized.push_back(std::move(xhat));
      tape->inv_std.push_back(inv_std);
      tape->activation.push_back(x);
    }
  }
  MlpOutput out;
  out.beta = (head_beta_.weight * x).colwise() + head_beta_.bias;
  out.theta = (head_theta_.weight * x).colwise() + head_theta_.bias;
  return out;
}

std::vector<Eigen::VectorXd> MlpIk::backward(const MlpTape& tape, const MlpOutput& d_out) const {
  const std::size_t nb = blocks_.size();
  if (tape.activation.size() != nb) throw DomainError("backward() needs a tape from forward()");
  const Eigen::MatrixXd& last = tape.activation.back();
  const double batch = static_cast<double>(last.cols());

  std::vector<Eigen::VectorXd> grads(4 * nb + 4);
  grads[4 * nb + 0] = flat_copy(d_out.beta * last.transpose());
  grads[4 * nb + 1] = d_out.beta.rowwise().sum();
  grads[4 * nb + 2] = flat_copy(d_out.theta * last.transpose());
  grads[4 * nb + 3] = d_out.theta.rowwise().sum();

  Eigen::MatrixXd da = head_beta_.weight.transpose() * d_out.beta +
                       head_theta_.weight.transpose() * d_out.theta;
  for (std::size_t k = nb; k-- > 0;) {
    const HiddenBlock& b = blocks_[k];
    const Eigen::MatrixXd& xhat = tape.normalized[k];
    const Eigen::MatrixXd dy = (tape.activation[k].array() > 0.0).select(da, 0.0);
    grads[4 * k + 2] = (dy.array() * xhat.array()).rowwise().sum();
    grads[4 * k + 3] = dy.rowwise().sum();
    const Eigen::MatrixXd dxhat = dy.array().colwise() * b.gamma.array();
    Eigen::MatrixXd dz;
    if (tape.mode == NormMode::train) {
      const Eigen::VectorXd s1 = dxhat.rowwise().sum();
      const Eigen::VectorXd s2 = (dxhat.array() * xhat.array()).rowwise().sum();
      dz = ((batch * dxhat).colwise() - s1).array() - xhat.array().colwise() * s2.array();
      dz = dz.array().colwise() * (tape.inv_std[k].array() / batch);
    } else {
      dz = dxhat.array().colwise() * tape.inv_std[k].array();
    }
    const Eigen::MatrixXd& x = k == 0 ? tape.input : tape.activation[k - 1];
    grads[4 * k + 0] = flat_copy(dz * x.transpose());
    grads[4 * k + 1] = dz.rowwise().sum();
    if (k > 0) da = b.dense.weight.transpose() * dz;
  }
  return grads;
}

std::pair<BioPose, ShapeParams> predict(const MlpIk& net, const BoneFeatures& features,
                                        const DofLimits& limits) {
  const MlpOutput out = const_cast<MlpIk&>(net).forward(features.values, NormMode::frozen);
  if (!out.beta.allFinite() || !out.theta.allFinite())
    throw NumericalError("non-finite network output");
  BioPose theta;
  theta.angles = out.theta.col(0);
  ShapeParams beta;
  beta.beta = out.beta.col(0);
  return {clamp(theta, limits), beta};
}

IkLoss ik_loss(const HandModel& model, const AxisTable& axes, const BioPose& pred_theta,
               const ShapeParams& pred_beta, const BioPose& truth_theta,
               const ShapeParams& truth_beta) {
  const auto e = axes.expansion_matrix();
  KinematicsEvaluator eval(model);
  eval.evaluate(pose_from_theta(e, truth_theta.angles), truth_beta, VertexSubset::regressor_support);
  const Points3 truth = eval.regressed_joints().joints;
  eval.evaluate(pose_from_theta(e, pred_theta.angles), pred_beta, VertexSubset::regressor_support);
  const Points3 pred = eval.regressed_joints().joints;

  IkLoss l;
  l.theta = (pred_theta.angles - truth_theta.angles).cwiseAbs().mean();
  l.beta = (pred_beta.beta - truth_beta.beta).cwiseAbs().mean();
  l.pose = (pred - truth).cwiseAbs().mean();
  l.total = l.theta + l.beta + l.pose;
  return l;
}

SynthPairSet generate_pairs(const HandModel& model, const AxisTable& axes, int n,
                            const DofLimits& limits, std::uint64_t seed) {
  if (n < 1) throw DomainError("pair count must be >= 1");
  limits.validate();
  const auto e = axes.expansion_matrix();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, kShapeSigma);
  KinematicsEvaluator eval(model);
  SynthPairSet out(static_cast<std::size_t>(n));
  for (auto& p : out) {
    for (int d = 0; d < kBioDofCount; ++d)
      p.theta.angles[d] = limits.lower[d] + u01(rng) * (limits.upper[d] - limits.lower[d]);
    for (int s = 0; s < kShapeCount; ++s) p.beta.beta[s] = normal(rng);
    eval.evaluate(pose_from_theta(e, p.theta.angles), p.beta, VertexSubset::regressor_support);
    p.skeleton = eval.regressed_joints();
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw DomainError("epochs must be >= 1");
  if (batch_size < 2) throw DomainError("batch size must be >= 2");
  if (!(learning_rate >= 0.0)) throw DomainError("learning rate must be >= 0");
  if (!(decay_factor > 0.0)) throw DomainError("decay factor must be > 0");
  for (int d : decay_epochs)
    if (d < 1 || d >= epochs) throw DomainError("decay epochs must lie in [1, epochs)");
}

IkLoss batch_loss_and_gradient(MlpIk& net, const HandModel& model, const AxisTable& axes,
                               const SynthPairSet& data, const std::vector<int>& indices,
                               NormMode mode, std::vector<Eigen::VectorXd>* gradient) {
  const int batch = static_cast<int>(indices.size());
  Eigen::MatrixXd input(kFeatureCount, batch);
  for (int b = 0; b < batch; ++b)
    input.col(b) = featurize(data.at(indices[b]).skeleton, net.options().length_scale).values;

  MlpTape tape;
  const MlpOutput out = net.forward(input, mode, gradient != nullptr ? &tape : nullptr);
  if (!out.beta.allFinite() || !out.theta.allFinite())
    throw NumericalError("non-finite network output");

  const auto e = axes.expansion_matrix();
  KinematicsEvaluator eval(model);
  MlpOutput d_out{Eigen::MatrixXd::Zero(kShapeCount, batch), Eigen::MatrixXd::Zero(kBioDofCount, batch)};
  IkLoss l;
  const double nb = static_cast<double>(batch);
  const double n_pose = static_cast<double>(kJointCount * 3);
  for (int b = 0; b < batch; ++b) {
    const SynthPair& p = data[indices[b]];
    const Eigen::Matrix<double, kBioDofCount, 1> theta = out.theta.col(b);
    ShapeParams beta;
    beta.beta = out.beta.col(b);
    const Eigen::Matrix<double, kBioDofCount, 1> dt = theta - p.theta.angles;
    const Beta db = beta.beta - p.beta.beta;
    l.theta += dt.cwiseAbs().mean() / nb;
    l.beta += db.cwiseAbs().mean() / nb;

    eval.evaluate(pose_from_theta(e, theta), beta, VertexSubset::regressor_support);
    const Points3 diff = eval.regressed_joints().joints - p.skeleton.joints;
    l.pose += diff.cwiseAbs().mean() / nb;
    if (gradient == nullptr) continue;

    const Points3 d_joints = diff.unaryExpr(&sign) / (n_pose * nb);
    const PoseGradient pg = eval.backward_regressed(d_joints);
    d_out.theta.col(b) = dt.unaryExpr(&sign) / (kBioDofCount * nb) + e.transpose() * pg.articulation;
    d_out.beta.col(b) = db.unaryExpr(&sign) / (kShapeCount * nb) + pg.beta;
  }
  l.total = l.theta + l.beta + l.pose;
  if (gradient != nullptr) *gradient = net.backward(tape, d_out);
  return l;
}

IkLoss evaluate_net(const MlpIk& net, const HandModel& model, const AxisTable& axes,
                    const SynthPairSet& data, const DofLimits& limits) {
  if (data.empty()) throw DomainError("evaluation set is empty");
  IkLoss mean;
  for (const auto& p : data) {
    const auto [theta, beta] = predict(net, featurize(p.skeleton, net.options().length_scale), limits);
    const IkLoss l = ik_loss(model, axes, theta, beta, p.theta, p.beta);
    mean.total += l.total;
    mean.theta += l.theta;
    mean.beta += l.beta;
    mean.pose += l.pose;
  }
  const double n = static_cast<double>(data.size());
  mean.total /= n;
  mean.theta /= n;
  mean.beta /= n;
  mean.pose /= n;
  return mean;
}

TrainResult train(MlpIk& net, const HandModel& model, const AxisTable& axes,
                  const SynthPairSet& data, const TrainConfig& config,
                  const SynthPairSet* held_out) {
  config.validate();
  if (static_cast<int>(data.size()) < config.batch_size)
    throw DomainError("training set smaller than one batch");

  auto params = net.parameters();
  std::vector<Eigen::VectorXd> m, v;
  for (const auto& p : params) {
    m.push_back(Eigen::VectorXd::Zero(p.size()));
    v.push_back(Eigen::VectorXd::Zero(p.size()));
  }
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  const int batches = static_cast<int>(data.size()) / config.batch_size;
  long step = 0;

  TrainResult result;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double rate = config.learning_rate;
    for (int d : config.decay_epochs)
      if (epoch > d) rate /= config.decay_factor;
    std::shuffle(order.begin(), order.end(), rng);

    EpochStats stats;
    stats.epoch = epoch;
    stats.learning_rate = rate;
    std::vector<Eigen::VectorXd> grad;
    for (int bi = 0; bi < batches; ++bi) {
      const std::vector<int> idx(order.begin() + bi * config.batch_size,
                                 order.begin() + (bi + 1) * config.batch_size);
      IkLoss l;
      try {
        l = batch_loss_and_gradient(net, model, axes, data, idx, NormMode::train, &grad);
      } catch (const std::exception& err) {
        throw NumericalError("training failed at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(bi + 1) + ": " + err.what());
      }
      if (!std::isfinite(l.total))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(bi + 1));
      stats.train.total += l.total / batches;
      stats.train.theta += l.theta / batches;
      stats.train.beta += l.beta / batches;
      stats.train.pose += l.pose / batches;

      ++step;
      const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
      for (std::size_t t = 0; t < params.size(); ++t) {
        m[t] = kAdamBeta1 * m[t] + (1.0 - kAdamBeta1) * grad[t];
        v[t] = kAdamBeta2 * v[t] + (1.0 - kAdamBeta2) * grad[t].cwiseAbs2();
        params[t].array() -= rate * (m[t].array() / c1) / ((v[t].array() / c2).sqrt() + kAdamEps);
      }
    }
    if (!net.all_finite())
      throw NumericalError("non-finite weights after epoch " + std::to_string(epoch));
    if (held_out != nullptr && !held_out->empty())
      stats.held_out_pose = evaluate_net(net, model, axes, *held_out).pose;
    result.curve.push_back(stats);
  }
  return result;
}

ArrayBundle net_to_bundle(const MlpIk& net) {
  const MlpOptions& o = net.options();
  ArrayBundle b;
  b.set_attribute("kind", "ik_net");
  b.set_attribute("widths", widths_text(o.widths));
  b.set_attribute("input_count", std::to_string(kFeatureCount));
  b.set_attribute("length_scale", exact(o.length_scale));
  b.set_attribute("norm_eps", exact(o.norm_eps));
  b.set_attribute("norm_momentum", exact(o.norm_momentum));
  auto& mut = const_cast<MlpIk&>(net);
  const auto names = net.parameter_names();
  const auto params = mut.parameters();
  // Weights keep their (out, in) shape; vectors are 1-D.
  std::vector<Eigen::MatrixXd> weights;
  for (const auto& blk : net.blocks()) weights.push_back(blk.dense.weight);
  weights.push_back(net.head_beta().weight);
  weights.push_back(net.head_theta().weight);
  std::size_t w = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (names[i].ends_with(".weight")) {
      b.add_matrix(names[i], DType::f64, weights[w++]);
    } else {
      b.add_vector(names[i], DType::f64, std::vector<double>(params[i].begin(), params[i].end()));
    }
  }
  for (std::size_t i = 0; i < net.blocks().size(); ++i) {
    const auto& blk = net.blocks()[i];
    const std::string p = "block" + std::to_string(i) + ".";
    b.add_vector(p + "running_mean", DType::f64,
                 std::vector<double>(blk.running_mean.begin(), blk.running_mean.end()));
    b.add_vector(p + "running_var", DType::f64,
                 std::vector<double>(blk.running_var.begin(), blk.running_var.end()));
  }
  return b;
}

MlpIk net_from_bundle(const ArrayBundle& b) {
  if (!b.has_attribute("kind") || b.attribute("kind") != "ik_net")
    throw ParseError("checkpoint is not an ik_net bundle");
  MlpOptions o;
  o.widths.clear();
  try {
    std::stringstream ws(b.attribute("widths"));
    std::string item;
    while (std::getline(ws, item, ',')) o.widths.push_back(std::stoi(item));
    o.length_scale = std::stod(b.attribute("length_scale"));
    o.norm_eps = std::stod(b.attribute("norm_eps"));
    o.norm_momentum = std::stod(b.attribute("norm_momentum"));
  } catch (const std::logic_error&) {
    throw ParseError("checkpoint has malformed attributes");
  }
  MlpIk net(o, 0);
  auto params = net.parameters();
  const auto names = net.parameter_names();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedArray& a = b.at(names[i]);
    if (static_cast<Eigen::Index>(a.size()) != params[i].size())
      throw ShapeError("checkpoint tensor '" + names[i] + "' has the wrong size");
    if (names[i].ends_with(".weight")) {
      // Stored row-major (out, in); parameters() views column-major storage.
      const Eigen::MatrixXd m = b.matrix(names[i]);
      const auto& target = i / 4 < net.blocks().size() ? net.blocks()[i / 4].dense.weight
                           : i + 4 == params.size()      ? net.head_beta().weight
                                                         : net.head_theta().weight;
      if (m.rows() != target.rows() || m.cols() != target.cols())
        throw ShapeError("checkpoint tensor '" + names[i] + "' has the wrong shape");
      params[i] = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    } else {
      params[i] = Eigen::Map<const Eigen::VectorXd>(a.data.data(), params[i].size());
    }
  }
  for (std::size_t i = 0; i < net.blocks().size(); ++i) {
    auto& blk = net.blocks()[i];
    const std::string p = "block" + std::to_string(i) + ".";
    for (auto [name, dst] : {std::pair{p + "running_mean", &blk.running_mean},
                             std::pair{p + "running_var", &blk.running_var}}) {
      const NamedArray& a = b.at(name);
      if (static_cast<Eigen::Index>(a.size()) != dst->size())
        throw ShapeError("checkpoint tensor '" + name + "' has the wrong size");
      *dst = Eigen::Map<const Eigen::VectorXd>(a.data.data(), dst->size());
    }
  }
  if (!net.all_finite()) throw NumericalError("checkpoint contains non-finite values");
  return net;
}

void save_checkpoint(const MlpIk& net, const std::filesystem::path& path) {
  net_to_bundle(net).save_binary(path);
}

MlpIk load_checkpoint(const std::filesystem::path& path) {
  return net_from_bundle(ArrayBundle::load(path));
}

std::string loss_curve_csv(const TrainResult& r) {
  std::ostringstream os;
  os << "epoch,learning_rate,total,theta,beta,pose,held_out_pose\n";
  for (const auto& s : r.curve) {
    os << s.epoch << ',' << format_number(s.learning_rate) << ',' << format_number(s.train.total)
       << ',' << format_number(s.train.theta) << ',' << format_number(s.train.beta) << ','
       << format_number(s.train.pose) << ','
       << (s.held_out_pose < 0.0 ? std::string("") : format_number(s.held_out_pose)) << '\n';
  }
  return os.str();
}

}  // namespace handkin
