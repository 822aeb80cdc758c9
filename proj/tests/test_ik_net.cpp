#include <doctest.h>

#include <random>

#include "handkin/error.hpp"
#include "handkin/ik_net.hpp"
#include "handkin/rotation.hpp"
#include "test_util.hpp"

using namespace handkin;

namespace {

const AxisTable& axes() {
  static const AxisTable a = derive_axes(test::desk());
  return a;
}

const SynthPairSet& pairs() {
  static const SynthPairSet p = generate_pairs(test::desk(), axes(), 96, DofLimits::defaults(), 5);
  return p;
}

MlpOptions small(std::vector<int> widths = {12, 9}) {
  MlpOptions o;
  o.widths = std::move(widths);
  return o;
}

void randomize_norm(MlpIk& net, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5), v(-0.3, 0.3);
  for (auto& b : net.blocks()) {
    for (Eigen::Index i = 0; i < b.gamma.size(); ++i) {
      b.gamma[i] = u(rng);
      b.beta[i] = v(rng);
      b.running_mean[i] = v(rng);
      b.running_var[i] = u(rng);
    }
  }
}

// Scalar-loop reference of the network in either mode.
Eigen::MatrixXd naive_forward(const MlpIk& net, const Eigen::MatrixXd& x, bool train) {
  const int batch = static_cast<int>(x.cols());
  Eigen::MatrixXd a = x;
  for (const auto& b : net.blocks()) {
    const int out = static_cast<int>(b.dense.weight.rows());
    Eigen::MatrixXd z(out, batch);
    for (int o = 0; o < out; ++o)
      for (int s = 0; s < batch; ++s) {
        double acc = b.dense.bias[o];
        for (int i = 0; i < a.rows(); ++i) acc += b.dense.weight(o, i) * a(i, s);
        z(o, s) = acc;
      }
    for (int o = 0; o < out; ++o) {
      double mean = b.running_mean[o], var = b.running_var[o];
      if (train) {
        mean = 0;
        for (int s = 0; s < batch; ++s) mean += z(o, s) / batch;
        var = 0;
        for (int s = 0; s < batch; ++s) var += (z(o, s) - mean) * (z(o, s) - mean) / batch;
      }
      for (int s = 0; s < batch; ++s) {
        const double y = b.gamma[o] * (z(o, s) - mean) / std::sqrt(var + 1e-5) + b.beta[o];
        z(o, s) = y > 0 ? y : 0;
      }
    }
    a = z;
  }
  Eigen::MatrixXd out(kShapeCount + kBioDofCount, batch);
  int row = 0;
  for (const DenseLayer* h : {&net.head_beta(), &net.head_theta()})
    for (int o = 0; o < h->weight.rows(); ++o, ++row)
      for (int s = 0; s < batch; ++s) {
        double acc = h->bias[o];
        for (int i = 0; i < a.rows(); ++i) acc += h->weight(o, i) * a(i, s);
        out(row, s) = acc;
      }
  return out;
}

Eigen::MatrixXd features(const std::vector<int>& idx) {
  Eigen::MatrixXd x(kFeatureCount, idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) x.col(i) = featurize(pairs()[idx[i]].skeleton).values;
  return x;
}

}  // namespace

TEST_CASE("bone features are unit directions and scaled lengths") {
  std::mt19937_64 rng(60);
  const Skeleton s = pairs()[0].skeleton;
  const BoneFeatures f = featurize(s);
  const auto bones = bone_vectors(s);
  for (int e = 0; e < kBoneCount; ++e) {
    CHECK(f.values.segment<3>(3 * e).norm() == doctest::Approx(1.0));
    CHECK(f.values[60 + e] == doctest::Approx(bones[e].norm() * 0.01));
  }
  // Translation invariant, rotation equivariant.
  const Mat3 r = rodrigues(test::random_rotvec(rng));
  Skeleton moved;
  moved.joints = (s.joints * r.transpose()).rowwise() + Vec3(10, -20, 30).transpose();
  const BoneFeatures g = featurize(moved);
  for (int e = 0; e < kBoneCount; ++e) {
    CHECK((g.values.segment<3>(3 * e) - r * f.values.segment<3>(3 * e)).norm() < 1e-12);
    CHECK(g.values[60 + e] == doctest::Approx(f.values[60 + e]));
  }
  Skeleton bad = s;
  bad.joints.row(2) = bad.joints.row(1);
  CHECK_THROWS_AS(featurize(bad), NumericalError);
}

TEST_CASE("default initialization and zero heads") {
  MlpIk net;
  CHECK(net.blocks().size() == 3u);
  CHECK(net.blocks()[0].dense.weight.rows() == 256);
  CHECK(net.blocks()[0].dense.weight.cols() == kFeatureCount);
  CHECK(net.blocks()[0].dense.weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(80.0));
  CHECK(net.head_theta().weight.cwiseAbs().maxCoeff() <= 1.0 / 16.0);
  CHECK(net.parameter_count() == 80 * 256 + 256 * 3 + 2 * (256 * 256 + 256 * 3) + 256 * 10 + 10 + 256 * 23 + 23);
  CHECK(net.parameter_names().size() == net.parameters().size());

  MlpOptions o;
  o.zero_heads = true;
  const MlpIk zero(o, 1);
  const auto [theta, beta] = predict(zero, featurize(pairs()[3].skeleton));
  CHECK(theta.angles.isZero(0));
  CHECK(beta.beta.isZero(0));
}

TEST_CASE("forward matches a scalar-loop reference") {
  std::mt19937_64 rng(61);
  MlpIk net(small(), 7);
  randomize_norm(net, rng);
  const Eigen::MatrixXd x = features({0, 1, 2, 3, 4});
  for (bool train : {false, true}) {
    const MlpOutput out = net.forward(x, train ? NormMode::train : NormMode::frozen);
    const Eigen::MatrixXd want = naive_forward(net, x, train);
    CHECK((out.beta - want.topRows(kShapeCount)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((out.theta - want.bottomRows(kBioDofCount)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("train mode updates running statistics with momentum") {
  MlpIk net(small({4}), 8);
  const auto before = net.blocks()[0];
  const Eigen::MatrixXd x = features({0, 1, 2, 3});
  const Eigen::MatrixXd z = (before.dense.weight * x).colwise() + before.dense.bias;
  const Eigen::VectorXd mean = z.rowwise().mean();
  const Eigen::VectorXd var_unbiased = (z.colwise() - mean).array().square().rowwise().sum() / 3.0;
  net.forward(x, NormMode::train);
  const auto& after = net.blocks()[0];
  CHECK((after.running_mean - (0.9 * before.running_mean + 0.1 * mean)).norm() < 1e-12);
  CHECK((after.running_var - (0.9 * before.running_var + 0.1 * var_unbiased)).norm() < 1e-12);
  // Frozen mode leaves them alone.
  const auto frozen = net.blocks()[0].running_mean;
  net.forward(x, NormMode::frozen);
  CHECK(net.blocks()[0].running_mean == frozen);
  CHECK_THROWS_AS(net.forward(features({0}), NormMode::train), DomainError);
}

TEST_CASE("backward matches finite differences on a smooth probe") {
  std::mt19937_64 rng(62);
  std::normal_distribution<double> n(0.0, 1.0);
  for (NormMode mode : {NormMode::frozen, NormMode::train}) {
    MlpIk net(small(), 9);
    randomize_norm(net, rng);
    const Eigen::MatrixXd x = features({5, 6, 7, 8, 9, 10});
    MlpOutput w{Eigen::MatrixXd(kShapeCount, 6), Eigen::MatrixXd(kBioDofCount, 6)};
    for (Eigen::Index i = 0; i < w.beta.size(); ++i) w.beta.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < w.theta.size(); ++i) w.theta.data()[i] = n(rng);
    auto probe = [&] {
      const MlpOutput o = net.forward(x, mode);
      return o.beta.cwiseProduct(w.beta).sum() + o.theta.cwiseProduct(w.theta).sum();
    };
    MlpTape tape;
    net.forward(x, mode, &tape);
    const auto grads = net.backward(tape, w);
    auto params = net.parameters();
    REQUIRE(grads.size() == params.size());
    double worst = 0;
    for (std::size_t t = 0; t < params.size(); ++t)
      for (Eigen::Index i = 0; i < params[t].size(); i += 1 + params[t].size() / 6) {
        const double keep = params[t][i], h = 1e-6;
        params[t][i] = keep + h;
        const double up = probe();
        params[t][i] = keep - h;
        const double down = probe();
        params[t][i] = keep;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(fd - grads[t][i]) / std::max({std::abs(fd), std::abs(grads[t][i]), 1e-4}));
      }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("batch loss gradient matches finite differences in frozen mode") {
  std::mt19937_64 rng(63);
  MlpIk net(small(), 10);
  randomize_norm(net, rng);
  const std::vector<int> idx = {0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<Eigen::VectorXd> g;
  batch_loss_and_gradient(net, test::desk(), axes(), pairs(), idx, NormMode::frozen, &g);
  auto params = net.parameters();
  std::uniform_int_distribution<std::size_t> pick_t(0, params.size() - 1);
  double worst = 0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t t = pick_t(rng);
    const Eigen::Index i = std::uniform_int_distribution<Eigen::Index>(0, params[t].size() - 1)(rng);
    const double keep = params[t][i], h = 1e-6;
    params[t][i] = keep + h;
    const double up = batch_loss_and_gradient(net, test::desk(), axes(), pairs(), idx, NormMode::frozen, nullptr).total;
    params[t][i] = keep - h;
    const double down = batch_loss_and_gradient(net, test::desk(), axes(), pairs(), idx, NormMode::frozen, nullptr).total;
    params[t][i] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[t][i]) / std::max({std::abs(fd), std::abs(g[t][i]), 1e-4}));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("loss terms agree with ik_loss") {
  MlpIk net(small(), 11);
  const SynthPair& p = pairs()[4];
  const IkLoss a = batch_loss_and_gradient(net, test::desk(), axes(), pairs(), {4, 4}, NormMode::frozen, nullptr);
  const MlpOutput o = net.forward(featurize(p.skeleton).values, NormMode::frozen);
  BioPose t;
  t.angles = o.theta.col(0);
  ShapeParams b;
  b.beta = o.beta.col(0);
  const IkLoss want = ik_loss(test::desk(), axes(), t, b, p.theta, p.beta);
  CHECK(a.theta == doctest::Approx(want.theta));
  CHECK(a.beta == doctest::Approx(want.beta));
  CHECK(a.pose == doctest::Approx(want.pose));
  const IkLoss self = ik_loss(test::desk(), axes(), p.theta, p.beta, p.theta, p.beta);
  CHECK(self.total == 0.0);
}

TEST_CASE("pairs are deterministic and feasible") {
  const auto a = generate_pairs(test::desk(), axes(), 10, DofLimits::defaults(), 42);
  const auto b = generate_pairs(test::desk(), axes(), 10, DofLimits::defaults(), 42);
  for (int i = 0; i < 10; ++i) {
    CHECK(a[i].theta.angles == b[i].theta.angles);
    CHECK(a[i].skeleton.joints == b[i].skeleton.joints);
    CHECK(is_feasible(a[i].theta, DofLimits::defaults()));
  }
  const auto c = generate_pairs(test::desk(), axes(), 10, DofLimits::defaults(), 43);
  CHECK(c[0].theta.angles != a[0].theta.angles);
}

TEST_CASE("zero learning rate leaves weights unchanged") {
  MlpIk net(small(), 12);
  const MlpIk before = net;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.decay_epochs = {};
  cfg.learning_rate = 0.0;
  cfg.batch_size = 16;
  train(net, test::desk(), axes(), pairs(), cfg);
  auto p = net.parameters();
  auto q = const_cast<MlpIk&>(before).parameters();
  for (std::size_t t = 0; t < p.size(); ++t) CHECK(p[t] == q[t]);
}

TEST_CASE("training lowers the loss and is reproducible") {
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.decay_epochs = {4};
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 16;
  cfg.seed = 3;
  const SynthPairSet held(pairs().begin() + 80, pairs().end());
  const SynthPairSet data(pairs().begin(), pairs().begin() + 80);
  MlpIk a(small({32, 32}), 13), b(small({32, 32}), 13);
  const TrainResult ra = train(a, test::desk(), axes(), data, cfg, &held);
  const TrainResult rb = train(b, test::desk(), axes(), data, cfg, &held);
  REQUIRE(ra.curve.size() == 6u);
  CHECK(ra.curve.back().train.total < ra.curve.front().train.total);
  CHECK(ra.curve.back().held_out_pose >= 0.0);
  CHECK(ra.curve[4].learning_rate == doctest::Approx(1e-4));
  CHECK(loss_curve_csv(ra) == loss_curve_csv(rb));
  CHECK(loss_curve_csv(ra).rfind("epoch,learning_rate,total,theta,beta,pose,held_out_pose\n", 0) == 0);
}

TEST_CASE("checkpoints round-trip exactly") {
  std::mt19937_64 rng(64);
  MlpIk net(small(), 14);
  randomize_norm(net, rng);
  const auto dir = test::temp_dir("ckpt");
  save_checkpoint(net, dir / "n.hkb");
  MlpIk r = load_checkpoint(dir / "n.hkb");
  CHECK(r.options().widths == net.options().widths);
  const Eigen::MatrixXd x = features({1, 2, 3});
  const MlpOutput a = net.forward(x, NormMode::frozen), b = r.forward(x, NormMode::frozen);
  CHECK(a.theta == b.theta);
  CHECK(a.beta == b.beta);
  ArrayBundle bad = net_to_bundle(net);
  bad.set_attribute("kind", "hand_model");
  CHECK_THROWS_AS(net_from_bundle(bad), ParseError);
}
