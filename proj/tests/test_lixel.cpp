#include <doctest.h>

#include <random>

#include "handkin/error.hpp"
#include "handkin/lixel.hpp"

using namespace handkin;

TEST_CASE("encode places the peak at the coordinate") {
  const Heatmap1D h = encode(0.3);
  CHECK(h.size() == kDefaultLixels);
  Eigen::Index peak = 0;
  h.values.maxCoeff(&peak);
  CHECK(peak == static_cast<Eigen::Index>(0.3 * 64));
  CHECK(h.values[5] == doctest::Approx(std::exp(-std::pow(5.5 - 0.3 * 64, 2) / (2 * 2.5 * 2.5))));
}

TEST_CASE("decode inverts encode across the unit range") {
  std::mt19937_64 rng(40);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    worst = std::max(worst, std::abs(decode(encode(x)) - x));
  }
  CHECK(worst < 1.0 / 128);
  CHECK(worst < 1e-9);
  for (double x : {0.0, 1.0, 0.001, 0.999}) CHECK(decode(encode(x)) == doctest::Approx(x).epsilon(1e-9));
  // The plain expectation is biased near the borders.
  CHECK(std::abs(soft_argmax(encode(0.01)) - 0.01) > 1e-3);
}

TEST_CASE("decode handles flat and one-hot maps") {
  Heatmap1D flat{Eigen::VectorXd::Ones(64), Axis::y};
  CHECK(decode(flat) == doctest::Approx(0.5));
  Heatmap1D hot{Eigen::VectorXd::Zero(64), Axis::z};
  hot.values[10] = 1.0;
  CHECK(decode(hot) == doctest::Approx(10.5 / 64));
  Heatmap1D bad{Eigen::VectorXd::Zero(64), Axis::x};
  CHECK_THROWS(decode(bad));
}

TEST_CASE("decode_logits is shift invariant and matches soft-argmax") {
  const Heatmap1D h = encode(0.62);
  const Eigen::VectorXd logits = h.values.array().log();
  CHECK(decode_logits(logits) == doctest::Approx(soft_argmax(h)).epsilon(1e-12));
  CHECK(decode_logits(logits.array() + 700.0) == doctest::Approx(decode_logits(logits)).epsilon(1e-12));
}

TEST_CASE("marginalization matches a triple loop and conserves mass") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid3D g(7, 5, 6);
  for (double& v : g.values) v = u(rng);
  const auto m = marginalize(g);
  double total = 0;
  for (double v : g.values) total += v;
  for (int x = 0; x < 7; ++x) {
    double s = 0;
    for (int y = 0; y < 5; ++y)
      for (int z = 0; z < 6; ++z) s += g.at(x, y, z);
    CHECK(m[0].values[x] == doctest::Approx(s).epsilon(1e-12));
  }
  for (int y = 0; y < 5; ++y) {
    double s = 0;
    for (int x = 0; x < 7; ++x)
      for (int z = 0; z < 6; ++z) s += g.at(x, y, z);
    CHECK(m[1].values[y] == doctest::Approx(s).epsilon(1e-12));
  }
  for (int z = 0; z < 6; ++z) {
    double s = 0;
    for (int x = 0; x < 7; ++x)
      for (int y = 0; y < 5; ++y) s += g.at(x, y, z);
    CHECK(m[2].values[z] == doctest::Approx(s).epsilon(1e-12));
  }
  for (const auto& h : m) CHECK(std::abs(h.values.sum() - total) <= 1e-9 * total);
  CHECK(m[1].axis == Axis::y);
}

TEST_CASE("heatmaps csv has one row per lixel") {
  const std::string csv = heatmaps_csv({encode(0.1, 8), encode(0.5, 8, 2.5, Axis::y), encode(0.9, 8, 2.5, Axis::z)});
  CHECK(csv.rfind("lixel,X,Y,Z\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  CHECK_THROWS(heatmaps_csv({encode(0.1, 8), encode(0.5, 9), encode(0.9, 8)}));
}

TEST_CASE("encode validates its arguments") {
  CHECK_THROWS_AS(encode(0.5, 0), DomainError);
  CHECK_THROWS_AS(encode(0.5, 64, 0.0), DomainError);
}
