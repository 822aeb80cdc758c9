#include <doctest.h>

#include <random>

#include "handkin/error.hpp"
#include "handkin/formats.hpp"
#include "handkin/text_format.hpp"
#include "test_util.hpp"

using namespace handkin;

namespace {

const AxisTable& axes() {
  static const AxisTable a = derive_axes(test::desk());
  return a;
}

std::string joints_json(const Points3& j, double scale) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < j.rows(); ++i) {
    s += i ? ",[" : "[";
    for (int c = 0; c < 3; ++c) s += (c ? "," : "") + format_number(j(i, c) * scale);
    s += "]";
  }
  return s + "]";
}

}  // namespace

TEST_CASE("pose json round-trips and expands bio poses") {
  std::mt19937_64 rng(70);
  PoseRecord r;
  r.bio = test::random_bio(rng);
  r.pose.articulation = expand(*r.bio, axes());
  r.pose.global_rot = Vec3(0.1, 0.2, 0.3);
  r.pose.translation = Vec3(1, 2, 3);
  r.shape = test::random_beta(rng);
  const std::string text = pose_to_json(r);
  const PoseRecord p = parse_pose_json(text, axes());
  REQUIRE(p.bio);
  CHECK((p.bio->angles - r.bio->angles).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((p.pose.articulation - r.pose.articulation).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(p.pose.translation == Vec3(1, 2, 3));
  CHECK(pose_to_json(p) == text);

  std::string zeros = "0";
  for (int i = 1; i < kArticulationSize; ++i) zeros += ", 0";
  const PoseRecord z = parse_pose_json("{\"articulation\": [" + zeros + "]}", axes());
  CHECK(z.pose.articulation.isZero(0));
  CHECK(!z.bio);
}

TEST_CASE("pose json errors") {
  CHECK_THROWS_AS(parse_pose_json("{", axes()), ParseError);
  CHECK_THROWS_AS(parse_pose_json("{}", axes()), ParseError);
  CHECK_THROWS_AS(parse_pose_json("[1, 2]", axes()), ParseError);
  CHECK_THROWS_AS(parse_pose_json("{\"bio\": [1, 2]}", axes()), ShapeError);
  CHECK_THROWS_AS(parse_pose_json("{\"bio\": \"x\"}", axes()), ParseError);
}

TEST_CASE("annotations honor units and layouts") {
  const Points3 j = rest_joints(test::desk(), {}).joints;
  const auto mm = parse_annotations("{\"unit\": \"mm\", \"joints\": " + joints_json(j, 1.0) + "}");
  const auto m = parse_annotations("{\"unit\": \"m\", \"joints\": " + joints_json(j, 1e-3) + "}");
  const auto bare = parse_annotations(joints_json(j, 1e-3), Unit::m);
  const auto list = parse_annotations("[" + joints_json(j, 1.0) + ", {\"joints\": " + joints_json(j, 1.0) + "}]");
  REQUIRE(mm.size() == 1u);
  REQUIRE(list.size() == 2u);
  CHECK((mm[0].joints - j).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((m[0].joints - mm[0].joints).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((bare[0].joints - mm[0].joints).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((list[1].joints - mm[0].joints).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(!mm[0].vertices);

  const auto k = parse_annotations("{\"joints\": " + joints_json(j, 1.0) +
                                   ", \"K\": [[500, 0, 112], [0, 500, 112], [0, 0, 1]], \"vertices\": [[1, 2, 3]]}");
  REQUIRE(k[0].intrinsics);
  CHECK((*k[0].intrinsics)(0, 2) == 112.0);
  REQUIRE(k[0].vertices);
  CHECK(k[0].vertices->rows() == 1);

  CHECK_THROWS_AS(parse_annotations("{\"joints\": [[1, 2, 3]]}"), ShapeError);
  CHECK_THROWS_AS(parse_annotations("{\"unit\": \"cm\", \"joints\": " + joints_json(j, 1.0) + "}"), ParseError);
  CHECK_THROWS_AS(parse_annotations("[]"), ParseError);
  CHECK_THROWS_AS(parse_annotations("42"), ParseError);
}

TEST_CASE("fit state json round-trips") {
  std::mt19937_64 rng(71);
  FitState s;
  s.bio = test::random_bio(rng);
  s.shape = test::random_beta(rng);
  s.global_rot = Vec3(0.3, -0.2, 0.1);
  s.translation = Vec3(-4, 5, 6);
  const std::string text = fit_state_to_json(s, axes());
  const FitState r = parse_fit_state_json(text);
  CHECK((r.pack() - s.pack()).cwiseAbs().maxCoeff() < 1e-6);
  // Only the derived articulation may differ in the last digit.
  const std::string again = fit_state_to_json(r, axes());
  CHECK(again.substr(0, again.find("\"articulation\"")) == text.substr(0, text.find("\"articulation\"")));
  CHECK(text.find("\"articulation\"") != std::string::npos);
  CHECK_THROWS_AS(parse_fit_state_json("{\"beta\": []}"), ParseError);
}

TEST_CASE("skeleton json parses back as an annotation") {
  const Skeleton s = rest_joints(test::desk(), {});
  const auto r = parse_annotations(skeleton_to_json(s));
  CHECK((r[0].joints - s.joints).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("loss trace csv starts at the initial loss") {
  FitResult r;
  r.initial_loss = 2.5;
  r.loss_trace = {2.0, 1.0};
  CHECK(loss_trace_csv(r) == "iteration,loss\n0,2.5\n1,2\n2,1\n");
}
