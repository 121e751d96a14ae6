#include "mmjoints/descriptors.hpp"

#include <doctest.h>

#include <cmath>

using namespace mmjoints;

namespace {

DatasetStats default_stats() {
  DatasetStats s;
  s.psi_bar = 1.0;
  s.torso_bar = 20.0;
  s.d_min = 5.0;
  s.d_ref = 10.0;
  return s;
}

PointCloudFrame frame_with(std::vector<RadarPoint> pts) {
  PointCloudFrame f;
  f.points = std::move(pts);
  return f;
}

}  // namespace

TEST_CASE("signal_strength: empty frame gives zero") {
  CHECK(signal_strength(Eigen::Vector3d::Zero(), PointCloudFrame{}, default_stats()) == 0.0);
}

TEST_CASE("signal_strength: coincident point with d_ref == d_min gives unit weight") {
  DatasetStats s = default_stats();
  s.d_ref = s.d_min;
  const auto f = frame_with({{Eigen::Vector3d::Zero(), 1.0, 0.0}});
  CHECK(signal_strength(Eigen::Vector3d::Zero(), f, s) == doctest::Approx(1.0));
}

TEST_CASE("signal_strength: two unit points at d_ref and 2 d_ref") {
  const DatasetStats s = default_stats();
  const auto f = frame_with({{Eigen::Vector3d(10.0, 0.0, 0.0), 1.0, 0.0},
                             {Eigen::Vector3d(0.0, 20.0, 0.0), 1.0, 0.0}});
  CHECK(signal_strength(Eigen::Vector3d::Zero(), f, s) == doctest::Approx(1.25));
}

TEST_CASE("signal_strength: permutation-invariant and additive over concatenation") {
  const DatasetStats s = default_stats();
  Rng rng(7);
  std::vector<RadarPoint> a, b;
  for (int i = 0; i < 20; ++i) {
    a.push_back({Eigen::Vector3d(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(0, 100)),
                 rng.uniform(0, 3), 0.0});
    b.push_back({Eigen::Vector3d(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(0, 100)),
                 rng.uniform(0, 3), 0.0});
  }
  const Eigen::Vector3d joint(1.0, 2.0, 50.0);
  std::vector<RadarPoint> reversed(a.rbegin(), a.rend());
  CHECK(signal_strength(joint, frame_with(a), s) ==
        doctest::Approx(signal_strength(joint, frame_with(reversed), s)));

  std::vector<RadarPoint> both = a;
  both.insert(both.end(), b.begin(), b.end());
  CHECK(signal_strength(joint, frame_with(both), s) ==
        doctest::Approx(signal_strength(joint, frame_with(a), s) +
                        signal_strength(joint, frame_with(b), s)));
}

TEST_CASE("sensing_score: midpoint, ln 3 shift, monotone") {
  const DatasetStats s = default_stats();
  CHECK(sensing_score(s.psi_bar, s) == doctest::Approx(0.5));
  CHECK(sensing_score(s.psi_bar + std::log(3.0), s) == doctest::Approx(0.75));
  CHECK(sensing_score(1e9, s) < 1.0);
  CHECK(sensing_score(1e9, s) > 1.0 - 1e-12);
  CHECK(sensing_score(30.0 + s.psi_bar, s) < 1.0);

  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const double p1 = rng.uniform(-10, 10);
    const double p2 = p1 + rng.uniform(1e-6, 5.0);
    CHECK(sensing_score(p2, s) > sensing_score(p1, s));
  }
}

TEST_CASE("reliability_score: exact endpoints and monotone decay") {
  const DatasetStats s = default_stats();
  CHECK(reliability_score(0.0, s) == 1.0);

  // D = torso/2 = 10: 0.5 / (1 - sigmoid(-10))
  const double expected = 0.5 / (1.0 - 1.0 / (1.0 + std::exp(10.0)));
  CHECK(reliability_score(10.0, s) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(reliability_score(10.0, s) == doctest::Approx(0.500023).epsilon(1e-5));

  CHECK(reliability_score(1e6, s) > 0.0);
  CHECK(reliability_score(1e6, s) < 1e-12);
  CHECK_THROWS_AS(reliability_score(-1.0, s), ValidationError);

  Rng rng(13);
  for (int i = 0; i < 10000; ++i) {
    const double d1 = rng.uniform(0, 40);
    const double d2 = d1 + rng.uniform(1e-6, 10.0);
    CHECK(reliability_score(d2, s) < reliability_score(d1, s));
  }
}

TEST_CASE("classify_joint: regions and tie rule") {
  const DatasetStats s = default_stats();
  CHECK(classify_joint(s.psi_bar + 1.0, 0.0, s) == JointType::CorrectSensed);
  CHECK(classify_joint(s.psi_bar - 1.0, s.torso_bar, s) == JointType::IncorrectNotSensed);
  CHECK(classify_joint(s.psi_bar, 0.5 * s.torso_bar, s) == JointType::CorrectSensed);
  CHECK(classify_joint(s.psi_bar - 0.1, 1.0, s) == JointType::CorrectNotSensed);
  CHECK(classify_joint(s.psi_bar + 0.1, s.torso_bar, s) == JointType::IncorrectSensed);
}

TEST_CASE("classify_joint agrees with thresholding the scores") {
  const DatasetStats s = default_stats();
  const double kappa_threshold = reliability_score(0.5 * s.torso_bar, s);
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    const double psi = rng.uniform(0, 2 * s.psi_bar);
    const double d = rng.uniform(0, 2 * s.torso_bar);
    const bool sensed = sensing_score(psi, s) >= 0.5;
    const bool correct = reliability_score(d, s) >= kappa_threshold;
    const JointType expected =
        correct ? (sensed ? JointType::CorrectSensed : JointType::CorrectNotSensed)
                : (sensed ? JointType::IncorrectSensed : JointType::IncorrectNotSensed);
    CHECK(classify_joint(psi, d, s) == expected);
  }
}

TEST_CASE("tabulate_joint_types: counts and column order") {
  const DatasetStats s = default_stats();
  std::vector<std::pair<double, double>> empty;
  const auto zeros = tabulate_joint_types(empty, s);
  CHECK(zeros == std::array<long, 4>{0, 0, 0, 0});

  // one record per region
  std::vector<std::pair<double, double>> one_each = {
      {s.psi_bar - 1.0, 1.0},            // correct, not sensed
      {s.psi_bar + 1.0, 1.0},            // correct, sensed
      {s.psi_bar - 1.0, s.torso_bar},    // incorrect, not sensed
      {s.psi_bar + 1.0, s.torso_bar},    // incorrect, sensed
  };
  CHECK(tabulate_joint_types(one_each, s) == std::array<long, 4>{1, 1, 1, 1});

  std::vector<std::pair<double, double>> repeated(10, {s.psi_bar + 1.0, 0.0});
  CHECK(tabulate_joint_types(repeated, s) == std::array<long, 4>{0, 10, 0, 0});

  Rng rng(19);
  std::vector<std::pair<double, double>> random_records;
  for (int i = 0; i < 500; ++i) {
    random_records.emplace_back(rng.uniform(0, 3), rng.uniform(0, 40));
  }
  const auto counts = tabulate_joint_types(random_records, s);
  CHECK(counts[0] + counts[1] + counts[2] + counts[3] == 500);
}

TEST_CASE("reference_descriptors: bounds and sensing at ground truth") {
  const DatasetStats s = default_stats();
  Pose gt, pred;
  gt.joints.setZero();
  pred.joints.setZero();
  for (int j = 0; j < kJointCount; ++j) {
    gt.joints(j, 2) = 10.0 * j;
    pred.joints(j, 2) = 10.0 * j + (j % 3);
  }
  const auto f = frame_with({{Eigen::Vector3d(0.0, 0.0, 0.0), 2.0, 0.0},
                             {Eigen::Vector3d(0.0, 0.0, 160.0), 2.0, 0.0}});
  const auto descriptors = reference_descriptors(pred, gt, f, s);
  REQUIRE(descriptors.size() == kJointCount);
  for (const auto& d : descriptors) {
    CHECK(d.xi >= 0.0);
    CHECK(d.xi < 1.0);
    CHECK(d.kappa > 0.0);
    CHECK(d.kappa <= 1.0);
  }
  // joint 0 predicted exactly -> kappa == 1
  CHECK(descriptors[0].kappa == 1.0);
}
