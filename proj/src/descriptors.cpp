#include "mmjoints/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmjoints {

double signal_strength(const Eigen::Vector3d& joint_cm, const PointCloudFrame& frame,
                       const DatasetStats& stats) {
  stats.validate();
  double psi = 0.0;
  for (const auto& p : frame.points) {
    const double d = std::max((p.position - joint_cm).norm(), stats.d_min);
    const double w = stats.d_ref / d;
    psi += p.intensity * w * w;
  }
  return psi;
}

double sensing_score(double psi, const DatasetStats& stats) {
  // sigmoid rounds to 1.0 for arguments beyond ~37; keep xi strictly below 1
  return std::min(sigmoid(psi - stats.psi_bar), std::nextafter(1.0, 0.0));
}

double reliability_score(double distance_cm, const DatasetStats& stats) {
  if (distance_cm < 0.0) throw ValidationError("reliability_score: distance must be >= 0");
  const double half_torso = 0.5 * stats.torso_bar;
  const double f = 1.0 - sigmoid(distance_cm - half_torso);
  const double f0 = 1.0 - sigmoid(-half_torso);
  // underflows to 0 past ~750 cm of error; keep kappa strictly positive
  return std::max(f / f0, std::numeric_limits<double>::min());
}

JointType classify_joint(double psi, double distance_cm, const DatasetStats& stats) {
  if (distance_cm < 0.0) throw ValidationError("classify_joint: distance must be >= 0");
  const bool sensed = psi >= stats.psi_bar;
  const bool correct = distance_cm <= 0.5 * stats.torso_bar;
  if (correct) {
    return sensed ? JointType::CorrectSensed : JointType::CorrectNotSensed;
  }
  return sensed ? JointType::IncorrectSensed : JointType::IncorrectNotSensed;
}

std::array<long, 4> tabulate_joint_types(std::span<const std::pair<double, double>> psi_distance,
                                         const DatasetStats& stats) {
  std::array<long, 4> counts = {0, 0, 0, 0};
  for (const auto& [psi, distance] : psi_distance) {
    counts[static_cast<std::size_t>(classify_joint(psi, distance, stats))] += 1;
  }
  return counts;
}

std::vector<std::pair<double, double>> joint_records(const Pose& predicted,
                                                     const Pose& ground_truth,
                                                     const PointCloudFrame& frame,
                                                     const DatasetStats& stats) {
  if (predicted.joint_count() != ground_truth.joint_count()) {
    throw ValidationError("joint_records: joint count mismatch");
  }
  std::vector<std::pair<double, double>> records;
  records.reserve(static_cast<std::size_t>(predicted.joint_count()));
  for (int j = 0; j < predicted.joint_count(); ++j) {
    const double psi = signal_strength(ground_truth.joint(j), frame, stats);
    const double distance = (predicted.joint(j) - ground_truth.joint(j)).norm();
    records.emplace_back(psi, distance);
  }
  return records;
}

std::vector<JointDescriptor> reference_descriptors(const Pose& predicted, const Pose& ground_truth,
                                                   const PointCloudFrame& frame,
                                                   const DatasetStats& stats) {
  std::vector<JointDescriptor> out;
  for (const auto& [psi, distance] : joint_records(predicted, ground_truth, frame, stats)) {
    out.push_back({sensing_score(psi, stats), reliability_score(distance, stats)});
  }
  return out;
}

}  // namespace mmjoints
