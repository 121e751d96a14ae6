#pragma once

#include "mmjoints/types.hpp"

#include <array>
#include <span>
#include <utility>

namespace mmjoints {

/// Radar signal strength at a joint position: sum over points of
/// intensity * (d_ref / max(d, d_min))^2 with d the joint-to-point distance.
/// Permutation-invariant over points, additive under frame concatenation,
/// zero for an empty frame.
double signal_strength(const Eigen::Vector3d& joint_cm, const PointCloudFrame& frame,
                       const DatasetStats& stats);

/// Sensing score: sigmoid(psi - psi_bar). Monotone increasing in psi,
/// exactly 0.5 at the training-set mean.
double sensing_score(double psi, const DatasetStats& stats);

/// Reliability score for a prediction error of `distance_cm`:
/// f(D) / f(0) with f(D) = 1 - sigmoid(D - torso_bar / 2).
/// Equals 1 at zero error, decays toward 0, never reaches it.
double reliability_score(double distance_cm, const DatasetStats& stats);

/// Threshold taxonomy: sensed iff psi >= psi_bar, correct iff
/// distance <= torso_bar / 2 (ties count as sensed / correct).
JointType classify_joint(double psi, double distance_cm, const DatasetStats& stats);

/// Counts per joint type in report column order
/// (correct-not-sensed, correct-sensed, incorrect-not-sensed, incorrect-sensed).
std::array<long, 4> tabulate_joint_types(std::span<const std::pair<double, double>> psi_distance,
                                         const DatasetStats& stats);

/// Reference descriptors for a predicted pose against ground truth: psi is
/// evaluated at the ground-truth joint (sensing is a property of the body,
/// not of the estimate), kappa at the prediction error.
std::vector<JointDescriptor> reference_descriptors(const Pose& predicted, const Pose& ground_truth,
                                                   const PointCloudFrame& frame,
                                                   const DatasetStats& stats);

/// Per-joint (psi, distance) records backing reference_descriptors; reused by
/// the joint-type tabulations.
std::vector<std::pair<double, double>> joint_records(const Pose& predicted,
                                                     const Pose& ground_truth,
                                                     const PointCloudFrame& frame,
                                                     const DatasetStats& stats);

}  // namespace mmjoints
