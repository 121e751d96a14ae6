#pragma once

#include "mmjoints/nn.hpp"
#include "mmjoints/types.hpp"

#include <span>
#include <vector>

namespace mmjoints {

// ---- metrics ----

/// Mean Euclidean joint error over all joints and frames, cm.
double mpjpe(std::span<const Pose> pred, std::span<const Pose> gt);

/// Mean absolute per-axis error, cm.
double mae(std::span<const Pose> pred, std::span<const Pose> gt);

/// Percent of joints with error within half the torso diameter (boundary
/// counts as correct).
double pck05(std::span<const Pose> pred, std::span<const Pose> gt, double torso_diameter_cm);

/// 100 * sum|gt - pred| / sum|gt|. Requires sum|gt| > 0.
double wmape(const Vector& pred, const Vector& gt);

/// 100 * mean(2|gt - pred| / (|gt| + |pred|)), 0/0 terms count as 0.
double smape(const Vector& pred, const Vector& gt);

struct MetricReport {
  double mpjpe_cm = 0.0;
  double mae_cm = 0.0;
  double pck05_pct = 0.0;
  Vector per_joint_mpjpe_cm;
};

MetricReport pose_metrics(std::span<const Pose> pred, std::span<const Pose> gt,
                          double torso_diameter_cm);

// ---- downstream: pose refinement ----

/// One evaluation record: the black-box output, its estimated descriptors,
/// and the ground truth.
struct EnrichedSample {
  Vector pred_flat;  // 3J
  Vector xi;         // J
  Vector kappa;      // J
  Vector gt_flat;    // 3J
};

enum class RefineMode { PoseOnly = 0, PoseDescriptors = 1 };

struct RefineOutcome {
  MetricReport before;
  MetricReport after;
};

/// Small dense refiner with a residual connection from the input pose.
/// The two modes share the architecture; only the input width differs.
RefineOutcome refine_downstream(std::span<const EnrichedSample> train,
                                std::span<const EnrichedSample> test, RefineMode mode,
                                double torso_diameter_cm, std::uint64_t seed, int epochs = 40,
                                double lr = 1e-3);

// ---- downstream: activity recognition ----

/// A short pose sequence with per-frame descriptors and an activity label.
struct ActivityWindow {
  std::vector<Vector> pred_flat;  // T x (3J)
  std::vector<Vector> xi;         // T x J, estimated
  std::vector<Vector> kappa;      // T x J, estimated
  std::vector<Vector> gt_xi;      // T x J, reference descriptors
  std::vector<Vector> gt_kappa;   // T x J
  int label = 0;
};

enum class ActivityMode {
  PoseOnly = 0,
  PoseXi = 1,
  PoseXiKappa = 2,
  PoseGtDescriptors = 3,
};

const char* activity_mode_name(ActivityMode m);

struct ActivityOutcome {
  double accuracy_pct = 0.0;
  Vector per_class_accuracy_pct;
  std::vector<int> predictions;  // per test window
};

/// Temporal-pooling dense classifier (shared per-frame trunk, mean+max over
/// frames, dense head). Modes differ only in the per-frame input width.
ActivityOutcome activity_downstream(std::span<const ActivityWindow> train,
                                    std::span<const ActivityWindow> test, ActivityMode mode,
                                    int n_classes, std::uint64_t seed, int epochs = 40,
                                    double lr = 1e-3);

}  // namespace mmjoints
