#pragma once

#include "mmjoints/nn.hpp"
#include "mmjoints/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace mmjoints {

/// Tree-structured 17-joint skeleton with bone lengths in cm.
struct Skeleton {
  std::array<int, kJointCount> parents;       // -1 for the pelvis root
  std::array<double, kJointCount> bone_cm;    // length to parent, 0 for root
  double torso_diameter_cm = 20.0;

  static Skeleton standard();
  void validate() const;
};

enum class Activity {
  LeftLateralRaise = 0,
  RightLateralRaise,
  BothLateralRaise,
  LeftBicepCurl,
  RightBicepCurl,
  BothBicepCurl,
  HalfSquat,
  LeftKick,
  RightKick,
  Freestyle,  // supported by the generator; not part of the default 9-label set
};

inline constexpr int kDefaultActivityCount = 9;
const char* activity_name(Activity a);
Activity activity_from_string(const std::string& name);

struct MotionClip {
  Activity activity = Activity::HalfSquat;
  std::vector<Pose> frames;  // 10 fps
  double subject_scale = 1.0;
  std::uint64_t seed = 0;
};

inline constexpr double kFramesPerSecond = 10.0;

/// Parametric joint-angle trajectories per activity with seeded phase and
/// amplitude jitter. Deterministic per (activity, duration, scale, seed).
/// `amplitude` scales all motion; 0 yields a constant rest pose.
MotionClip synth_motion(Activity activity, double duration_s, double subject_scale,
                        std::uint64_t seed, double amplitude = 1.0);

struct RadarConfig {
  Eigen::Vector3d radar_position_cm{0.0, 250.0, 100.0};
  int points_budget = 128;
  double intensity_constant = 62500.0;  // unit intensity at 250 cm
  double noise_std_cm = 2.0;
  double upper_dropout = 0.1;
  double lower_dropout = 0.7;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Samples surface points along bones, applies inverse-square intensity,
/// Gaussian position noise, and per-region dropout. Doppler is the bone-point
/// velocity (from the previous pose) projected on the radar ray.
PointCloudFrame render_frame(const Pose& pose, const Pose& previous, double dt,
                             const RadarConfig& radar, Rng& rng);

/// Static variant: zero Doppler.
PointCloudFrame render_frame(const Pose& pose, const RadarConfig& radar, Rng& rng);

// ---- black-box pose estimators ----

enum class EstimatorKind { Trained, UpperOnly, LowerOnly, RandomInit, PriorDefaulting };

const char* estimator_kind_name(EstimatorKind k);
EstimatorKind estimator_kind_from_string(const std::string& name);

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::Trained;
  int window = 5;  // frames per input window
  std::uint64_t seed = 0;

  void validate() const {
    if (window < 1) throw ValidationError("EstimatorSpec: window must be >= 1");
  }
};

struct WindowSample {
  std::vector<PointCloudFrame> frames;  // window frames, oldest first
  Pose gt_pose;                         // pose at the last frame
};

/// Pooled dense network over K-frame point-cloud windows. The pipeline only
/// ever consumes `estimate`, treating the model as a black box.
struct PoseEstimator {
  EstimatorSpec spec;
  Network point_net;       // per-point features, pooled per frame
  Network head;            // concat of K pooled frame features -> 3J
  Vector mean_pose_flat;   // training-set mean, used by the biased variants
  int lower_point_threshold = 36;  // window-level count triggering the fallback
};

/// Trained minimizes pose MSE; UpperOnly/LowerOnly train one half and freeze
/// the other at the training-set mean; RandomInit never trains;
/// PriorDefaulting is Trained plus a mean-pose fallback for the lower body
/// when the window carries too few lower-body points.
PoseEstimator make_estimator(const EstimatorSpec& spec, std::span<const WindowSample> training,
                             int epochs = 30, double lr = 1e-3);

Pose estimate(const PoseEstimator& estimator, std::span<const PointCloudFrame> window);

/// Points below the subject's hip line count as lower-body returns.
int lower_body_point_count(std::span<const PointCloudFrame> window);

/// Fixed input featurization shared by every set encoder in the pipeline:
/// (x, y, z) / 100, intensity, doppler / 100. Columns are points.
Matrix featurize_points(const PointCloudFrame& frame);
inline constexpr int kPointFeatureDim = 5;

}  // namespace mmjoints
