#pragma once

#include "mmjoints/common.hpp"

#include <array>
#include <vector>

namespace mmjoints {

/// Fixed 17-joint skeleton. Index table (parents in Skeleton::standard()):
///   0 pelvis, 1 spine, 2 chest, 3 neck, 4 head,
///   5 l_shoulder, 6 l_elbow, 7 l_wrist, 8 r_shoulder, 9 r_elbow, 10 r_wrist,
///   11 l_hip, 12 l_knee, 13 l_ankle, 14 r_hip, 15 r_knee, 16 r_ankle
inline constexpr int kJointCount = 17;

const char* joint_name(int joint);

/// Joints 0-10 (pelvis through wrists) count as upper body, 11-16 as lower.
bool joint_is_upper(int joint);

/// Ordered list of joint positions in cm. Row j is joint j.
struct Pose {
  Matrix joints;  // J x 3

  Pose() : joints(Matrix::Zero(kJointCount, 3)) {}
  explicit Pose(Matrix j) : joints(std::move(j)) {}

  int joint_count() const { return static_cast<int>(joints.rows()); }

  Eigen::Vector3d joint(int j) const { return joints.row(j).transpose(); }

  /// Row-major flattening (x0,y0,z0,x1,...), 3J entries.
  Vector flat() const;
  static Pose from_flat(const Vector& v);

  bool all_finite() const { return joints.allFinite(); }
};

struct RadarPoint {
  Eigen::Vector3d position;  // cm
  double intensity = 0.0;    // >= 0
  double doppler = 0.0;      // cm/s, radial
};

/// Unordered radar returns for one time step. Empty frames are legal.
struct PointCloudFrame {
  std::vector<RadarPoint> points;
  long frame_id = 0;
  double timestamp = 0.0;  // seconds
};

/// Training-corpus reference values used by the descriptor formulas.
struct DatasetStats {
  double psi_bar = 1.0;    // mean signal strength over training data
  double torso_bar = 20.0; // average torso diameter, cm
  double d_min = 5.0;      // distance clamp, cm
  double d_ref = 10.0;     // reference distance, cm

  void validate() const {
    if (!(psi_bar >= 0.0)) throw ValidationError("DatasetStats: psi_bar must be >= 0");
    if (!(torso_bar > 0.0)) throw ValidationError("DatasetStats: torso_bar must be > 0");
    if (!(d_min > 0.0)) throw ValidationError("DatasetStats: d_min must be > 0");
    if (!(d_ref > 0.0)) throw ValidationError("DatasetStats: d_ref must be > 0");
  }
};

/// Per-joint sensing score xi in [0,1) and reliability score kappa in (0,1].
struct JointDescriptor {
  double xi = 0.0;
  double kappa = 1.0;
};

/// Exhaustive sensed/correct taxonomy. Enum order matches the report column
/// order (correct/incorrect x not-sensed/sensed).
enum class JointType {
  CorrectNotSensed = 0,
  CorrectSensed = 1,
  IncorrectNotSensed = 2,
  IncorrectSensed = 3,
};

const char* joint_type_name(JointType t);

/// Estimator output enriched with descriptors: (x, y, z, xi, kappa) per joint.
/// The position block is the estimator's output verbatim.
struct EnrichedPose {
  Pose pose;
  std::vector<JointDescriptor> descriptors;  // one per joint
};

}  // namespace mmjoints
