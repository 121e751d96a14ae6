#include "mmjoints/types.hpp"

namespace mmjoints {

namespace {
constexpr std::array<const char*, kJointCount> kJointNames = {
    "pelvis",     "spine",   "chest",   "neck",    "head",   "l_shoulder",
    "l_elbow",    "l_wrist", "r_shoulder", "r_elbow", "r_wrist", "l_hip",
    "l_knee",     "l_ankle", "r_hip",   "r_knee",  "r_ankle"};
}  // namespace

const char* joint_name(int joint) {
  if (joint < 0 || joint >= kJointCount) throw ValidationError("joint index out of range");
  return kJointNames[static_cast<std::size_t>(joint)];
}

bool joint_is_upper(int joint) {
  if (joint < 0 || joint >= kJointCount) throw ValidationError("joint index out of range");
  return joint <= 10;
}

Vector Pose::flat() const {
  const auto j = joint_count();
  Vector v(3 * j);
  for (int i = 0; i < j; ++i) {
    v.segment<3>(3 * i) = joints.row(i).transpose();
  }
  return v;
}

Pose Pose::from_flat(const Vector& v) {
  if (v.size() % 3 != 0) throw ValidationError("flat pose length must be a multiple of 3");
  const int j = static_cast<int>(v.size() / 3);
  Matrix m(j, 3);
  for (int i = 0; i < j; ++i) {
    m.row(i) = v.segment<3>(3 * i).transpose();
  }
  return Pose(std::move(m));
}

const char* joint_type_name(JointType t) {
  switch (t) {
    case JointType::CorrectNotSensed: return "correct_not_sensed";
    case JointType::CorrectSensed: return "correct_sensed";
    case JointType::IncorrectNotSensed: return "incorrect_not_sensed";
    case JointType::IncorrectSensed: return "incorrect_sensed";
  }
  throw ValidationError("invalid joint type");
}

}  // namespace mmjoints
