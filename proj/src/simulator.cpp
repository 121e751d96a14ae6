#include "mmjoints/simulator.hpp"

#include <algorithm>
#include <cmath>

namespace mmjoints {

namespace {

// Base geometry in cm for a unit-scale subject standing at the origin,
// facing +y (toward the radar), z up.
constexpr double kPelvisHeight = 95.0;
constexpr double kSpineLen = 12.5;
constexpr double kChestLen = 12.5;
constexpr double kNeckLen = 12.0;
constexpr double kHeadLen = 14.0;
constexpr double kShoulderX = 19.0;
constexpr double kShoulderZ = 10.0;
constexpr double kUpperArm = 28.0;
constexpr double kForeArm = 25.0;
constexpr double kHipX = 11.0;
constexpr double kHipZ = 6.0;
constexpr double kThigh = 42.0;
constexpr double kShin = 38.0;
constexpr double kAnkleRest = 10.0;

constexpr double kLowerBodyZ = 70.0;  // returns below this line count as lower body

// Time-varying pose parameters; zero means the rest pose.
struct MotionState {
  double abd_left = 0.0;    // arm abduction from vertical, rad
  double abd_right = 0.0;
  double curl_left = 0.0;   // elbow flexion toward the front, rad
  double curl_right = 0.0;
  double squat_drop = 0.0;  // pelvis drop, cm
  double kick_left = 0.0;   // hip flexion, rad
  double kick_right = 0.0;
  double knee_left = 0.0;   // kicking-knee flexion, rad
  double knee_right = 0.0;
  double sway_x = 0.0;      // whole-body drift, cm
  double sway_y = 0.0;
};

Eigen::Vector3d two_link_ik(const Eigen::Vector3d& root, const Eigen::Vector3d& tip, double l1,
                            double l2) {
  Eigen::Vector3d d = tip - root;
  double len = d.norm();
  const double max_len = 0.999 * (l1 + l2);
  if (len > max_len) {
    d *= max_len / len;
    len = max_len;
  }
  if (len < 1e-9) return root + Eigen::Vector3d(0.0, l1, 0.0);
  const Eigen::Vector3d along = d / len;
  const double a = (len * len + l1 * l1 - l2 * l2) / (2.0 * len);
  const double h = std::sqrt(std::max(0.0, l1 * l1 - a * a));
  // bend forward (+y)
  Eigen::Vector3d perp = Eigen::Vector3d(0.0, 1.0, 0.0) -
                         along.y() * along;
  const double pn = perp.norm();
  perp = pn > 1e-9 ? Eigen::Vector3d(perp / pn) : Eigen::Vector3d(0.0, 0.0, 1.0);
  return root + a * along + h * perp;
}

Pose build_pose(const MotionState& m, double s) {
  Matrix j(kJointCount, 3);
  const Eigen::Vector3d sway(m.sway_x, m.sway_y, 0.0);

  const Eigen::Vector3d pelvis =
      Eigen::Vector3d(0.0, 0.0, kPelvisHeight * s - m.squat_drop) + sway;
  const Eigen::Vector3d spine = pelvis + Eigen::Vector3d(0.0, 0.0, kSpineLen * s);
  const Eigen::Vector3d chest = spine + Eigen::Vector3d(0.0, 0.0, kChestLen * s);
  const Eigen::Vector3d neck = chest + Eigen::Vector3d(0.0, 0.0, kNeckLen * s);
  const Eigen::Vector3d head = neck + Eigen::Vector3d(0.0, 0.0, kHeadLen * s);

  auto arm = [&](double side, double abd, double curl, Eigen::Vector3d& shoulder,
                 Eigen::Vector3d& elbow, Eigen::Vector3d& wrist) {
    shoulder = chest + Eigen::Vector3d(side * kShoulderX * s, 0.0, kShoulderZ * s);
    const Eigen::Vector3d upper_dir(side * std::sin(abd), 0.0, -std::cos(abd));
    elbow = shoulder + kUpperArm * s * upper_dir;
    const Eigen::Vector3d fore_dir =
        std::cos(curl) * upper_dir + std::sin(curl) * Eigen::Vector3d(0.0, 1.0, 0.0);
    wrist = elbow + kForeArm * s * fore_dir;
  };

  Eigen::Vector3d lsh, lel, lwr, rsh, rel, rwr;
  arm(-1.0, m.abd_left, m.curl_left, lsh, lel, lwr);
  arm(+1.0, m.abd_right, m.curl_right, rsh, rel, rwr);

  auto leg = [&](double side, double kick, double knee_flex, Eigen::Vector3d& hip,
                 Eigen::Vector3d& knee, Eigen::Vector3d& ankle) {
    hip = pelvis + Eigen::Vector3d(side * kHipX * s, 0.0, -kHipZ * s);
    if (kick > 1e-9) {
      const Eigen::Vector3d thigh_dir(0.0, std::sin(kick), -std::cos(kick));
      knee = hip + kThigh * s * thigh_dir;
      const double shin_angle = kick - knee_flex;
      const Eigen::Vector3d shin_dir(0.0, std::sin(shin_angle), -std::cos(shin_angle));
      ankle = knee + kShin * s * shin_dir;
    } else {
      // planted foot; the knee absorbs squat and sway
      ankle = Eigen::Vector3d(side * kHipX * s, 0.0, kAnkleRest * s);
      knee = two_link_ik(hip, ankle, kThigh * s, kShin * s);
    }
  };

  Eigen::Vector3d lhip, lknee, lankle, rhip, rknee, rankle;
  leg(-1.0, m.kick_left, m.knee_left, lhip, lknee, lankle);
  leg(+1.0, m.kick_right, m.knee_right, rhip, rknee, rankle);

  j.row(0) = pelvis.transpose();
  j.row(1) = spine.transpose();
  j.row(2) = chest.transpose();
  j.row(3) = neck.transpose();
  j.row(4) = head.transpose();
  j.row(5) = lsh.transpose();
  j.row(6) = lel.transpose();
  j.row(7) = lwr.transpose();
  j.row(8) = rsh.transpose();
  j.row(9) = rel.transpose();
  j.row(10) = rwr.transpose();
  j.row(11) = lhip.transpose();
  j.row(12) = lknee.transpose();
  j.row(13) = lankle.transpose();
  j.row(14) = rhip.transpose();
  j.row(15) = rknee.transpose();
  j.row(16) = rankle.transpose();
  return Pose(std::move(j));
}

struct Oscillator {
  double amplitude = 0.0;
  double freq = 0.4;
  double phase = 0.0;

  double at(double t) const {
    return amplitude * 0.5 * (1.0 - std::cos(2.0 * M_PI * freq * t + phase));
  }
};

Oscillator jittered(Rng& rng, double amplitude) {
  Oscillator o;
  o.amplitude = amplitude * rng.uniform(0.85, 1.15);
  o.freq = rng.uniform(0.30, 0.45);
  o.phase = rng.uniform(0.0, 2.0 * M_PI);
  return o;
}

}  // namespace

Skeleton Skeleton::standard() {
  Skeleton s;
  s.parents = {-1, 0, 1, 2, 3, 2, 5, 6, 2, 8, 9, 0, 11, 12, 0, 14, 15};
  const Pose rest = build_pose(MotionState{}, 1.0);
  s.bone_cm[0] = 0.0;
  for (int j = 1; j < kJointCount; ++j) {
    s.bone_cm[static_cast<std::size_t>(j)] =
        (rest.joint(j) - rest.joint(s.parents[static_cast<std::size_t>(j)])).norm();
  }
  s.torso_diameter_cm = 20.0;
  s.validate();
  return s;
}

void Skeleton::validate() const {
  if (parents[0] != -1) throw ValidationError("Skeleton: joint 0 must be the root");
  for (int j = 1; j < kJointCount; ++j) {
    const int p = parents[static_cast<std::size_t>(j)];
    if (p < 0 || p >= j) throw ValidationError("Skeleton: parents must form a tree");
    if (!(bone_cm[static_cast<std::size_t>(j)] > 0.0)) {
      throw ValidationError("Skeleton: bone lengths must be positive");
    }
  }
  if (!(torso_diameter_cm > 0.0)) throw ValidationError("Skeleton: torso diameter must be positive");
}

const char* activity_name(Activity a) {
  switch (a) {
    case Activity::LeftLateralRaise: return "left_lateral_raise";
    case Activity::RightLateralRaise: return "right_lateral_raise";
    case Activity::BothLateralRaise: return "both_lateral_raise";
    case Activity::LeftBicepCurl: return "left_bicep_curl";
    case Activity::RightBicepCurl: return "right_bicep_curl";
    case Activity::BothBicepCurl: return "both_bicep_curl";
    case Activity::HalfSquat: return "half_squat";
    case Activity::LeftKick: return "left_kick";
    case Activity::RightKick: return "right_kick";
    case Activity::Freestyle: return "freestyle";
  }
  throw ValidationError("unknown activity");
}

Activity activity_from_string(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(Activity::Freestyle); ++i) {
    const auto a = static_cast<Activity>(i);
    if (name == activity_name(a)) return a;
  }
  throw ValidationError("unknown activity: " + name);
}

MotionClip synth_motion(Activity activity, double duration_s, double subject_scale,
                        std::uint64_t seed, double amplitude) {
  if (!(duration_s > 0.0)) throw ValidationError("synth_motion: duration must be > 0");
  if (!(subject_scale > 0.0)) throw ValidationError("synth_motion: scale must be > 0");

  Rng rng(seed);
  Oscillator abd_l, abd_r, curl_l, curl_r, squat, kick_l, kick_r;
  switch (activity) {
    case Activity::LeftLateralRaise:
      abd_l = jittered(rng, 1.6);
      break;
    case Activity::RightLateralRaise:
      abd_r = jittered(rng, 1.6);
      break;
    case Activity::BothLateralRaise:
      abd_l = jittered(rng, 1.6);
      abd_r = abd_l;  // symmetric raise
      break;
    case Activity::LeftBicepCurl:
      curl_l = jittered(rng, 1.9);
      break;
    case Activity::RightBicepCurl:
      curl_r = jittered(rng, 1.9);
      break;
    case Activity::BothBicepCurl:
      curl_l = jittered(rng, 1.9);
      curl_r = curl_l;
      break;
    case Activity::HalfSquat:
      squat = jittered(rng, 30.0);
      break;
    case Activity::LeftKick:
      kick_l = jittered(rng, 1.3);
      break;
    case Activity::RightKick:
      kick_r = jittered(rng, 1.3);
      break;
    case Activity::Freestyle:
      abd_l = jittered(rng, rng.uniform(0.3, 1.2));
      abd_r = jittered(rng, rng.uniform(0.3, 1.2));
      curl_l = jittered(rng, rng.uniform(0.3, 1.4));
      curl_r = jittered(rng, rng.uniform(0.3, 1.4));
      squat = jittered(rng, rng.uniform(0.0, 8.0));
      break;
  }
  // whole-body sway plus a light weight-shift bob, present in every activity
  Oscillator sway_x = jittered(rng, 8.0);
  Oscillator sway_y = jittered(rng, 6.0);
  Oscillator bob = jittered(rng, rng.uniform(2.0, 5.0));
  const double rest_abd = 0.08;  // arms slightly off the torso

  MotionClip clip;
  clip.activity = activity;
  clip.subject_scale = subject_scale;
  clip.seed = seed;
  const int n_frames = static_cast<int>(std::round(duration_s * kFramesPerSecond));
  for (int f = 0; f < n_frames; ++f) {
    const double t = f / kFramesPerSecond;
    MotionState m;
    m.abd_left = rest_abd + amplitude * abd_l.at(t);
    m.abd_right = rest_abd + amplitude * abd_r.at(t);
    m.curl_left = amplitude * curl_l.at(t);
    m.curl_right = amplitude * curl_r.at(t);
    m.squat_drop = amplitude * (squat.at(t) + bob.at(t));
    m.kick_left = amplitude * kick_l.at(t);
    m.kick_right = amplitude * kick_r.at(t);
    m.knee_left = 0.25 * m.kick_left;
    m.knee_right = 0.25 * m.kick_right;
    m.sway_x = amplitude * (sway_x.at(t) - 0.5 * sway_x.amplitude);
    m.sway_y = amplitude * (sway_y.at(t) - 0.5 * sway_y.amplitude);
    clip.frames.push_back(build_pose(m, subject_scale));
  }
  return clip;
}

void RadarConfig::validate() const {
  if (points_budget < 0) throw ValidationError("RadarConfig: budget must be >= 0");
  for (double p : {upper_dropout, lower_dropout}) {
    if (p < 0.0 || p > 1.0) throw ValidationError("RadarConfig: dropout must be in [0,1]");
  }
  if (!(intensity_constant >= 0.0)) throw ValidationError("RadarConfig: intensity must be >= 0");
  if (noise_std_cm < 0.0) throw ValidationError("RadarConfig: noise std must be >= 0");
}

PointCloudFrame render_frame(const Pose& pose, const Pose& previous, double dt,
                             const RadarConfig& radar, Rng& rng) {
  radar.validate();
  const Skeleton skel = Skeleton::standard();
  PointCloudFrame frame;
  if (radar.points_budget == 0) return frame;

  const int n_bones = kJointCount - 1;
  const int per_bone = radar.points_budget / n_bones;
  int remainder = radar.points_budget % n_bones;

  for (int j = 1; j < kJointCount; ++j) {
    const int parent = skel.parents[static_cast<std::size_t>(j)];
    const bool lower = !joint_is_upper(j);
    const double dropout = lower ? radar.lower_dropout : radar.upper_dropout;
    int count = per_bone + (remainder > 0 ? 1 : 0);
    if (remainder > 0) remainder -= 1;

    for (int k = 0; k < count; ++k) {
      const bool dropped = rng.uniform() < dropout;
      if (dropped) continue;
      const double t = rng.uniform();
      const Eigen::Vector3d now =
          pose.joint(parent) + t * (pose.joint(j) - pose.joint(parent));
      const Eigen::Vector3d before =
          previous.joint(parent) + t * (previous.joint(j) - previous.joint(parent));
      const Eigen::Vector3d velocity = dt > 0.0 ? ((now - before) / dt).eval()
                                                : Eigen::Vector3d::Zero().eval();
      Eigen::Vector3d position = now;
      for (int d = 0; d < 3; ++d) position[d] += radar.noise_std_cm * rng.normal();

      const Eigen::Vector3d ray = position - radar.radar_position_cm;
      const double r = std::max(ray.norm(), 1.0);
      RadarPoint point;
      point.position = position;
      point.intensity = radar.intensity_constant / (r * r);
      point.doppler = velocity.dot(ray / r);
      frame.points.push_back(point);
    }
  }
  return frame;
}

PointCloudFrame render_frame(const Pose& pose, const RadarConfig& radar, Rng& rng) {
  return render_frame(pose, pose, 0.0, radar, rng);
}

const char* estimator_kind_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Trained: return "trained";
    case EstimatorKind::UpperOnly: return "upper_only";
    case EstimatorKind::LowerOnly: return "lower_only";
    case EstimatorKind::RandomInit: return "random_init";
    case EstimatorKind::PriorDefaulting: return "prior_defaulting";
  }
  throw ValidationError("unknown estimator kind");
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(EstimatorKind::PriorDefaulting); ++i) {
    const auto k = static_cast<EstimatorKind>(i);
    if (name == estimator_kind_name(k)) return k;
  }
  throw ValidationError("unknown estimator kind: " + name);
}

Matrix featurize_points(const PointCloudFrame& frame) {
  Matrix out(kPointFeatureDim, static_cast<Eigen::Index>(frame.points.size()));
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    const auto& p = frame.points[i];
    out(0, static_cast<Eigen::Index>(i)) = p.position.x() / 100.0;
    out(1, static_cast<Eigen::Index>(i)) = p.position.y() / 100.0;
    out(2, static_cast<Eigen::Index>(i)) = p.position.z() / 100.0;
    out(3, static_cast<Eigen::Index>(i)) = p.intensity;
    out(4, static_cast<Eigen::Index>(i)) = p.doppler / 100.0;
  }
  return out;
}

int lower_body_point_count(std::span<const PointCloudFrame> window) {
  int count = 0;
  for (const auto& frame : window) {
    for (const auto& p : frame.points) {
      if (p.position.z() < kLowerBodyZ) count += 1;
    }
  }
  return count;
}

namespace {

constexpr int kFrameFeature = 32;

Vector window_features(const PoseEstimator& est, std::span<const PointCloudFrame> window,
                       std::vector<PoolCache>* caches) {
  const int k = est.spec.window;
  if (static_cast<int>(window.size()) < k) {
    throw ValidationError("estimator window: too few frames");
  }
  Vector features(pooled_size(kFrameFeature) * k);
  for (int f = 0; f < k; ++f) {
    PoolCache local;
    const Vector pooled = pool_mean_max(est.point_net, featurize_points(window[static_cast<std::size_t>(f)]),
                                        caches ? &local : nullptr);
    features.segment(pooled_size(kFrameFeature) * f, pooled_size(kFrameFeature)) = pooled;
    if (caches) caches->push_back(std::move(local));
  }
  return features;
}

Vector raw_estimate(const PoseEstimator& est, std::span<const PointCloudFrame> window) {
  const Vector features = window_features(est, window, nullptr);
  return nn_forward(est.head, features).col(0);
}

void overwrite_lower(Vector& flat, const Vector& source) {
  flat.segment(3 * 11, 3 * 6) = source.segment(3 * 11, 3 * 6);
}

void overwrite_upper(Vector& flat, const Vector& source) {
  flat.segment(0, 3 * 11) = source.segment(0, 3 * 11);
}

}  // namespace

PoseEstimator make_estimator(const EstimatorSpec& spec, std::span<const WindowSample> training,
                             int epochs, double lr) {
  spec.validate();
  const bool needs_data = spec.kind == EstimatorKind::Trained ||
                          spec.kind == EstimatorKind::UpperOnly ||
                          spec.kind == EstimatorKind::LowerOnly ||
                          spec.kind == EstimatorKind::PriorDefaulting;
  if (needs_data && training.empty()) {
    throw ValidationError("make_estimator: this estimator kind requires training data");
  }

  PoseEstimator est;
  est.spec = spec;
  est.point_net = Network::init(
      NetworkSpec::dense({kPointFeatureDim, 32, kFrameFeature}, Activation::Relu), spec.seed);
  est.head = Network::init(
      NetworkSpec::dense({pooled_size(kFrameFeature) * spec.window, 96, 3 * kJointCount},
                         Activation::Relu),
      spec.seed + 1);
  est.mean_pose_flat = Vector::Zero(3 * kJointCount);

  if (training.empty()) return est;  // RandomInit without data: raw net outputs

  // Output standardization constants come from the training poses; they are
  // architecture configuration, shared by every estimator kind including the
  // untrained one.
  Matrix targets(3 * kJointCount, static_cast<Eigen::Index>(training.size()));
  for (std::size_t i = 0; i < training.size(); ++i) {
    targets.col(static_cast<Eigen::Index>(i)) = training[i].gt_pose.flat();
  }
  est.mean_pose_flat = targets.rowwise().mean();
  Vector std_flat = ((targets.colwise() - est.mean_pose_flat).array().square().rowwise().sum() /
                     static_cast<double>(training.size()))
                        .sqrt()
                        .matrix();
  std_flat = std_flat.cwiseMax(1.0);

  // The network predicts standardized offsets; the final bias layer carries
  // the un-standardization so estimate() stays a single forward pass.
  if (spec.kind == EstimatorKind::RandomInit) {
    auto& w = est.head.weights.back();
    auto& b = est.head.biases.back();
    // gain lifts the untrained output variance to body scale, so the random
    // model scatters joints instead of collapsing onto the mean pose
    const double gain = 8.0;
    w.array().colwise() *= gain * std_flat.array();
    b = est.mean_pose_flat;
    return est;
  }

  // joint mask per kind
  Vector mask = Vector::Ones(3 * kJointCount);
  if (spec.kind == EstimatorKind::UpperOnly) mask.segment(3 * 11, 3 * 6).setZero();
  if (spec.kind == EstimatorKind::LowerOnly) mask.segment(0, 3 * 11).setZero();

  AdamState point_state = AdamState::zeros_like(est.point_net);
  AdamState head_state = AdamState::zeros_like(est.head);
  Rng order_rng(spec.seed + 2);
  std::vector<std::size_t> order(training.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const int batch = 32;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double epoch_lr = lr;
    // Fisher-Yates with the seeded rng
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(order_rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      Gradients point_grads = Gradients::zeros_like(est.point_net);
      Gradients head_grads = Gradients::zeros_like(est.head);
      for (std::size_t s = start; s < stop; ++s) {
        const auto& sample = training[order[s]];
        std::vector<PoolCache> caches;
        const Vector features = window_features(est, sample.frames, &caches);
        ForwardCache head_cache;
        const Vector pred = nn_forward(est.head, features, &head_cache).col(0);
        const Vector target =
            (sample.gt_pose.flat() - est.mean_pose_flat).cwiseQuotient(std_flat);
        Matrix grad = (2.0 / pred.size()) * (pred - target).cwiseProduct(mask);
        const Matrix dfeatures = nn_backward(est.head, head_cache, grad, head_grads);
        for (int f = 0; f < spec.window; ++f) {
          pool_backward(est.point_net, caches[static_cast<std::size_t>(f)],
                        dfeatures.col(0).segment(pooled_size(kFrameFeature) * f, pooled_size(kFrameFeature)),
                        point_grads);
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      point_grads.scale(inv);
      head_grads.scale(inv);
      adam_step(est.point_net, point_grads, point_state, epoch_lr);
      adam_step(est.head, head_grads, head_state, epoch_lr);
    }
  }

  // fold the un-standardization into the output layer
  auto& w = est.head.weights.back();
  auto& b = est.head.biases.back();
  w.array().colwise() *= std_flat.array();
  b = b.cwiseProduct(std_flat) + est.mean_pose_flat;
  return est;
}

Pose estimate(const PoseEstimator& estimator, std::span<const PointCloudFrame> window) {
  if (static_cast<int>(window.size()) != estimator.spec.window) {
    throw ValidationError("estimate: window length mismatch");
  }
  Vector flat = raw_estimate(estimator, window);
  switch (estimator.spec.kind) {
    case EstimatorKind::Trained:
    case EstimatorKind::RandomInit:
      break;
    case EstimatorKind::UpperOnly:
      overwrite_lower(flat, estimator.mean_pose_flat);
      break;
    case EstimatorKind::LowerOnly:
      overwrite_upper(flat, estimator.mean_pose_flat);
      break;
    case EstimatorKind::PriorDefaulting:
      if (lower_body_point_count(window) < estimator.lower_point_threshold) {
        overwrite_lower(flat, estimator.mean_pose_flat);
      }
      break;
  }
  return Pose::from_flat(flat);
}

}  // namespace mmjoints
