#include "mmjoints/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmjoints {

namespace {
void check_pose_spans(std::span<const Pose> pred, std::span<const Pose> gt) {
  if (pred.size() != gt.size()) throw ValidationError("metric: frame count mismatch");
  if (pred.empty()) throw ValidationError("metric: empty input");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].joint_count() != gt[i].joint_count()) {
      throw ValidationError("metric: joint count mismatch");
    }
  }
}
}  // namespace

double mpjpe(std::span<const Pose> pred, std::span<const Pose> gt) {
  check_pose_spans(pred, gt);
  double total = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    total += (pred[i].joints - gt[i].joints).rowwise().norm().sum();
    count += pred[i].joint_count();
  }
  return total / static_cast<double>(count);
}

double mae(std::span<const Pose> pred, std::span<const Pose> gt) {
  check_pose_spans(pred, gt);
  double total = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    total += (pred[i].joints - gt[i].joints).cwiseAbs().sum();
    count += 3 * pred[i].joint_count();
  }
  return total / static_cast<double>(count);
}

double pck05(std::span<const Pose> pred, std::span<const Pose> gt, double torso_diameter_cm) {
  if (!(torso_diameter_cm > 0.0)) throw ValidationError("pck05: torso diameter must be > 0");
  check_pose_spans(pred, gt);
  const double threshold = 0.5 * torso_diameter_cm;
  long hits = 0, count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (int j = 0; j < pred[i].joint_count(); ++j) {
      if ((pred[i].joint(j) - gt[i].joint(j)).norm() <= threshold) hits += 1;
      count += 1;
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(count);
}

double wmape(const Vector& pred, const Vector& gt) {
  if (pred.size() != gt.size()) throw ValidationError("wmape: length mismatch");
  const double denom = gt.cwiseAbs().sum();
  if (!(denom > 0.0)) throw ValidationError("wmape: ground truth is all zero");
  return 100.0 * (gt - pred).cwiseAbs().sum() / denom;
}

double smape(const Vector& pred, const Vector& gt) {
  if (pred.size() != gt.size()) throw ValidationError("smape: length mismatch");
  if (pred.size() == 0) throw ValidationError("smape: empty input");
  double acc = 0.0;
  for (int i = 0; i < pred.size(); ++i) {
    const double denom = std::abs(gt[i]) + std::abs(pred[i]);
    if (denom > 0.0) acc += 2.0 * std::abs(gt[i] - pred[i]) / denom;
  }
  return 100.0 * acc / static_cast<double>(pred.size());
}

MetricReport pose_metrics(std::span<const Pose> pred, std::span<const Pose> gt,
                          double torso_diameter_cm) {
  MetricReport r;
  r.mpjpe_cm = mpjpe(pred, gt);
  r.mae_cm = mae(pred, gt);
  r.pck05_pct = pck05(pred, gt, torso_diameter_cm);
  const int j = pred.front().joint_count();
  r.per_joint_mpjpe_cm = Vector::Zero(j);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    r.per_joint_mpjpe_cm += (pred[i].joints - gt[i].joints).rowwise().norm();
  }
  r.per_joint_mpjpe_cm /= static_cast<double>(pred.size());
  return r;
}

// ---- refinement ----

namespace {

Vector refine_input(const EnrichedSample& s, RefineMode mode, const Vector& mean,
                    const Vector& std) {
  const Vector pose = (s.pred_flat - mean).cwiseQuotient(std);
  if (mode == RefineMode::PoseOnly) return pose;
  Vector in(pose.size() + s.xi.size() + s.kappa.size());
  in << pose, s.xi, s.kappa;
  return in;
}

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
  }
  return order;
}

}  // namespace

RefineOutcome refine_downstream(std::span<const EnrichedSample> train,
                                std::span<const EnrichedSample> test, RefineMode mode,
                                double torso_diameter_cm, std::uint64_t seed, int epochs,
                                double lr) {
  if (train.empty() || test.empty()) throw ValidationError("refine_downstream: empty data");
  const int pose_dim = static_cast<int>(train.front().pred_flat.size());
  if (mode == RefineMode::PoseDescriptors) {
    for (const auto& s : train) {
      if (s.xi.size() == 0 || s.kappa.size() == 0) {
        throw ValidationError("refine_downstream: descriptors required in augmented mode");
      }
    }
  }

  Vector mean = Vector::Zero(pose_dim), var = Vector::Zero(pose_dim);
  for (const auto& s : train) mean += s.gt_flat;
  mean /= static_cast<double>(train.size());
  for (const auto& s : train) var += (s.gt_flat - mean).array().square().matrix();
  const Vector stddev = (var / static_cast<double>(train.size())).cwiseSqrt().cwiseMax(1.0);

  const int in_dim = static_cast<int>(refine_input(train.front(), mode, mean, stddev).size());
  Network net = Network::init(NetworkSpec::dense({in_dim, 128, 128, pose_dim}, Activation::Relu),
                              seed);
  AdamState state = AdamState::zeros_like(net);
  Rng rng(seed + 1);
  const int batch = 64;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_order(train.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const int b = static_cast<int>(stop - start);
      Matrix x(in_dim, b), pose_std(pose_dim, b), target(pose_dim, b);
      for (int i = 0; i < b; ++i) {
        const auto& s = train[order[start + static_cast<std::size_t>(i)]];
        x.col(i) = refine_input(s, mode, mean, stddev);
        pose_std.col(i) = (s.pred_flat - mean).cwiseQuotient(stddev);
        target.col(i) = (s.gt_flat - mean).cwiseQuotient(stddev);
      }
      ForwardCache cache;
      // residual head: the net predicts a correction to the input pose
      const Matrix out = nn_forward(net, x, &cache) + pose_std;
      const auto l = loss_mse(out, target);
      Gradients grads = Gradients::zeros_like(net);
      nn_backward(net, cache, l.grad, grads);
      adam_step(net, grads, state, lr);
    }
  }

  std::vector<Pose> gt, before, after;
  for (const auto& s : test) {
    gt.push_back(Pose::from_flat(s.gt_flat));
    before.push_back(Pose::from_flat(s.pred_flat));
    const Vector x = refine_input(s, mode, mean, stddev);
    const Vector correction = nn_forward(net, x).col(0);
    const Vector refined_std = (s.pred_flat - mean).cwiseQuotient(stddev) + correction;
    after.push_back(Pose::from_flat(refined_std.cwiseProduct(stddev) + mean));
  }
  return {pose_metrics(before, gt, torso_diameter_cm), pose_metrics(after, gt, torso_diameter_cm)};
}

// ---- activity recognition ----

const char* activity_mode_name(ActivityMode m) {
  switch (m) {
    case ActivityMode::PoseOnly: return "pose_only";
    case ActivityMode::PoseXi: return "pose_xi";
    case ActivityMode::PoseXiKappa: return "pose_xi_kappa";
    case ActivityMode::PoseGtDescriptors: return "pose_gt_descriptors";
  }
  throw ValidationError("unknown activity mode");
}

namespace {

Matrix activity_frames(const ActivityWindow& w, ActivityMode mode, const Vector& mean,
                       const Vector& std) {
  const int t = static_cast<int>(w.pred_flat.size());
  const int pose_dim = static_cast<int>(w.pred_flat.front().size());
  const int j = pose_dim / 3;
  int dim = pose_dim;
  if (mode == ActivityMode::PoseXi) dim += j;
  if (mode == ActivityMode::PoseXiKappa || mode == ActivityMode::PoseGtDescriptors) dim += 2 * j;

  Matrix frames(dim, t);
  for (int f = 0; f < t; ++f) {
    frames.col(f).head(pose_dim) =
        (w.pred_flat[static_cast<std::size_t>(f)] - mean).cwiseQuotient(std);
    switch (mode) {
      case ActivityMode::PoseOnly:
        break;
      case ActivityMode::PoseXi:
        frames.col(f).tail(j) = w.xi[static_cast<std::size_t>(f)];
        break;
      case ActivityMode::PoseXiKappa:
        frames.col(f).segment(pose_dim, j) = w.xi[static_cast<std::size_t>(f)];
        frames.col(f).tail(j) = w.kappa[static_cast<std::size_t>(f)];
        break;
      case ActivityMode::PoseGtDescriptors:
        frames.col(f).segment(pose_dim, j) = w.gt_xi[static_cast<std::size_t>(f)];
        frames.col(f).tail(j) = w.gt_kappa[static_cast<std::size_t>(f)];
        break;
    }
  }
  return frames;
}

void require_mode_inputs(std::span<const ActivityWindow> data, ActivityMode mode) {
  for (const auto& w : data) {
    if (w.pred_flat.empty()) throw ValidationError("activity_downstream: empty window");
    if ((mode == ActivityMode::PoseXi || mode == ActivityMode::PoseXiKappa) &&
        (w.xi.size() != w.pred_flat.size() ||
         (mode == ActivityMode::PoseXiKappa && w.kappa.size() != w.pred_flat.size()))) {
      throw ValidationError("activity_downstream: estimated descriptors missing for mode");
    }
    if (mode == ActivityMode::PoseGtDescriptors &&
        (w.gt_xi.size() != w.pred_flat.size() || w.gt_kappa.size() != w.pred_flat.size())) {
      throw ValidationError("activity_downstream: reference descriptors missing for mode");
    }
  }
}

}  // namespace

ActivityOutcome activity_downstream(std::span<const ActivityWindow> train,
                                    std::span<const ActivityWindow> test, ActivityMode mode,
                                    int n_classes, std::uint64_t seed, int epochs, double lr) {
  if (train.empty() || test.empty()) throw ValidationError("activity_downstream: empty data");
  require_mode_inputs(train, mode);
  require_mode_inputs(test, mode);

  const int pose_dim = static_cast<int>(train.front().pred_flat.front().size());
  Vector mean = Vector::Zero(pose_dim), var = Vector::Zero(pose_dim);
  long frames_n = 0;
  for (const auto& w : train) {
    for (const auto& f : w.pred_flat) {
      mean += f;
      frames_n += 1;
    }
  }
  mean /= static_cast<double>(frames_n);
  for (const auto& w : train) {
    for (const auto& f : w.pred_flat) var += (f - mean).array().square().matrix();
  }
  const Vector stddev = (var / static_cast<double>(frames_n)).cwiseSqrt().cwiseMax(1.0);

  const int frame_dim =
      static_cast<int>(activity_frames(train.front(), mode, mean, stddev).rows());
  constexpr int kTrunkOut = 48;
  Network trunk =
      Network::init(NetworkSpec::dense({frame_dim, 64, kTrunkOut}, Activation::Relu), seed);
  Network head = Network::init(
      NetworkSpec::dense({pooled_size(kTrunkOut), 64, n_classes}, Activation::Relu), seed + 1);
  AdamState trunk_state = AdamState::zeros_like(trunk);
  AdamState head_state = AdamState::zeros_like(head);
  Rng rng(seed + 2);
  const int batch = 32;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_order(train.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const int b = static_cast<int>(stop - start);
      Matrix head_in(pooled_size(kTrunkOut), b);
      std::vector<PoolCache> caches(static_cast<std::size_t>(b));
      std::vector<int> labels;
      for (int i = 0; i < b; ++i) {
        const auto& w = train[order[start + static_cast<std::size_t>(i)]];
        labels.push_back(w.label);
        head_in.col(i) = pool_mean_max(trunk, activity_frames(w, mode, mean, stddev),
                                       &caches[static_cast<std::size_t>(i)]);
      }
      ForwardCache head_cache;
      const Matrix logits = nn_forward(head, head_in, &head_cache);
      const auto ce = loss_cross_entropy(logits, labels);
      Gradients head_grads = Gradients::zeros_like(head);
      const Matrix dhead_in = nn_backward(head, head_cache, ce.grad, head_grads);
      Gradients trunk_grads = Gradients::zeros_like(trunk);
      for (int i = 0; i < b; ++i) {
        pool_backward(trunk, caches[static_cast<std::size_t>(i)], dhead_in.col(i), trunk_grads);
      }
      adam_step(head, head_grads, head_state, lr);
      adam_step(trunk, trunk_grads, trunk_state, lr);
    }
  }

  ActivityOutcome out;
  out.per_class_accuracy_pct = Vector::Zero(n_classes);
  Vector class_total = Vector::Zero(n_classes);
  long hits = 0;
  for (const auto& w : test) {
    const Vector pooled = pool_mean_max(trunk, activity_frames(w, mode, mean, stddev), nullptr);
    const Vector logits = nn_forward(head, pooled).col(0);
    int pred = 0;
    logits.maxCoeff(&pred);
    out.predictions.push_back(pred);
    class_total[w.label] += 1.0;
    if (pred == w.label) {
      hits += 1;
      out.per_class_accuracy_pct[w.label] += 1.0;
    }
  }
  for (int c = 0; c < n_classes; ++c) {
    out.per_class_accuracy_pct[c] =
        class_total[c] > 0.0 ? 100.0 * out.per_class_accuracy_pct[c] / class_total[c] : 0.0;
  }
  out.accuracy_pct = 100.0 * static_cast<double>(hits) / static_cast<double>(test.size());
  return out;
}

}  // namespace mmjoints
