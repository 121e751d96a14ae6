#include "mmjoints/latent.hpp"

#include "mmjoints/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmjoints {

namespace {

constexpr int kFrameNetWidth = 32;   // signal per-point feature width
constexpr int kContextWidth = 16;    // generator per-triple feature width
constexpr int kDivergenceWidth = 8;  // refiner per-term feature width

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
  }
  return order;
}

}  // namespace

void LatentHyperparams::validate() const {
  if (d_p < 2) throw ValidationError("LatentHyperparams: d_p must be >= 2");
  if (d_s < 1) throw ValidationError("LatentHyperparams: d_s must be >= 1");
  if (k_frames < 1) throw ValidationError("LatentHyperparams: k_frames must be >= 1");
  if (c_max < d_p) throw ValidationError("LatentHyperparams: c_max must be >= d_p");
  if (m_max < 1) throw ValidationError("LatentHyperparams: m_max must be >= 1");
  if (g_max < 1) throw ValidationError("LatentHyperparams: g_max must be >= 1");
  for (double l : {lambda_step2, lambda_step3, lambda0, lambda1, lambda2, lambda_div, lambda_inter}) {
    if (l < 0.0) throw ValidationError("LatentHyperparams: loss weights must be >= 0");
  }
}

LatentHyperparams LatentHyperparams::desk() { return LatentHyperparams{}; }

LatentHyperparams LatentHyperparams::paper_scale() {
  LatentHyperparams h;
  h.d_p = 32;
  h.d_s = 64;
  h.c_max = 96;
  h.m_max = 32;
  h.g_max = 6;
  return h;
}

// ---- pose clustering ----

PoseClusters cluster_poses(const Matrix& poses_flat, const LatentHyperparams& hyper,
                           const FitConfig& fit) {
  hyper.validate();
  const int n = static_cast<int>(poses_flat.rows());
  if (n < hyper.d_p) throw ValidationError("cluster_poses: fewer poses than d_p");

  // BIC scan on a bounded subsample, final fit on everything.
  const int scan_n = std::min(n, 800);
  Matrix scan(scan_n, poses_flat.cols());
  Rng rng(fit.seed);
  for (int i = 0; i < scan_n; ++i) scan.row(i) = poses_flat.row(rng.uniform_int(0, n - 1));

  const int c_hi = std::min(hyper.c_max, n);
  const int c_lo = std::min(hyper.d_p, c_hi);
  FitConfig scan_fit = fit;
  scan_fit.max_iterations = std::min(fit.max_iterations, 60);
  const int c = bic_select(scan, c_hi, scan_fit, c_lo);

  PoseClusters out;
  out.model = em_fit(poses_flat, c, fit);
  out.count = out.model.size();
  out.labels.reserve(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    out.labels.push_back(assign_cluster(out.model, poses_flat.row(r).transpose()));
  }
  return out;
}

int assign_cluster(const GaussianMixture& model, const Vector& x) {
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < model.size(); ++i) {
    if (model.weights[i] <= 0.0) continue;
    const double score =
        std::log(model.weights[i]) + model.components[static_cast<std::size_t>(i)].log_pdf(x);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

std::vector<int> select_basis_clusters(const PoseClusters& clusters, const Vector& mean_pose_flat,
                                       int d_p) {
  if (clusters.count < d_p) throw ValidationError("select_basis_clusters: fewer clusters than d_p");
  std::vector<long> sizes(static_cast<std::size_t>(clusters.count), 0);
  for (int label : clusters.labels) sizes[static_cast<std::size_t>(label)] += 1;

  std::vector<std::pair<double, int>> scored;  // (-score, id) so sorting is ascending
  for (int i = 0; i < clusters.count; ++i) {
    const double d =
        (clusters.model.components[static_cast<std::size_t>(i)].mean - mean_pose_flat).norm();
    scored.emplace_back(-d * static_cast<double>(sizes[static_cast<std::size_t>(i)]), i);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<int> out;
  for (int i = 0; i < d_p; ++i) out.push_back(scored[static_cast<std::size_t>(i)].second);
  return out;
}

// ---- pose VAE ----

PoseVae train_pose_vae(const Matrix& poses_flat, const LatentHyperparams& hyper,
                       std::uint64_t seed, int epochs, double lr, TrainCurve* curve) {
  hyper.validate();
  const int n = static_cast<int>(poses_flat.rows());
  if (n < 1) throw ValidationError("train_pose_vae: empty training set");
  const int dim = static_cast<int>(poses_flat.cols());

  PoseVae vae;
  vae.d_p = hyper.d_p;
  vae.normalizer.mean = poses_flat.colwise().mean().transpose();
  vae.normalizer.std =
      ((poses_flat.rowwise() - vae.normalizer.mean.transpose()).array().square().colwise().sum() /
       static_cast<double>(n))
          .sqrt()
          .transpose()
          .matrix()
          .cwiseMax(1.0);

  NetworkSpec enc_spec;
  enc_spec.layer_sizes = {dim, 64, 2 * hyper.d_p};
  enc_spec.activations = {Activation::Tanh, Activation::Identity};
  enc_spec.heads = {{HeadTransform::None, hyper.d_p}, {HeadTransform::Softplus, hyper.d_p}};
  vae.encoder = Network::init(enc_spec, seed);
  vae.decoder = Network::init(NetworkSpec::dense({hyper.d_p, 64, dim}, Activation::Tanh), seed + 1);

  Matrix normalized(n, dim);
  for (int r = 0; r < n; ++r) {
    normalized.row(r) = vae.normalizer.normalize(poses_flat.row(r).transpose()).transpose();
  }

  AdamState enc_state = AdamState::zeros_like(vae.encoder);
  AdamState dec_state = AdamState::zeros_like(vae.decoder);
  Rng rng(seed + 2);
  const int batch = 64;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_order(static_cast<std::size_t>(n), rng);
    double epoch_loss = 0.0;
    long steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const int b = static_cast<int>(stop - start);
      Matrix x(dim, b);
      for (int i = 0; i < b; ++i) x.col(i) = normalized.row(static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(i)])).transpose();

      ForwardCache enc_cache;
      const Matrix enc_out = nn_forward(vae.encoder, x, &enc_cache);
      const Matrix mu = enc_out.topRows(hyper.d_p);
      const Matrix sigma = enc_out.bottomRows(hyper.d_p);

      Matrix eps(hyper.d_p, b);
      for (int c = 0; c < b; ++c) {
        for (int r = 0; r < hyper.d_p; ++r) eps(r, c) = rng.normal();
      }
      const Matrix z = mu + sigma.cwiseProduct(eps);

      ForwardCache dec_cache;
      const Matrix recon = nn_forward(vae.decoder, z, &dec_cache);
      const auto rec = loss_mse(recon, x);
      const auto kl = loss_kl_standard_normal(mu, sigma);
      epoch_loss += rec.value + hyper.lambda_step2 * kl.value;
      steps += 1;

      Gradients dec_grads = Gradients::zeros_like(vae.decoder);
      const Matrix dz = nn_backward(vae.decoder, dec_cache, rec.grad, dec_grads);

      Matrix denc(2 * hyper.d_p, b);
      denc.topRows(hyper.d_p) = dz + hyper.lambda_step2 * kl.dmu;
      denc.bottomRows(hyper.d_p) = dz.cwiseProduct(eps) + hyper.lambda_step2 * kl.dsigma;
      Gradients enc_grads = Gradients::zeros_like(vae.encoder);
      nn_backward(vae.encoder, enc_cache, denc, enc_grads);

      adam_step(vae.decoder, dec_grads, dec_state, lr);
      adam_step(vae.encoder, enc_grads, enc_state, lr);
    }
    if (curve) curve->loss_per_epoch.push_back(epoch_loss / static_cast<double>(steps));
  }
  return vae;
}

LatentPose encode_pose(const PoseVae& vae, const Vector& pose_flat) {
  const Matrix out = nn_forward(vae.encoder, vae.normalizer.normalize(pose_flat));
  return {out.col(0).head(vae.d_p), out.col(0).tail(vae.d_p)};
}

Vector decode_pose(const PoseVae& vae, const Vector& latent) {
  return vae.normalizer.denormalize(nn_forward(vae.decoder, latent).col(0));
}

TrainCurve fine_tune_opl(PoseVae& vae, const Matrix& poses_flat, const std::vector<int>& labels,
                         const LatentHyperparams& hyper, std::uint64_t seed, int epochs,
                         double lr) {
  const int n = static_cast<int>(poses_flat.rows());
  if (static_cast<int>(labels.size()) != n) throw ValidationError("fine_tune_opl: label mismatch");
  {
    std::vector<int> distinct(labels);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw ValidationError("fine_tune_opl: need at least two classes");
  }

  AdamState enc_state = AdamState::zeros_like(vae.encoder);
  Rng rng(seed);
  const int batch = 64;
  TrainCurve curve;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_order(static_cast<std::size_t>(n), rng);
    double epoch_loss = 0.0;
    long steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const int b = static_cast<int>(stop - start);
      Matrix x(poses_flat.cols(), b);
      std::vector<int> batch_labels;
      for (int i = 0; i < b; ++i) {
        const auto idx = order[start + static_cast<std::size_t>(i)];
        x.col(i) = vae.normalizer.normalize(poses_flat.row(static_cast<Eigen::Index>(idx)).transpose());
        batch_labels.push_back(labels[idx]);
      }
      {
        std::vector<int> distinct(batch_labels);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 2) continue;  // degenerate batch, skip
      }

      ForwardCache cache;
      const Matrix out = nn_forward(vae.encoder, x, &cache);
      const Matrix mu = out.topRows(vae.d_p);
      const auto opl = loss_opl(mu, batch_labels, hyper.lambda_step3);
      epoch_loss += opl.value;
      steps += 1;

      Matrix dout = Matrix::Zero(2 * vae.d_p, b);
      dout.topRows(vae.d_p) = opl.grad;
      Gradients grads = Gradients::zeros_like(vae.encoder);
      nn_backward(vae.encoder, cache, dout, grads);
      adam_step(vae.encoder, grads, enc_state, lr);
    }
    curve.loss_per_epoch.push_back(steps > 0 ? epoch_loss / static_cast<double>(steps) : 0.0);
  }
  return curve;
}

// ---- pose basis ----

Matrix orthonormal_basis_from_means(const std::vector<Vector>& cluster_mean_features) {
  if (cluster_mean_features.empty()) throw ValidationError("basis: no features");
  const int d = static_cast<int>(cluster_mean_features.front().size());
  if (static_cast<int>(cluster_mean_features.size()) != d) {
    throw ValidationError("basis: need exactly d features of dimension d");
  }
  Matrix basis(d, d);
  for (int i = 0; i < d; ++i) {
    Vector v = cluster_mean_features[static_cast<std::size_t>(i)];
    const double raw_norm = v.norm();
    if (raw_norm < 1e-12) throw ValidationError("basis: zero cluster-mean feature");
    v /= raw_norm;
    // Gram-Schmidt with one re-orthogonalization pass
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < i; ++j) v -= basis.col(j).dot(v) * basis.col(j);
    }
    const double residual = v.norm();
    if (residual < 1e-8) throw ValidationError("basis: rank-deficient cluster means");
    basis.col(i) = v / residual;
  }
  return basis;
}

void PoseBasis::validate() const {
  const int d = static_cast<int>(basis.cols());
  if (basis.rows() != d) throw ValidationError("PoseBasis: must be square");
  const Matrix gram = basis.transpose() * basis;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const double expected = i == j ? 1.0 : 0.0;
      if (std::abs(gram(i, j) - expected) > 1e-9) {
        throw ValidationError("PoseBasis: columns must be orthonormal");
      }
    }
  }
  if (((basis * inverse) - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-9) {
    throw ValidationError("PoseBasis: inverse mismatch");
  }
  if (static_cast<int>(empirical.size()) != d) {
    throw ValidationError("PoseBasis: one empirical distribution per column required");
  }
}

double PoseBasis::max_pairwise_cosine() const {
  double worst = 0.0;
  for (int i = 0; i < basis.cols(); ++i) {
    for (int j = i + 1; j < basis.cols(); ++j) {
      worst = std::max(worst, std::abs(basis.col(i).dot(basis.col(j))));
    }
  }
  return worst;
}

Vector decompose_pose(const Vector& latent, const PoseBasis& basis) {
  if (latent.size() != basis.basis.rows()) throw ValidationError("decompose_pose: dimension mismatch");
  return basis.inverse * latent;
}

// ---- signal encoder ----

LatentSignal encode_window(const SignalEncoder& enc, std::span<const PointCloudFrame> window) {
  if (static_cast<int>(window.size()) != enc.k_frames) {
    throw ValidationError("encode_window: window length mismatch");
  }
  Vector features(enc.frame_feature_dim() * enc.k_frames);
  for (int f = 0; f < enc.k_frames; ++f) {
    features.segment(enc.frame_feature_dim() * f, enc.frame_feature_dim()) =
        pool_mean_max(enc.point_net, featurize_points(window[static_cast<std::size_t>(f)]), nullptr);
  }
  const Matrix out = nn_forward(enc.trunk, features);
  return {out.col(0).head(enc.d_s), out.col(0).segment(enc.d_s, enc.d_s)};
}

Vector frame_feature(const SignalEncoder& enc, const PointCloudFrame& frame) {
  return pool_mean_max(enc.point_net, featurize_points(frame), nullptr);
}

SignalEncoder train_signal_encoder(std::span<const LabeledWindow> windows, int n_classes,
                                   const LatentHyperparams& hyper, std::uint64_t seed, int epochs,
                                   double lr, int batch, TrainCurve* curve) {
  hyper.validate();
  if (windows.empty()) throw ValidationError("train_signal_encoder: no windows");
  if (n_classes < 1) throw ValidationError("train_signal_encoder: n_classes must be >= 1");
  for (const auto& w : windows) {
    if (static_cast<int>(w.frames.size()) != hyper.k_frames) {
      throw ValidationError("train_signal_encoder: window length mismatch");
    }
  }

  SignalEncoder enc;
  enc.k_frames = hyper.k_frames;
  enc.d_s = hyper.d_s;
  enc.n_classes = n_classes;
  enc.point_net = Network::init(
      NetworkSpec::dense({kPointFeatureDim, 32, kFrameNetWidth}, Activation::Relu), seed);
  NetworkSpec trunk_spec;
  trunk_spec.layer_sizes = {pooled_size(kFrameNetWidth) * hyper.k_frames, 128,
                            2 * hyper.d_s + n_classes};
  trunk_spec.activations = {Activation::Tanh, Activation::Identity};
  trunk_spec.heads = {{HeadTransform::None, hyper.d_s},
                      {HeadTransform::Softplus, hyper.d_s},
                      {HeadTransform::None, n_classes}};
  enc.trunk = Network::init(trunk_spec, seed + 1);

  AdamState point_state = AdamState::zeros_like(enc.point_net);
  AdamState trunk_state = AdamState::zeros_like(enc.trunk);
  Rng rng(seed + 2);
  const int ffd = enc.frame_feature_dim();

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_order(windows.size(), rng);
    double epoch_loss = 0.0;
    long steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch));
      const int b = static_cast<int>(stop - start);

      Matrix trunk_in(ffd * hyper.k_frames, b);
      std::vector<std::vector<PoolCache>> caches(static_cast<std::size_t>(b));
      std::vector<int> labels;
      for (int i = 0; i < b; ++i) {
        const auto& w = windows[order[start + static_cast<std::size_t>(i)]];
        labels.push_back(w.label);
        for (int f = 0; f < hyper.k_frames; ++f) {
          PoolCache cache;
          trunk_in.col(i).segment(ffd * f, ffd) = pool_mean_max(
              enc.point_net, featurize_points(w.frames[static_cast<std::size_t>(f)]), &cache);
          caches[static_cast<std::size_t>(i)].push_back(std::move(cache));
        }
      }

      ForwardCache trunk_cache;
      const Matrix out = nn_forward(enc.trunk, trunk_in, &trunk_cache);
      const Matrix mu = out.topRows(hyper.d_s);
      const Matrix sigma = out.middleRows(hyper.d_s, hyper.d_s);
      const Matrix logits = out.bottomRows(n_classes);

      const auto trip = loss_triplet(mu, labels, hyper.triplet_margin);
      const auto ce = loss_cross_entropy(logits, labels);
      const auto kl = loss_kl_standard_normal(mu, sigma);
      epoch_loss += hyper.lambda0 * trip.value + hyper.lambda1 * ce.value + hyper.lambda2 * kl.value;
      steps += 1;

      Matrix dout = Matrix::Zero(out.rows(), b);
      dout.topRows(hyper.d_s) = hyper.lambda0 * trip.grad + hyper.lambda2 * kl.dmu;
      dout.middleRows(hyper.d_s, hyper.d_s) = hyper.lambda2 * kl.dsigma;
      dout.bottomRows(n_classes) = hyper.lambda1 * ce.grad;

      Gradients trunk_grads = Gradients::zeros_like(enc.trunk);
      const Matrix din = nn_backward(enc.trunk, trunk_cache, dout, trunk_grads);
      Gradients point_grads = Gradients::zeros_like(enc.point_net);
      for (int i = 0; i < b; ++i) {
        for (int f = 0; f < hyper.k_frames; ++f) {
          pool_backward(enc.point_net, caches[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)],
                        din.col(i).segment(ffd * f, ffd), point_grads);
        }
      }
      adam_step(enc.trunk, trunk_grads, trunk_state, lr);
      adam_step(enc.point_net, point_grads, point_state, lr);
    }
    if (curve) curve->loss_per_epoch.push_back(epoch_loss / static_cast<double>(std::max(1L, steps)));
  }
  return enc;
}

// ---- empirical distributions ----

GaussianMixture pad_mixture(const GaussianMixture& mixture, int g) {
  if (mixture.size() >= g) return mixture;
  GaussianMixture out = mixture;
  const auto& last = out.components.back();
  const Eigen::Index old = out.weights.size();
  out.weights.conservativeResize(g);
  for (Eigen::Index i = old; i < g; ++i) {
    out.weights[i] = 0.0;
    out.components.push_back(last);
  }
  out.validate();
  return out;
}

GaussianMixture build_empirical_distribution(const CorpusEntry& query,
                                             std::span<const CorpusEntry> corpus,
                                             const LatentHyperparams& hyper, const FitConfig& fit,
                                             int fixed_g) {
  hyper.validate();
  const double radius = query.pose.sigma.norm() / 2.0;

  std::vector<std::pair<double, std::size_t>> candidates;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const double d = (corpus[i].pose.mu - query.pose.mu).norm();
    if (d <= radius) candidates.emplace_back(d, i);
  }
  std::sort(candidates.begin(), candidates.end());
  if (static_cast<int>(candidates.size()) > hyper.m_max) {
    candidates.resize(static_cast<std::size_t>(hyper.m_max));
  }

  std::vector<DiagonalGaussian> neighbors;
  if (candidates.empty()) {
    neighbors.push_back({query.signal.mu, query.signal.sigma});  // fallback: own component
  } else {
    for (const auto& [d, i] : candidates) {
      neighbors.push_back({corpus[i].signal.mu, corpus[i].signal.sigma});
    }
  }

  Rng rng(fit.seed);
  const int per = hyper.samples_per_neighbor;
  Matrix samples(static_cast<Eigen::Index>(neighbors.size()) * per, query.signal.mu.size());
  Eigen::Index row = 0;
  for (const auto& nb : neighbors) {
    for (int s = 0; s < per; ++s) samples.row(row++) = nb.sample(rng).transpose();
  }

  int g = fixed_g;
  if (g <= 0) g = bic_select(samples, hyper.g_max, fit);
  GaussianMixture mixture = em_fit(samples, std::min<int>(g, static_cast<int>(samples.rows())), fit);
  if (fixed_g > 0) mixture = pad_mixture(mixture, fixed_g);
  return mixture;
}

// ---- generator ----

namespace {

Matrix basis_triples_matrix(const PoseBasis& basis, int d_s) {
  std::vector<ComponentTriple> all;
  for (const auto& mixture : basis.empirical) {
    for (const auto& t : to_triples(mixture)) all.push_back(t);
  }
  Matrix m(1 + 2 * d_s, static_cast<Eigen::Index>(all.size()));
  for (std::size_t i = 0; i < all.size(); ++i) {
    m(0, static_cast<Eigen::Index>(i)) = all[i].weight;
    m.col(static_cast<Eigen::Index>(i)).segment(1, d_s) = all[i].mean;
    m.col(static_cast<Eigen::Index>(i)).segment(1 + d_s, d_s) = all[i].cov_diag;
  }
  return m;
}

std::vector<ComponentTriple> parse_generator_output(const Vector& out, int g, int d_s) {
  std::vector<ComponentTriple> triples;
  for (int i = 0; i < g; ++i) {
    ComponentTriple t;
    t.weight = out[i];
    t.mean = out.segment(g + i * d_s, d_s);
    t.cov_diag = out.segment(g + g * d_s + i * d_s, d_s);
    triples.push_back(std::move(t));
  }
  return triples;
}

// Jeffrey divergence between diagonal Gaussians in (mean, variance) form and
// its gradient w.r.t. the second argument.
struct JeffreyGrad {
  double value = 0.0;
  Vector dmean;
  Vector dvar;
};

JeffreyGrad jeffrey_wrt_component(const Vector& mu_s, const Vector& var_s, const Vector& mu_c,
                                  const Vector& var_c) {
  JeffreyGrad out;
  const Vector delta = mu_s - mu_c;
  const Vector d2 = delta.array().square();
  out.value = 0.5 * (((var_s + d2).cwiseQuotient(var_c) + (var_c + d2).cwiseQuotient(var_s)).sum() -
                     2.0 * static_cast<double>(mu_s.size()));
  out.dmean = -delta.cwiseProduct(var_c.cwiseInverse() + var_s.cwiseInverse());
  out.dvar = 0.5 * (var_s.cwiseInverse() -
                    (var_s + d2).cwiseQuotient(var_c.cwiseProduct(var_c)));
  return out;
}

}  // namespace

DistributionGenerator init_generator(const PoseBasis& basis, const LatentHyperparams& hyper, int g,
                                     std::uint64_t seed) {
  if (g < 1) throw ValidationError("init_generator: g must be >= 1");
  DistributionGenerator gen;
  gen.d_s = hyper.d_s;
  gen.g = g;
  gen.context_net = Network::init(
      NetworkSpec::dense({hyper.d_c(), 32, kContextWidth}, Activation::Relu), seed);
  const int context_dim = pooled_size(kContextWidth);
  const int d_p = static_cast<int>(basis.basis.rows());
  NetworkSpec trunk_spec;
  trunk_spec.layer_sizes = {d_p + context_dim, 64, 64, g + 2 * g * hyper.d_s};
  trunk_spec.activations = {Activation::Tanh, Activation::Tanh, Activation::Identity};
  trunk_spec.heads = {{HeadTransform::Softmax, g},
                      {HeadTransform::None, g * hyper.d_s},
                      {HeadTransform::Softplus, g * hyper.d_s}};
  gen.trunk = Network::init(trunk_spec, seed + 1);
  return gen;
}

TrainCurve train_distribution_generator(DistributionGenerator& gen, const PoseBasis& basis,
                                        std::span<const GeneratorSample> data,
                                        const LatentHyperparams& hyper, std::uint64_t seed,
                                        int epochs, double lr, int batch) {
  if (data.empty()) throw ValidationError("train_distribution_generator: no data");
  for (const auto& s : data) {
    if (static_cast<int>(s.target.size()) != gen.g) {
      throw ValidationError("train_distribution_generator: target size != G");
    }
  }
  const Matrix triples = basis_triples_matrix(basis, gen.d_s);
  const int context_dim = pooled_size(kContextWidth);
  const int d_p = static_cast<int>(basis.basis.rows());

  AdamState context_state = AdamState::zeros_like(gen.context_net);
  AdamState trunk_state = AdamState::zeros_like(gen.trunk);
  Rng rng(seed);
  TrainCurve curve;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_order(data.size(), rng);
    double epoch_loss = 0.0;
    long steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch));
      const int b = static_cast<int>(stop - start);

      PoolCache context_cache;
      const Vector context = pool_mean_max(gen.context_net, triples, &context_cache);

      Matrix trunk_in(d_p + context_dim, b);
      for (int i = 0; i < b; ++i) {
        trunk_in.col(i).head(d_p) = data[order[start + static_cast<std::size_t>(i)]].coords;
        trunk_in.col(i).tail(context_dim) = context;
      }
      ForwardCache trunk_cache;
      const Matrix out = nn_forward(gen.trunk, trunk_in, &trunk_cache);

      Matrix dout = Matrix::Zero(out.rows(), b);
      double batch_loss = 0.0;
      for (int i = 0; i < b; ++i) {
        const auto& sample = data[order[start + static_cast<std::size_t>(i)]];
        const auto generated = parse_generator_output(out.col(i), gen.g, gen.d_s);

        // LAP term with the matching held fixed for the gradient
        const auto lap = lap_loss(generated, sample.target);
        batch_loss += lap.loss;
        for (int c = 0; c < gen.g; ++c) {
          const auto& tgt = sample.target[static_cast<std::size_t>(lap.matching[static_cast<std::size_t>(c)])];
          const auto& est = generated[static_cast<std::size_t>(c)];
          auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
          dout(c, i) += sign(est.weight - tgt.weight);
          for (int d = 0; d < gen.d_s; ++d) {
            dout(gen.g + c * gen.d_s + d, i) += sign(est.mean[d] - tgt.mean[d]);
            dout(gen.g + gen.g * gen.d_s + c * gen.d_s + d, i) +=
                sign(est.cov_diag[d] - tgt.cov_diag[d]);
          }
        }

        // divergence bound against the sample's own signal Gaussian
        if (hyper.lambda_div > 0.0) {
          const Vector var_s = sample.signal.sigma.array().square();
          for (int c = 0; c < gen.g; ++c) {
            const auto& est = generated[static_cast<std::size_t>(c)];
            const auto jg = jeffrey_wrt_component(sample.signal.mu, var_s, est.mean, est.cov_diag);
            batch_loss += hyper.lambda_div * est.weight * jg.value;
            dout(c, i) += hyper.lambda_div * jg.value;
            dout.col(i).segment(gen.g + c * gen.d_s, gen.d_s) +=
                hyper.lambda_div * est.weight * jg.dmean;
            dout.col(i).segment(gen.g + gen.g * gen.d_s + c * gen.d_s, gen.d_s) +=
                hyper.lambda_div * est.weight * jg.dvar;
          }
        }
      }
      dout /= static_cast<double>(b);
      epoch_loss += batch_loss / static_cast<double>(b);
      steps += 1;

      Gradients trunk_grads = Gradients::zeros_like(gen.trunk);
      const Matrix din = nn_backward(gen.trunk, trunk_cache, dout, trunk_grads);
      Vector dcontext = Vector::Zero(context_dim);
      for (int i = 0; i < b; ++i) dcontext += din.col(i).tail(context_dim);
      Gradients context_grads = Gradients::zeros_like(gen.context_net);
      pool_backward(gen.context_net, context_cache, dcontext, context_grads);

      adam_step(gen.trunk, trunk_grads, trunk_state, lr);
      adam_step(gen.context_net, context_grads, context_state, lr);
    }
    curve.loss_per_epoch.push_back(epoch_loss / static_cast<double>(std::max(1L, steps)));
  }
  return curve;
}

GaussianMixture generate_latent_distribution(const Vector& pose_latent_mu, const PoseBasis& basis,
                                             const DistributionGenerator& gen) {
  const Vector coords = decompose_pose(pose_latent_mu, basis);
  const Matrix triples = basis_triples_matrix(basis, gen.d_s);
  const Vector context = pool_mean_max(gen.context_net, triples, nullptr);
  Vector trunk_in(coords.size() + context.size());
  trunk_in << coords, context;
  const Vector out = nn_forward(gen.trunk, trunk_in).col(0);
  GaussianMixture mixture = from_triples(parse_generator_output(out, gen.g, gen.d_s));
  mixture.validate();
  return mixture;
}

// ---- surrogate refiner ----

namespace {

int refiner_stage1_input(const SurrogateRefiner& r) {
  switch (r.mode) {
    case RefinerMode::PoseOnly: return r.d_p;
    case RefinerMode::PoseDivergence: return r.d_p + pooled_size(kDivergenceWidth);
    case RefinerMode::PoseDivergenceSignal: return r.d_p + pooled_size(kDivergenceWidth) + r.d_s;
  }
  throw ValidationError("unknown refiner mode");
}

Vector scaled_divergence(const SurrogateRefiner& r, const Vector& terms) {
  return (terms.array() / r.divergence_scale).log1p().matrix();
}

}  // namespace

SurrogateRefiner init_refiner(const LatentHyperparams& hyper, int g, RefinerMode mode,
                              std::uint64_t seed) {
  SurrogateRefiner r;
  r.mode = mode;
  r.d_p = hyper.d_p;
  r.d_s = hyper.d_s;
  r.g = g;
  r.divergence_net = Network::init(NetworkSpec::dense({1, 8, kDivergenceWidth}, Activation::Tanh),
                                   seed);
  r.stage1 = Network::init(
      NetworkSpec::dense({refiner_stage1_input(r), 64, hyper.d_p}, Activation::Tanh), seed + 1);
  r.fusion = Network::init(NetworkSpec::dense({2 * hyper.d_p, 64, hyper.d_p}, Activation::Tanh),
                           seed + 2);
  return r;
}

TrainCurve train_refiner(SurrogateRefiner& refiner, std::span<const RefinerSample> data,
                         const LatentHyperparams& hyper, std::uint64_t seed, int epochs, double lr,
                         int batch) {
  if (data.empty()) throw ValidationError("train_refiner: no data");
  for (const auto& s : data) {
    if (s.divergence.size() != refiner.g) {
      throw ValidationError("train_refiner: divergence term count != G");
    }
  }

  // overflow guard: scale is the median per-component term over the data
  {
    std::vector<double> terms;
    for (const auto& s : data) {
      for (int i = 0; i < s.divergence.size(); ++i) terms.push_back(s.divergence[i]);
    }
    std::nth_element(terms.begin(), terms.begin() + static_cast<std::ptrdiff_t>(terms.size() / 2),
                     terms.end());
    const double median = terms[terms.size() / 2];
    refiner.divergence_scale = median > 1e-12 ? median : 1.0;
  }

  const int in1 = refiner_stage1_input(refiner);
  AdamState div_state = AdamState::zeros_like(refiner.divergence_net);
  AdamState s1_state = AdamState::zeros_like(refiner.stage1);
  AdamState fu_state = AdamState::zeros_like(refiner.fusion);
  Rng rng(seed);
  TrainCurve curve;
  const bool use_div = refiner.mode != RefinerMode::PoseOnly;
  const bool use_signal = refiner.mode == RefinerMode::PoseDivergenceSignal;
  const int div_dim = pooled_size(kDivergenceWidth);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_order(data.size(), rng);
    double epoch_loss = 0.0;
    long steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch));
      const int b = static_cast<int>(stop - start);

      Matrix s1_in(in1, b);
      Matrix gt(refiner.d_p, b);
      std::vector<PoolCache> div_caches(static_cast<std::size_t>(b));
      for (int i = 0; i < b; ++i) {
        const auto& sample = data[order[start + static_cast<std::size_t>(i)]];
        gt.col(i) = sample.pose_gt_mu;
        s1_in.col(i).head(refiner.d_p) = sample.pose_pred_mu;
        int offset = refiner.d_p;
        if (use_div) {
          const Vector scaled = scaled_divergence(refiner, sample.divergence);
          Matrix elements(1, refiner.g);
          elements.row(0) = scaled.transpose();
          s1_in.col(i).segment(offset, div_dim) = pool_mean_max(
              refiner.divergence_net, elements, &div_caches[static_cast<std::size_t>(i)]);
          offset += div_dim;
        }
        if (use_signal) s1_in.col(i).segment(offset, refiner.d_s) = sample.signal.mu;
      }

      ForwardCache s1_cache;
      const Matrix inter = nn_forward(refiner.stage1, s1_in, &s1_cache);
      Matrix fu_in(2 * refiner.d_p, b);
      fu_in.topRows(refiner.d_p) = inter;
      for (int i = 0; i < b; ++i) {
        fu_in.col(i).tail(refiner.d_p) =
            data[order[start + static_cast<std::size_t>(i)]].pose_pred_mu;
      }
      ForwardCache fu_cache;
      const Matrix refined = nn_forward(refiner.fusion, fu_in, &fu_cache);

      const auto final_loss = loss_huber(refined, gt, hyper.huber_delta);
      const auto inter_loss = loss_huber(inter, gt, hyper.huber_delta);
      epoch_loss += final_loss.value + hyper.lambda_inter * inter_loss.value;
      steps += 1;

      Gradients fu_grads = Gradients::zeros_like(refiner.fusion);
      const Matrix dfu_in = nn_backward(refiner.fusion, fu_cache, final_loss.grad, fu_grads);
      const Matrix dinter = dfu_in.topRows(refiner.d_p) + hyper.lambda_inter * inter_loss.grad;

      Gradients s1_grads = Gradients::zeros_like(refiner.stage1);
      const Matrix ds1_in = nn_backward(refiner.stage1, s1_cache, dinter, s1_grads);
      Gradients div_grads = Gradients::zeros_like(refiner.divergence_net);
      if (use_div) {
        for (int i = 0; i < b; ++i) {
          pool_backward(refiner.divergence_net, div_caches[static_cast<std::size_t>(i)],
                        ds1_in.col(i).segment(refiner.d_p, div_dim), div_grads);
        }
      }

      adam_step(refiner.fusion, fu_grads, fu_state, lr);
      adam_step(refiner.stage1, s1_grads, s1_state, lr);
      if (use_div) adam_step(refiner.divergence_net, div_grads, div_state, lr);
    }
    curve.loss_per_epoch.push_back(epoch_loss / static_cast<double>(std::max(1L, steps)));
  }
  return curve;
}

Vector construct_surrogate(const SurrogateRefiner& refiner, const LatentSignal& signal,
                           const Vector& divergence_terms, const Vector& pose_pred_mu) {
  if (divergence_terms.size() != refiner.g) {
    throw ValidationError("construct_surrogate: divergence term count != G");
  }
  Vector s1_in(refiner_stage1_input(refiner));
  s1_in.head(refiner.d_p) = pose_pred_mu;
  int offset = refiner.d_p;
  if (refiner.mode != RefinerMode::PoseOnly) {
    const Vector scaled = scaled_divergence(refiner, divergence_terms);
    Matrix elements(1, refiner.g);
    elements.row(0) = scaled.transpose();
    s1_in.segment(offset, pooled_size(kDivergenceWidth)) =
        pool_mean_max(refiner.divergence_net, elements, nullptr);
    offset += pooled_size(kDivergenceWidth);
  }
  if (refiner.mode == RefinerMode::PoseDivergenceSignal) {
    s1_in.segment(offset, refiner.d_s) = signal.mu;
  }
  const Vector inter = nn_forward(refiner.stage1, s1_in).col(0);
  Vector fu_in(2 * refiner.d_p);
  fu_in << inter, pose_pred_mu;
  return nn_forward(refiner.fusion, fu_in).col(0);
}

// ---- descriptor head ----

namespace {
int head_input_dim(const DescriptorHead& h) {
  switch (h.inputs) {
    case DescriptorInputs::PoseOnly: return h.d_p;
    case DescriptorInputs::PoseSignal: return h.d_p + h.frame_dim;
    case DescriptorInputs::PoseSignalRefined: return 2 * h.d_p + h.frame_dim;
  }
  throw ValidationError("unknown descriptor input mode");
}

Vector head_input(const DescriptorHead& h, const Vector& pose_pred_mu, const Vector& refined_mu,
                  const Vector& frame_feat) {
  Vector in(head_input_dim(h));
  in.head(h.d_p) = pose_pred_mu;
  if (h.inputs == DescriptorInputs::PoseSignal) {
    in.tail(h.frame_dim) = frame_feat;
  } else if (h.inputs == DescriptorInputs::PoseSignalRefined) {
    in.segment(h.d_p, h.d_p) = refined_mu;
    in.tail(h.frame_dim) = frame_feat;
  }
  return in;
}

constexpr int kBottleneck = 24;
}  // namespace

DescriptorHead init_descriptor_head(const LatentHyperparams& hyper, int frame_dim,
                                    DescriptorInputs inputs, std::uint64_t seed) {
  DescriptorHead head;
  head.inputs = inputs;
  head.d_p = hyper.d_p;
  head.frame_dim = frame_dim;
  const int in = head_input_dim(head);
  head.trunk = Network::init(NetworkSpec::dense({in, 64, kBottleneck}, Activation::Relu), seed);
  NetworkSpec branch;
  branch.layer_sizes = {kBottleneck + in, 48, kJointCount};
  branch.activations = {Activation::Relu, Activation::Sigmoid};
  head.xi_branch = Network::init(branch, seed + 1);
  head.kappa_branch = Network::init(branch, seed + 2);
  return head;
}

TrainCurve train_descriptor_head(DescriptorHead& head, std::span<const DescriptorSample> data,
                                 std::uint64_t seed, int epochs, double lr, int batch) {
  if (data.empty()) throw ValidationError("train_descriptor_head: no data");
  const int in = head_input_dim(head);
  AdamState trunk_state = AdamState::zeros_like(head.trunk);
  AdamState xi_state = AdamState::zeros_like(head.xi_branch);
  AdamState kappa_state = AdamState::zeros_like(head.kappa_branch);
  Rng rng(seed);
  TrainCurve curve;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_order(data.size(), rng);
    double epoch_loss = 0.0;
    long steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch));
      const int b = static_cast<int>(stop - start);

      Matrix input(in, b);
      Matrix xi_t(kJointCount, b), kappa_t(kJointCount, b);
      for (int i = 0; i < b; ++i) {
        const auto& s = data[order[start + static_cast<std::size_t>(i)]];
        input.col(i) = head_input(head, s.pose_pred_mu, s.refined_mu, s.frame_feature);
        xi_t.col(i) = s.xi_target;
        kappa_t.col(i) = s.kappa_target;
      }

      ForwardCache trunk_cache;
      const Matrix bottleneck = nn_forward(head.trunk, input, &trunk_cache);
      Matrix branch_in(kBottleneck + in, b);
      branch_in.topRows(kBottleneck) = bottleneck;
      branch_in.bottomRows(in) = input;

      ForwardCache xi_cache, kappa_cache;
      const Matrix xi = nn_forward(head.xi_branch, branch_in, &xi_cache);
      const Matrix kappa = nn_forward(head.kappa_branch, branch_in, &kappa_cache);

      const auto xi_loss = loss_mse(xi, xi_t);
      const auto kappa_loss = loss_mse(kappa, kappa_t);
      epoch_loss += xi_loss.value + kappa_loss.value;
      steps += 1;

      Gradients xi_grads = Gradients::zeros_like(head.xi_branch);
      Gradients kappa_grads = Gradients::zeros_like(head.kappa_branch);
      const Matrix dxi_in = nn_backward(head.xi_branch, xi_cache, xi_loss.grad, xi_grads);
      const Matrix dkappa_in =
          nn_backward(head.kappa_branch, kappa_cache, kappa_loss.grad, kappa_grads);
      const Matrix dbottleneck = dxi_in.topRows(kBottleneck) + dkappa_in.topRows(kBottleneck);

      Gradients trunk_grads = Gradients::zeros_like(head.trunk);
      nn_backward(head.trunk, trunk_cache, dbottleneck, trunk_grads);

      adam_step(head.xi_branch, xi_grads, xi_state, lr);
      adam_step(head.kappa_branch, kappa_grads, kappa_state, lr);
      adam_step(head.trunk, trunk_grads, trunk_state, lr);
    }
    curve.loss_per_epoch.push_back(epoch_loss / static_cast<double>(std::max(1L, steps)));
  }
  return curve;
}

std::vector<JointDescriptor> estimate_descriptors(const DescriptorHead& head,
                                                  const Vector& pose_pred_mu,
                                                  const Vector& refined_mu,
                                                  const Vector& frame_feat) {
  const Vector input = head_input(head, pose_pred_mu, refined_mu, frame_feat);
  const Vector bottleneck = nn_forward(head.trunk, input).col(0);
  Vector branch_in(bottleneck.size() + input.size());
  branch_in << bottleneck, input;
  const Vector xi = nn_forward(head.xi_branch, branch_in).col(0);
  const Vector kappa = nn_forward(head.kappa_branch, branch_in).col(0);
  std::vector<JointDescriptor> out;
  for (int j = 0; j < kJointCount; ++j) out.push_back({xi[j], kappa[j]});
  return out;
}

}  // namespace mmjoints
