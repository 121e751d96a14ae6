#pragma once

#include "mmjoints/em.hpp"
#include "mmjoints/gaussian.hpp"
#include "mmjoints/nn.hpp"
#include "mmjoints/simulator.hpp"
#include "mmjoints/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace mmjoints {

struct LatentHyperparams {
  int d_p = 8;        // pose latent dimension
  int d_s = 16;       // signal latent dimension
  int k_frames = 5;   // frames per signal window (half a second at 10 fps)
  int c_max = 24;     // cluster-count search ceiling
  int m_max = 16;     // neighbor cap for empirical distributions
  int g_max = 4;      // mixture-size ceiling
  int samples_per_neighbor = 64;
  double lambda_step2 = 1e-2;  // VAE KL weight
  double lambda_step3 = 0.5;   // intra-class OPL weight
  double lambda0 = 1.0;        // triplet
  double lambda1 = 1.0;        // cross-entropy
  double lambda2 = 1e-2;       // signal KL
  double lambda_div = 1e-2;    // divergence term in generator training
  double lambda_inter = 0.1;   // intermediate Huber regularizer
  double triplet_margin = 0.2;
  double huber_delta = 1.0;

  int d_c() const { return 1 + 2 * d_s; }
  void validate() const;

  static LatentHyperparams desk();
  static LatentHyperparams paper_scale();  // D_p=32, D_S=64 preset
};

struct LatentPose {
  Vector mu;     // d_p
  Vector sigma;  // d_p, > 0
};

struct LatentSignal {
  Vector mu;     // d_s
  Vector sigma;  // d_s, > 0
};

// ---- pose modeling ----

/// Standardization constants shared by the pose encoder/decoder.
struct PoseNormalizer {
  Vector mean;
  Vector std;

  Vector normalize(const Vector& flat) const { return (flat - mean).cwiseQuotient(std); }
  Vector denormalize(const Vector& z) const { return z.cwiseProduct(std) + mean; }
};

struct PoseVae {
  Network encoder;  // 3J -> [mu (none) | sigma (softplus)]
  Network decoder;  // d_p -> 3J
  PoseNormalizer normalizer;
  int d_p = 0;
};

struct PoseClusters {
  GaussianMixture model;    // over flattened poses
  std::vector<int> labels;  // argmax responsibility per input pose
  int count = 0;
};

/// GMM clustering of flattened training poses; the cluster count is
/// BIC-selected in [d_p, c_max].
PoseClusters cluster_poses(const Matrix& poses_flat, const LatentHyperparams& hyper,
                           const FitConfig& fit);

/// Most responsible mixture component for a point.
int assign_cluster(const GaussianMixture& model, const Vector& x);

/// Top-d_p clusters by (centroid distance to the mean pose) x (cluster size);
/// exact ties go to the smaller cluster id.
std::vector<int> select_basis_clusters(const PoseClusters& clusters, const Vector& mean_pose_flat,
                                       int d_p);

struct TrainCurve {
  std::vector<double> loss_per_epoch;
  double initial() const { return loss_per_epoch.front(); }
  double final_loss() const { return loss_per_epoch.back(); }
};

/// Reconstruction + KL objective with reparameterized sampling.
PoseVae train_pose_vae(const Matrix& poses_flat, const LatentHyperparams& hyper,
                       std::uint64_t seed, int epochs = 40, double lr = 1e-3,
                       TrainCurve* curve = nullptr);

LatentPose encode_pose(const PoseVae& vae, const Vector& pose_flat);
Vector decode_pose(const PoseVae& vae, const Vector& latent);

/// Orthogonality fine-tuning of the encoder mean features over labeled poses.
TrainCurve fine_tune_opl(PoseVae& vae, const Matrix& poses_flat, const std::vector<int>& labels,
                         const LatentHyperparams& hyper, std::uint64_t seed, int epochs = 30,
                         double lr = 5e-4);

// ---- pose basis ----

struct PoseBasis {
  Matrix basis;    // d_p x d_p, orthonormal columns
  Matrix inverse;  // cached basis^-1
  std::vector<GaussianMixture> empirical;  // one per basis column, over signal space
  std::vector<int> cluster_ids;            // source cluster per column
  int d_c = 0;

  void validate() const;
  double max_pairwise_cosine() const;
};

/// Normalized cluster-mean features, Gram-Schmidt corrected to orthonormal
/// columns. Throws on rank deficiency.
Matrix orthonormal_basis_from_means(const std::vector<Vector>& cluster_mean_features);

Vector decompose_pose(const Vector& latent, const PoseBasis& basis);

// ---- signal modeling ----

struct SignalEncoder {
  Network point_net;  // per-point 5 -> frame feature
  Network trunk;      // concat of K pooled frame features -> [mu | sigma | logits]
  int k_frames = 0;
  int d_s = 0;
  int n_classes = 0;

  int frame_feature_dim() const { return pooled_size(point_net.spec.output_size()); }
};

LatentSignal encode_window(const SignalEncoder& enc, std::span<const PointCloudFrame> window);

/// Pooled per-frame feature (signal trunk input segment for one frame);
/// reused frozen by the descriptor head.
Vector frame_feature(const SignalEncoder& enc, const PointCloudFrame& frame);

struct LabeledWindow {
  std::vector<PointCloudFrame> frames;
  int label = 0;  // pose-cluster id
};

/// Triplet + cross-entropy + KL objective over labeled signal windows.
SignalEncoder train_signal_encoder(std::span<const LabeledWindow> windows, int n_classes,
                                   const LatentHyperparams& hyper, std::uint64_t seed,
                                   int epochs = 40, double lr = 1e-3, int batch = 32,
                                   TrainCurve* curve = nullptr);

// ---- empirical signal distributions ----

/// One corpus entry: a pose's latent code plus its window's signal feature.
struct CorpusEntry {
  LatentPose pose;
  LatentSignal signal;
};

/// Signal mixture for a query pose from its latent-space neighbors: nearest
/// corpus entries by mu distance (capped at m_max and at ||sigma/2||), then a
/// seeded GMM fit on draws from the neighbors' signal Gaussians. Falls back
/// to the query's own component when the radius excludes everyone.
/// `fixed_g` pads/fits to a fixed component count; 0 selects G by BIC.
GaussianMixture build_empirical_distribution(const CorpusEntry& query,
                                             std::span<const CorpusEntry> corpus,
                                             const LatentHyperparams& hyper, const FitConfig& fit,
                                             int fixed_g = 0);

/// Pads a mixture to `g` components with zero-weight copies of the last one.
GaussianMixture pad_mixture(const GaussianMixture& mixture, int g);

// ---- latent signal distribution generator ----

struct DistributionGenerator {
  Network context_net;  // shared per-triple net over the basis empirical components
  Network trunk;        // [basis coordinates | pooled context] -> [phi | mu | var]
  int d_s = 0;
  int g = 0;
};

struct GeneratorSample {
  Vector coords;                        // basis coordinates of the pose latent
  std::vector<ComponentTriple> target;  // empirical mixture, padded to G
  LatentSignal signal;                  // current window's signal feature
};

DistributionGenerator init_generator(const PoseBasis& basis, const LatentHyperparams& hyper, int g,
                                     std::uint64_t seed);

/// LAP matching loss plus the weighted divergence bound against the sample's
/// own signal Gaussian.
TrainCurve train_distribution_generator(DistributionGenerator& gen, const PoseBasis& basis,
                                        std::span<const GeneratorSample> data,
                                        const LatentHyperparams& hyper, std::uint64_t seed,
                                        int epochs = 30, double lr = 1e-3, int batch = 32);

GaussianMixture generate_latent_distribution(const Vector& pose_latent_mu, const PoseBasis& basis,
                                             const DistributionGenerator& gen);

// ---- surrogate pose ----

enum class RefinerMode {
  PoseOnly = 0,          // pre-trained feature only
  PoseDivergence = 1,    // + divergence feature
  PoseDivergenceSignal = 2,  // + signal anchor (full)
};

struct SurrogateRefiner {
  Network divergence_net;  // shared per-divergence-term net, pooled
  Network stage1;          // inputs -> intermediate pose feature
  Network fusion;          // [intermediate | pose feature] -> refined pose feature
  RefinerMode mode = RefinerMode::PoseDivergenceSignal;
  double divergence_scale = 1.0;  // s in log(1 + x / s)
  int d_p = 0;
  int d_s = 0;
  int g = 0;
};

struct RefinerSample {
  Vector pose_pred_mu;   // latent of the black-box output
  Vector pose_gt_mu;     // latent of the ground-truth pose
  LatentSignal signal;   // current window's signal feature
  Vector divergence;     // per-component bound terms for the generated mixture
};

SurrogateRefiner init_refiner(const LatentHyperparams& hyper, int g, RefinerMode mode,
                              std::uint64_t seed);

/// Huber objective on the refined feature with an intermediate-feature
/// regularizer. divergence_scale is set to the median per-component term
/// over the data before training.
TrainCurve train_refiner(SurrogateRefiner& refiner, std::span<const RefinerSample> data,
                         const LatentHyperparams& hyper, std::uint64_t seed, int epochs = 40,
                         double lr = 1e-3, int batch = 32);

Vector construct_surrogate(const SurrogateRefiner& refiner, const LatentSignal& signal,
                           const Vector& divergence_terms, const Vector& pose_pred_mu);

// ---- descriptor estimation head ----

enum class DescriptorInputs {
  PoseOnly = 0,        // p_pred feature
  PoseSignal = 1,      // + frame feature
  PoseSignalRefined = 2,  // + surrogate feature (full)
};

/// Two linear-layer branches shaped wide-narrow-wide with a skip from the
/// shared input; sigmoid heads keep every output inside the descriptor bounds.
struct DescriptorHead {
  Network trunk;      // shared input -> bottleneck
  Network xi_branch;  // [bottleneck | input] -> J sigmoids
  Network kappa_branch;
  DescriptorInputs inputs = DescriptorInputs::PoseSignalRefined;
  int d_p = 0;
  int frame_dim = 0;
};

struct DescriptorSample {
  Vector pose_pred_mu;
  Vector refined_mu;
  Vector frame_feature;
  Vector xi_target;     // J ground-truth sensing scores
  Vector kappa_target;  // J ground-truth reliability scores
};

DescriptorHead init_descriptor_head(const LatentHyperparams& hyper, int frame_dim,
                                    DescriptorInputs inputs, std::uint64_t seed);

/// Summed MSE over both branches.
TrainCurve train_descriptor_head(DescriptorHead& head, std::span<const DescriptorSample> data,
                                 std::uint64_t seed, int epochs = 60, double lr = 1e-3,
                                 int batch = 32);

std::vector<JointDescriptor> estimate_descriptors(const DescriptorHead& head,
                                                  const Vector& pose_pred_mu,
                                                  const Vector& refined_mu,
                                                  const Vector& frame_feature);

}  // namespace mmjoints
