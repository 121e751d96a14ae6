#pragma once

#include "mmjoints/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mmjoints {

enum class Activation { Identity, Relu, Tanh, Sigmoid };
enum class HeadTransform { None, Softmax, Softplus };

Activation activation_from_string(const std::string& name);
const char* activation_name(Activation a);
HeadTransform head_from_string(const std::string& name);
const char* head_name(HeadTransform h);

/// One constrained segment of the output layer. Softmax yields a simplex
/// (mixture weights), Softplus a strictly positive vector (variances).
struct Head {
  HeadTransform transform = HeadTransform::None;
  int size = 0;
};

struct NetworkSpec {
  std::vector<int> layer_sizes;          // [in, h1, ..., out], at least 2
  std::vector<Activation> activations;   // one per layer transition
  std::vector<Head> heads;               // partition of the output; empty = single None head

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(layer_sizes.size()) - 1; }
  void validate() const;

  /// Dense stack with the given activation on hidden layers and identity output.
  static NetworkSpec dense(std::vector<int> sizes, Activation hidden = Activation::Relu,
                           std::vector<Head> heads = {});
};

/// Dense network with explicit parameters. Initialization is seeded uniform
/// fan-in scaling so runs are reproducible bit-for-bit.
struct Network {
  NetworkSpec spec;
  std::vector<Matrix> weights;  // per layer, out x in
  std::vector<Vector> biases;   // per layer

  static Network init(NetworkSpec spec, std::uint64_t seed);
};

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // post-activation per layer
  Matrix output;             // after head transforms
};

/// Columns are batch samples. Fills `cache` when given (required for backward).
Matrix nn_forward(const Network& net, const Matrix& input, ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<Matrix> dw;
  std::vector<Vector> db;

  static Gradients zeros_like(const Network& net);
  void scale(double s);
};

/// Backpropagates `doutput` (gradient w.r.t. the head output) through the
/// cached forward pass. Accumulates into `grads` and returns the gradient
/// w.r.t. the network input.
Matrix nn_backward(const Network& net, const ForwardCache& cache, const Matrix& doutput,
                   Gradients& grads);

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<Vector> mb, vb;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState zeros_like(const Network& net);
};

/// Standard Adam update with bias correction.
void adam_step(Network& net, const Gradients& grads, AdamState& state, double lr);

// ---- losses: value plus gradient w.r.t. the predictions ----

struct LossGrad {
  double value = 0.0;
  Matrix grad;
};

/// Mean over all entries of the squared difference.
LossGrad loss_mse(const Matrix& pred, const Matrix& target);

/// Per-element Huber with threshold delta, mean over entries.
LossGrad loss_huber(const Matrix& pred, const Matrix& target, double delta = 1.0);

struct KlLossGrad {
  double value = 0.0;
  Matrix dmu;
  Matrix dsigma;
};

/// KL(N(mu, diag(sigma)^2) || N(0, I)) summed over dimensions, mean over the
/// batch columns.
KlLossGrad loss_kl_standard_normal(const Matrix& mu, const Matrix& sigma);

/// Softmax cross-entropy, mean over batch columns.
LossGrad loss_cross_entropy(const Matrix& logits, const std::vector<int>& labels);

/// In-batch semi-hard triplet loss on squared Euclidean distances: one triple
/// per usable anchor (hardest positive, smallest negative distance beyond it,
/// hardest negative as fallback), hinged at `margin`, mean over anchors.
LossGrad loss_triplet(const Matrix& features, const std::vector<int>& labels,
                      double margin = 0.2);

struct OplLoss {
  double value = 0.0;       // inter + lambda_s * intra
  double inter_term = 0.0;  // mean |cos| across classes
  double intra_term = 0.0;  // 1 - mean cos within classes
  Matrix grad;
};

/// Orthogonal projection loss on l2-normalized batch features. Requires at
/// least two classes in the batch.
OplLoss loss_opl(const Matrix& features, const std::vector<int>& labels, double lambda_s);

// ---- permutation-invariant set pooling ----

struct PoolCache {
  ForwardCache element_cache;
  Matrix element_out;        // f x n
  std::vector<int> argmax;   // per feature row, n == 0 leaves it empty
  int count = 0;
};

/// Pooled feature width for an element net with `f` outputs: mean block, max
/// block, and a log1p element-count channel (mean/max alone cannot represent
/// unnormalized sums such as total signal mass).
constexpr int pooled_size(int f) { return 2 * f + 1; }

/// Shared per-element net, then [mean; max; log1p(count)] over elements.
/// Empty sets pool to the zero vector, keeping empty radar frames legal.
Vector pool_mean_max(const Network& element_net, const Matrix& elements, PoolCache* cache);

/// Backward through the pooling; accumulates element-net gradients.
void pool_backward(const Network& element_net, const PoolCache& cache, const Vector& dpooled,
                   Gradients& element_grads);

}  // namespace mmjoints
