#include "mmjoints/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mmjoints {

namespace {
constexpr double kSoftplusFloor = 1e-9;

Matrix apply_activation(const Matrix& z, Activation a) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh();
    case Activation::Sigmoid: return z.unaryExpr([](double v) { return sigmoid(v); });
  }
  throw ValidationError("unknown activation");
}

Matrix activation_grad(const Matrix& pre, const Matrix& post, const Matrix& dpost, Activation a) {
  switch (a) {
    case Activation::Identity: return dpost;
    case Activation::Relu:
      return (pre.array() > 0.0).select(dpost, Matrix::Zero(dpost.rows(), dpost.cols()));
    case Activation::Tanh: return dpost.array() * (1.0 - post.array().square());
    case Activation::Sigmoid: return dpost.array() * post.array() * (1.0 - post.array());
  }
  throw ValidationError("unknown activation");
}
}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw ValidationError("unknown activation: " + name);
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  throw ValidationError("unknown activation");
}

HeadTransform head_from_string(const std::string& name) {
  if (name == "none") return HeadTransform::None;
  if (name == "softmax") return HeadTransform::Softmax;
  if (name == "softplus") return HeadTransform::Softplus;
  throw ValidationError("unknown head transform: " + name);
}

const char* head_name(HeadTransform h) {
  switch (h) {
    case HeadTransform::None: return "none";
    case HeadTransform::Softmax: return "softmax";
    case HeadTransform::Softplus: return "softplus";
  }
  throw ValidationError("unknown head transform");
}

void NetworkSpec::validate() const {
  if (layer_sizes.size() < 2) throw ValidationError("NetworkSpec: need at least one layer");
  for (int s : layer_sizes) {
    if (s < 1) throw ValidationError("NetworkSpec: layer sizes must be positive");
  }
  if (activations.size() != layer_sizes.size() - 1) {
    throw ValidationError("NetworkSpec: one activation per layer transition required");
  }
  if (!heads.empty()) {
    int total = 0;
    for (const auto& h : heads) {
      if (h.size < 1) throw ValidationError("NetworkSpec: head sizes must be positive");
      total += h.size;
    }
    if (total != output_size()) {
      throw ValidationError("NetworkSpec: heads must partition the output layer");
    }
  }
}

NetworkSpec NetworkSpec::dense(std::vector<int> sizes, Activation hidden, std::vector<Head> heads) {
  NetworkSpec spec;
  spec.layer_sizes = std::move(sizes);
  spec.activations.assign(spec.layer_sizes.size() - 1, hidden);
  spec.activations.back() = Activation::Identity;
  spec.heads = std::move(heads);
  spec.validate();
  return spec;
}

Network Network::init(NetworkSpec spec, std::uint64_t seed) {
  spec.validate();
  Network net;
  net.spec = std::move(spec);
  Rng rng(seed);
  for (int l = 0; l < net.spec.layer_count(); ++l) {
    const int in = net.spec.layer_sizes[static_cast<std::size_t>(l)];
    const int out = net.spec.layer_sizes[static_cast<std::size_t>(l) + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Matrix w(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-bound, bound);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vector::Zero(out));
  }
  return net;
}

Matrix nn_forward(const Network& net, const Matrix& input, ForwardCache* cache) {
  if (input.rows() != net.spec.input_size()) {
    throw ValidationError("nn_forward: input size mismatch");
  }
  Matrix a = input;
  if (cache) {
    cache->input = input;
    cache->pre.clear();
    cache->post.clear();
  }
  for (int l = 0; l < net.spec.layer_count(); ++l) {
    Matrix z = (net.weights[static_cast<std::size_t>(l)] * a).colwise() +
               net.biases[static_cast<std::size_t>(l)];
    a = apply_activation(z, net.spec.activations[static_cast<std::size_t>(l)]);
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(a);
    }
  }

  Matrix out = a;
  int offset = 0;
  for (const auto& h : net.spec.heads) {
    auto seg = out.middleRows(offset, h.size);
    switch (h.transform) {
      case HeadTransform::None:
        break;
      case HeadTransform::Softplus:
        seg = seg.unaryExpr([](double v) { return softplus(v) + kSoftplusFloor; });
        break;
      case HeadTransform::Softmax: {
        for (int c = 0; c < seg.cols(); ++c) {
          const double m = seg.col(c).maxCoeff();
          Vector e = (seg.col(c).array() - m).exp();
          seg.col(c) = e / e.sum();
        }
        break;
      }
    }
    offset += h.size;
  }
  if (cache) cache->output = out;
  return out;
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.dw.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.db.push_back(Vector::Zero(net.biases[l].size()));
  }
  return g;
}

void Gradients::scale(double s) {
  for (auto& m : dw) m *= s;
  for (auto& v : db) v *= s;
}

Matrix nn_backward(const Network& net, const ForwardCache& cache, const Matrix& doutput,
                   Gradients& grads) {
  if (cache.pre.empty()) throw ValidationError("nn_backward: forward cache missing");
  if (doutput.rows() != net.spec.output_size() || doutput.cols() != cache.output.cols()) {
    throw ValidationError("nn_backward: gradient shape mismatch");
  }

  // Undo head transforms first: gradients w.r.t. the final activation output.
  Matrix da = doutput;
  int offset = 0;
  for (const auto& h : net.spec.heads) {
    auto dseg = da.middleRows(offset, h.size);
    const auto yseg = cache.output.middleRows(offset, h.size);
    switch (h.transform) {
      case HeadTransform::None:
        break;
      case HeadTransform::Softplus: {
        const auto pre_seg = cache.post.back().middleRows(offset, h.size);
        dseg = dseg.array() * pre_seg.unaryExpr([](double v) { return sigmoid(v); }).array();
        break;
      }
      case HeadTransform::Softmax: {
        for (int c = 0; c < dseg.cols(); ++c) {
          const Vector y = yseg.col(c);
          const double dot = y.dot(dseg.col(c));
          dseg.col(c) = y.array() * (dseg.col(c).array() - dot);
        }
        break;
      }
    }
    offset += h.size;
  }

  for (int l = net.spec.layer_count() - 1; l >= 0; --l) {
    const Matrix& prev = (l == 0) ? cache.input : cache.post[static_cast<std::size_t>(l) - 1];
    const Matrix dz = activation_grad(cache.pre[static_cast<std::size_t>(l)],
                                      cache.post[static_cast<std::size_t>(l)], da,
                                      net.spec.activations[static_cast<std::size_t>(l)]);
    grads.dw[static_cast<std::size_t>(l)] += dz * prev.transpose();
    grads.db[static_cast<std::size_t>(l)] += dz.rowwise().sum();
    da = net.weights[static_cast<std::size_t>(l)].transpose() * dz;
  }
  return da;
}

AdamState AdamState::zeros_like(const Network& net) {
  AdamState s;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    s.mw.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.vw.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.mb.push_back(Vector::Zero(net.biases[l].size()));
    s.vb.push_back(Vector::Zero(net.biases[l].size()));
  }
  return s;
}

void adam_step(Network& net, const Gradients& grads, AdamState& state, double lr) {
  if (grads.dw.size() != net.weights.size()) throw ValidationError("adam_step: shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    state.mw[l] = state.beta1 * state.mw[l] + (1.0 - state.beta1) * grads.dw[l];
    state.vw[l] =
        state.beta2 * state.vw[l] + (1.0 - state.beta2) * grads.dw[l].array().square().matrix();
    net.weights[l].array() -= lr * (state.mw[l].array() / bc1) /
                              ((state.vw[l].array() / bc2).sqrt() + state.epsilon);

    state.mb[l] = state.beta1 * state.mb[l] + (1.0 - state.beta1) * grads.db[l];
    state.vb[l] =
        state.beta2 * state.vb[l] + (1.0 - state.beta2) * grads.db[l].array().square().matrix();
    net.biases[l].array() -= lr * (state.mb[l].array() / bc1) /
                             ((state.vb[l].array() / bc2).sqrt() + state.epsilon);
  }
}

LossGrad loss_mse(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ValidationError("loss_mse: shape mismatch");
  }
  const double n = static_cast<double>(pred.size());
  const Matrix diff = pred - target;
  return {diff.array().square().sum() / n, (2.0 / n) * diff};
}

LossGrad loss_huber(const Matrix& pred, const Matrix& target, double delta) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ValidationError("loss_huber: shape mismatch");
  }
  const double n = static_cast<double>(pred.size());
  const Matrix r = pred - target;
  double value = 0.0;
  Matrix grad(r.rows(), r.cols());
  for (int c = 0; c < r.cols(); ++c) {
    for (int i = 0; i < r.rows(); ++i) {
      const double v = r(i, c);
      if (std::abs(v) <= delta) {
        value += 0.5 * v * v;
        grad(i, c) = v / n;
      } else {
        value += delta * (std::abs(v) - 0.5 * delta);
        grad(i, c) = delta * (v > 0.0 ? 1.0 : -1.0) / n;
      }
    }
  }
  return {value / n, std::move(grad)};
}

KlLossGrad loss_kl_standard_normal(const Matrix& mu, const Matrix& sigma) {
  if (mu.rows() != sigma.rows() || mu.cols() != sigma.cols()) {
    throw ValidationError("loss_kl_standard_normal: shape mismatch");
  }
  const double b = static_cast<double>(mu.cols());
  KlLossGrad out;
  out.value = 0.5 *
              (mu.array().square() + sigma.array().square() - 1.0 -
               2.0 * sigma.array().log())
                  .sum() /
              b;
  out.dmu = mu / b;
  out.dsigma = (sigma.array() - sigma.array().inverse()) / b;
  return out;
}

LossGrad loss_cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.cols()) {
    throw ValidationError("loss_cross_entropy: label count mismatch");
  }
  const double b = static_cast<double>(logits.cols());
  double value = 0.0;
  Matrix grad(logits.rows(), logits.cols());
  for (int c = 0; c < logits.cols(); ++c) {
    const int label = labels[static_cast<std::size_t>(c)];
    if (label < 0 || label >= logits.rows()) {
      throw ValidationError("loss_cross_entropy: label out of range");
    }
    const double m = logits.col(c).maxCoeff();
    const Vector e = (logits.col(c).array() - m).exp();
    const Vector p = e / e.sum();
    value -= std::log(std::max(p[label], 1e-300));
    grad.col(c) = p / b;
    grad(label, c) -= 1.0 / b;
  }
  return {value / b, std::move(grad)};
}

LossGrad loss_triplet(const Matrix& features, const std::vector<int>& labels, double margin) {
  const int b = static_cast<int>(features.cols());
  if (static_cast<int>(labels.size()) != b) {
    throw ValidationError("loss_triplet: label count mismatch");
  }
  Matrix d2(b, b);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) d2(i, j) = (features.col(i) - features.col(j)).squaredNorm();
  }

  double value = 0.0;
  int active = 0;
  Matrix grad = Matrix::Zero(features.rows(), b);
  struct Triple {
    int a, p, n;
  };
  std::vector<Triple> triples;
  for (int a = 0; a < b; ++a) {
    int pos = -1, neg = -1;
    double pos_d = -1.0;
    for (int j = 0; j < b; ++j) {
      if (j == a) continue;
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)]) {
        if (d2(a, j) > pos_d) {
          pos_d = d2(a, j);
          pos = j;
        }
      }
    }
    if (pos < 0) continue;
    // semi-hard: smallest negative distance beyond the positive one
    double semi_best = std::numeric_limits<double>::infinity();
    double hard_best = std::numeric_limits<double>::infinity();
    int hard = -1;
    for (int j = 0; j < b; ++j) {
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)]) continue;
      if (d2(a, j) < hard_best) {
        hard_best = d2(a, j);
        hard = j;
      }
      if (d2(a, j) > pos_d && d2(a, j) < semi_best) {
        semi_best = d2(a, j);
        neg = j;
      }
    }
    if (neg < 0) neg = hard;
    if (neg < 0) continue;
    triples.push_back({a, pos, neg});
  }
  if (triples.empty()) return {0.0, std::move(grad)};

  for (const auto& t : triples) {
    const double hinge = d2(t.a, t.p) - d2(t.a, t.n) + margin;
    if (hinge <= 0.0) continue;
    value += hinge;
    active += 1;
    // d(d_ap^2 - d_an^2)/d features
    grad.col(t.a) += 2.0 * (features.col(t.n) - features.col(t.p));
    grad.col(t.p) += 2.0 * (features.col(t.p) - features.col(t.a));
    grad.col(t.n) += 2.0 * (features.col(t.a) - features.col(t.n));
  }
  const double denom = static_cast<double>(triples.size());
  grad /= denom;
  return {value / denom, std::move(grad)};
}

OplLoss loss_opl(const Matrix& features, const std::vector<int>& labels, double lambda_s) {
  const int b = static_cast<int>(features.cols());
  if (static_cast<int>(labels.size()) != b) {
    throw ValidationError("loss_opl: label count mismatch");
  }
  const int distinct = [&] {
    std::vector<int> u(labels);
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return static_cast<int>(u.size());
  }();
  if (distinct < 2) throw ValidationError("loss_opl: batch must contain at least two classes");

  Matrix norms(1, b);
  Matrix unit(features.rows(), b);
  for (int i = 0; i < b; ++i) {
    const double n = std::max(features.col(i).norm(), 1e-12);
    norms(0, i) = n;
    unit.col(i) = features.col(i) / n;
  }
  const Matrix s = unit.transpose() * unit;

  long n_same = 0, n_diff = 0;
  for (int i = 0; i < b; ++i) {
    for (int j = i + 1; j < b; ++j) {
      (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? n_same
                                                                                  : n_diff) += 1;
    }
  }

  double same_sum = 0.0, diff_sum = 0.0;
  Matrix ds = Matrix::Zero(b, b);  // dL/dS over ordered pairs i<j
  for (int i = 0; i < b; ++i) {
    for (int j = i + 1; j < b; ++j) {
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        same_sum += s(i, j);
        ds(i, j) += -lambda_s / static_cast<double>(n_same);
      } else {
        diff_sum += std::abs(s(i, j));
        ds(i, j) += (s(i, j) >= 0.0 ? 1.0 : -1.0) / static_cast<double>(n_diff);
      }
    }
  }

  OplLoss out;
  out.intra_term = n_same > 0 ? 1.0 - same_sum / static_cast<double>(n_same) : 0.0;
  out.inter_term = diff_sum / static_cast<double>(n_diff);
  out.value = out.inter_term + lambda_s * out.intra_term;

  // d/d unit_i, then back through the normalization
  Matrix dunit = Matrix::Zero(features.rows(), b);
  for (int i = 0; i < b; ++i) {
    for (int j = i + 1; j < b; ++j) {
      if (ds(i, j) == 0.0) continue;
      dunit.col(i) += ds(i, j) * unit.col(j);
      dunit.col(j) += ds(i, j) * unit.col(i);
    }
  }
  out.grad.resize(features.rows(), b);
  for (int i = 0; i < b; ++i) {
    const Vector u = unit.col(i);
    out.grad.col(i) = (dunit.col(i) - u * u.dot(dunit.col(i))) / norms(0, i);
  }
  return out;
}

Vector pool_mean_max(const Network& element_net, const Matrix& elements, PoolCache* cache) {
  const int f = element_net.spec.output_size();
  const int n = static_cast<int>(elements.cols());
  if (cache) {
    cache->count = n;
    cache->argmax.clear();
  }
  if (n == 0) return Vector::Zero(pooled_size(f));

  Matrix out = nn_forward(element_net, elements, cache ? &cache->element_cache : nullptr);
  Vector pooled(pooled_size(f));
  pooled.head(f) = out.rowwise().mean();
  for (int r = 0; r < f; ++r) {
    int idx = 0;
    pooled[f + r] = out.row(r).maxCoeff(&idx);
    if (cache) cache->argmax.push_back(idx);
  }
  pooled[2 * f] = std::log1p(static_cast<double>(n));
  if (cache) cache->element_out = std::move(out);
  return pooled;
}

void pool_backward(const Network& element_net, const PoolCache& cache, const Vector& dpooled,
                   Gradients& element_grads) {
  if (cache.count == 0) return;
  const int f = element_net.spec.output_size();
  const int n = cache.count;
  Matrix dout = Matrix::Zero(f, n);
  for (int r = 0; r < f; ++r) {
    dout.row(r).array() += dpooled[r] / static_cast<double>(n);
    dout(r, cache.argmax[static_cast<std::size_t>(r)]) += dpooled[f + r];
  }
  nn_backward(element_net, cache.element_cache, dout, element_grads);
}

}  // namespace mmjoints
