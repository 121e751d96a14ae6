#include "mmjoints/nn.hpp"

#include "fd_check.hpp"

#include <doctest.h>

using namespace mmjoints;
using mmjoints::testing::fd_gradient;
using mmjoints::testing::gradients_match;
using mmjoints::testing::network_gradients_match;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(lo, hi);
  }
  return m;
}

}  // namespace

TEST_CASE("forward: identity single layer reproduces input") {
  auto spec = NetworkSpec::dense({3, 3});
  Network net = Network::init(spec, 0);
  net.weights[0] = Matrix::Identity(3, 3);
  net.biases[0].setZero();
  Rng rng(1);
  const Matrix x = random_matrix(rng, 3, 5);
  CHECK((nn_forward(net, x) - x).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("forward: zero weights and relu give zero output") {
  NetworkSpec spec;
  spec.layer_sizes = {4, 6, 2};
  spec.activations = {Activation::Relu, Activation::Relu};
  Network net = Network::init(spec, 3);
  for (auto& w : net.weights) w.setZero();
  for (auto& b : net.biases) b.setZero();
  Rng rng(2);
  const Matrix x = random_matrix(rng, 4, 3);
  CHECK(nn_forward(net, x).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("forward: deterministic per seed") {
  auto spec = NetworkSpec::dense({5, 8, 2}, Activation::Tanh);
  const Network a = Network::init(spec, 42);
  const Network b = Network::init(spec, 42);
  Rng rng(3);
  const Matrix x = random_matrix(rng, 5, 7);
  const Matrix ya = nn_forward(a, x);
  const Matrix yb = nn_forward(b, x);
  CHECK((ya - yb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("heads: softmax sums to one, softplus strictly positive") {
  NetworkSpec spec;
  spec.layer_sizes = {4, 10};
  spec.activations = {Activation::Identity};
  spec.heads = {{HeadTransform::Softmax, 4}, {HeadTransform::Softplus, 3}, {HeadTransform::None, 3}};
  const Network net = Network::init(spec, 7);
  Rng rng(4);
  const Matrix x = random_matrix(rng, 4, 20, -5.0, 5.0);
  const Matrix y = nn_forward(net, x);
  for (int c = 0; c < y.cols(); ++c) {
    CHECK(y.col(c).head(4).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(y.col(c).segment(4, 3).minCoeff() > 0.0);
  }
}

TEST_CASE("backward: missing cache throws") {
  auto spec = NetworkSpec::dense({2, 2});
  const Network net = Network::init(spec, 1);
  ForwardCache cache;
  Gradients g = Gradients::zeros_like(net);
  CHECK_THROWS_AS(nn_backward(net, cache, Matrix::Zero(2, 1), g), ValidationError);
}

TEST_CASE("backward: constant loss gives zero gradients") {
  auto spec = NetworkSpec::dense({3, 4, 2}, Activation::Tanh);
  const Network net = Network::init(spec, 5);
  Rng rng(6);
  ForwardCache cache;
  nn_forward(net, random_matrix(rng, 3, 4), &cache);
  Gradients g = Gradients::zeros_like(net);
  nn_backward(net, cache, Matrix::Zero(2, 4), g);
  for (const auto& dw : g.dw) CHECK(dw.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: 1-D linear net with squared loss matches hand calculus") {
  auto spec = NetworkSpec::dense({1, 1});
  Network net = Network::init(spec, 8);
  net.weights[0](0, 0) = 0.7;
  net.biases[0][0] = -0.2;
  const double x = 1.3, y = 0.4;
  Matrix input(1, 1);
  input << x;
  ForwardCache cache;
  const Matrix pred = nn_forward(net, input, &cache);
  const double residual = pred(0, 0) - y;
  Matrix dout(1, 1);
  dout << 2.0 * residual;
  Gradients g = Gradients::zeros_like(net);
  nn_backward(net, cache, dout, g);
  CHECK(g.dw[0](0, 0) == doctest::Approx(2.0 * (0.7 * x - 0.2 - y) * x));
  CHECK(g.db[0][0] == doctest::Approx(2.0 * (0.7 * x - 0.2 - y)));
}

TEST_CASE("backward: finite differences across activations and heads") {
  for (std::uint64_t trial = 0; trial < 6; ++trial) {
    NetworkSpec spec;
    spec.layer_sizes = {4, 6, 5, 7};
    const Activation acts[] = {Activation::Relu, Activation::Tanh, Activation::Sigmoid};
    spec.activations = {acts[trial % 3], acts[(trial + 1) % 3], Activation::Identity};
    spec.heads = {{HeadTransform::Softmax, 3}, {HeadTransform::Softplus, 2}, {HeadTransform::None, 2}};
    Network net = Network::init(spec, 100 + trial);
    Rng rng(200 + trial);
    const Matrix x = random_matrix(rng, 4, 3);
    const Matrix target = random_matrix(rng, 7, 3);

    auto loss_value = [&]() {
      const Matrix y = nn_forward(net, x);
      return loss_mse(y, target).value;
    };

    ForwardCache cache;
    const Matrix y = nn_forward(net, x, &cache);
    Gradients grads = Gradients::zeros_like(net);
    const Matrix dx = nn_backward(net, cache, loss_mse(y, target).grad, grads);
    CHECK(network_gradients_match(net, grads, loss_value));

    // input gradient via FD as well
    const Matrix fd_dx = fd_gradient(
        [&](const Matrix& xp) { return loss_mse(nn_forward(net, xp), target).value; }, x);
    CHECK(gradients_match(dx, fd_dx));
  }
}

TEST_CASE("adam: zero gradient and zero lr leave parameters unchanged") {
  auto spec = NetworkSpec::dense({2, 3, 1});
  Network net = Network::init(spec, 9);
  const Matrix w0 = net.weights[0];
  AdamState state = AdamState::zeros_like(net);
  Gradients zero = Gradients::zeros_like(net);
  adam_step(net, zero, state, 0.01);
  CHECK((net.weights[0] - w0).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  Gradients g = Gradients::zeros_like(net);
  g.dw[0].setConstant(1.0);
  adam_step(net, g, state, 0.0);
  CHECK((net.weights[0] - w0).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("adam: constant gradient moves parameters against its sign") {
  auto spec = NetworkSpec::dense({1, 1});
  Network net = Network::init(spec, 10);
  const double w0 = net.weights[0](0, 0);
  AdamState state = AdamState::zeros_like(net);
  Gradients g = Gradients::zeros_like(net);
  g.dw[0](0, 0) = 3.5;
  for (int i = 0; i < 50; ++i) adam_step(net, g, state, 0.01);
  CHECK(net.weights[0](0, 0) < w0);

  g.dw[0](0, 0) = -3.5;
  Network net2 = Network::init(spec, 10);
  AdamState state2 = AdamState::zeros_like(net2);
  for (int i = 0; i < 50; ++i) adam_step(net2, g, state2, 0.01);
  CHECK(net2.weights[0](0, 0) > w0);
}

TEST_CASE("loss values: handbook cases") {
  Matrix x(2, 1);
  x << 0.3, -0.8;
  CHECK(loss_mse(x, x).value == doctest::Approx(0.0));

  Matrix p(1, 1), t(1, 1);
  p << 0.5;
  t << 0.0;
  CHECK(loss_huber(p, t, 1.0).value == doctest::Approx(0.125));
  p << 3.0;
  CHECK(loss_huber(p, t, 1.0).value == doctest::Approx(2.5));

  const Matrix mu = Matrix::Zero(4, 2);
  const Matrix sigma = Matrix::Ones(4, 2);
  CHECK(loss_kl_standard_normal(mu, sigma).value == doctest::Approx(0.0));
}

TEST_CASE("loss gradients: finite differences, 20 random instances each") {
  Rng rng(50);

  for (int i = 0; i < 20; ++i) {
    const Matrix pred = random_matrix(rng, 3, 4);
    const Matrix target = random_matrix(rng, 3, 4);
    auto got = loss_mse(pred, target);
    CHECK(gradients_match(got.grad,
                          fd_gradient([&](const Matrix& p) { return loss_mse(p, target).value; },
                                      pred)));
  }

  for (int i = 0; i < 20; ++i) {
    const Matrix pred = random_matrix(rng, 3, 4, -2.0, 2.0);
    const Matrix target = random_matrix(rng, 3, 4, -2.0, 2.0);
    auto got = loss_huber(pred, target, 1.0);
    CHECK(gradients_match(
        got.grad,
        fd_gradient([&](const Matrix& p) { return loss_huber(p, target, 1.0).value; }, pred)));
  }

  for (int i = 0; i < 20; ++i) {
    const Matrix mu = random_matrix(rng, 4, 3);
    const Matrix sigma = random_matrix(rng, 4, 3, 0.2, 2.0);
    auto got = loss_kl_standard_normal(mu, sigma);
    CHECK(gradients_match(
        got.dmu,
        fd_gradient([&](const Matrix& m) { return loss_kl_standard_normal(m, sigma).value; }, mu)));
    CHECK(gradients_match(
        got.dsigma,
        fd_gradient([&](const Matrix& s) { return loss_kl_standard_normal(mu, s).value; }, sigma)));
  }

  for (int i = 0; i < 20; ++i) {
    const Matrix logits = random_matrix(rng, 5, 6, -2.0, 2.0);
    std::vector<int> labels;
    for (int c = 0; c < 6; ++c) labels.push_back(rng.uniform_int(0, 4));
    auto got = loss_cross_entropy(logits, labels);
    CHECK(gradients_match(
        got.grad,
        fd_gradient([&](const Matrix& l) { return loss_cross_entropy(l, labels).value; }, logits)));
  }

  for (int i = 0; i < 20; ++i) {
    const Matrix features = random_matrix(rng, 4, 8, -1.0, 1.0);
    std::vector<int> labels;
    for (int c = 0; c < 8; ++c) labels.push_back(c % 3);
    auto got = loss_triplet(features, labels, 0.2);
    CHECK(gradients_match(
        got.grad,
        fd_gradient([&](const Matrix& f) { return loss_triplet(f, labels, 0.2).value; }, features)));
  }

  for (int i = 0; i < 20; ++i) {
    const Matrix features = random_matrix(rng, 5, 8, -1.0, 1.0);
    std::vector<int> labels;
    for (int c = 0; c < 8; ++c) labels.push_back(c % 2);
    auto got = loss_opl(features, labels, 0.5);
    CHECK(gradients_match(
        got.grad,
        fd_gradient([&](const Matrix& f) { return loss_opl(f, labels, 0.5).value; }, features)));
  }
}

TEST_CASE("triplet: satisfied margin gives zero") {
  Matrix f(2, 3);
  f.col(0) << 0.0, 0.0;   // anchor
  f.col(1) << 0.0, 0.0;   // positive, identical
  f.col(2) << 10.0, 0.0;  // far negative
  const auto got = loss_triplet(f, {0, 0, 1}, 1.0);
  CHECK(got.value == doctest::Approx(0.0));
}

TEST_CASE("opl: orthogonal inter-class and identical intra-class features") {
  Matrix f(2, 4);
  f.col(0) << 1.0, 0.0;
  f.col(1) << 1.0, 0.0;
  f.col(2) << 0.0, 1.0;
  f.col(3) << 0.0, 1.0;
  const auto got = loss_opl(f, {0, 0, 1, 1}, 0.5);
  CHECK(got.inter_term == doctest::Approx(0.0));
  CHECK(got.intra_term == doctest::Approx(0.0));
  CHECK(got.value == doctest::Approx(0.0));

  CHECK_THROWS_AS(loss_opl(f, {0, 0, 0, 0}, 0.5), ValidationError);
}

TEST_CASE("pooling: permutation invariance, empty set, gradients") {
  auto spec = NetworkSpec::dense({3, 6, 4}, Activation::Tanh);
  Network net = Network::init(spec, 11);
  Rng rng(12);
  const Matrix elements = random_matrix(rng, 3, 9);

  const Vector pooled = pool_mean_max(net, elements, nullptr);
  Matrix shuffled(3, 9);
  for (int c = 0; c < 9; ++c) shuffled.col(c) = elements.col((c + 4) % 9);
  const Vector pooled2 = pool_mean_max(net, shuffled, nullptr);
  CHECK((pooled - pooled2).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  const Vector empty = pool_mean_max(net, Matrix::Zero(3, 0), nullptr);
  CHECK(empty.size() == pooled_size(4));
  CHECK(empty.cwiseAbs().maxCoeff() == 0.0);

  // FD through pooling into a scalar loss
  const Vector coeff = Vector::LinSpaced(pooled_size(4), 0.3, 1.5);
  auto loss_value = [&]() { return coeff.dot(pool_mean_max(net, elements, nullptr)); };
  PoolCache cache;
  pool_mean_max(net, elements, &cache);
  Gradients grads = Gradients::zeros_like(net);
  pool_backward(net, cache, coeff, grads);
  CHECK(network_gradients_match(net, grads, loss_value));
}

TEST_CASE("training smoke: composite loss decreases over 50 steps") {
  // dense regression net trained on a fixed tiny batch
  auto spec = NetworkSpec::dense({4, 16, 3}, Activation::Tanh);
  Network net = Network::init(spec, 13);
  Rng rng(14);
  const Matrix x = random_matrix(rng, 4, 8);
  const Matrix target = random_matrix(rng, 3, 8);
  AdamState state = AdamState::zeros_like(net);
  double first = -1.0, last = -1.0;
  for (int step = 0; step < 50; ++step) {
    ForwardCache cache;
    const Matrix y = nn_forward(net, x, &cache);
    const auto l = loss_mse(y, target);
    if (step == 0) first = l.value;
    last = l.value;
    Gradients g = Gradients::zeros_like(net);
    nn_backward(net, cache, l.grad, g);
    adam_step(net, g, state, 0.01);
  }
  CHECK(last < first);
}
