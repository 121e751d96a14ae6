#pragma once

// Central finite-difference oracle for gradient checks. Lives in test code
// only; independent of the analytic backward paths it verifies.

#include "mmjoints/nn.hpp"

#include <functional>

namespace mmjoints::testing {

inline constexpr double kFdStep = 1e-5;

/// Central difference d f / d x_i for every entry of `x`.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, Matrix x,
                          double step = kFdStep) {
  Matrix grad(x.rows(), x.cols());
  for (int c = 0; c < x.cols(); ++c) {
    for (int r = 0; r < x.rows(); ++r) {
      const double saved = x(r, c);
      x(r, c) = saved + step;
      const double hi = f(x);
      x(r, c) = saved - step;
      const double lo = f(x);
      x(r, c) = saved;
      grad(r, c) = (hi - lo) / (2.0 * step);
    }
  }
  return grad;
}

/// Relative agreement: |a - b| <= tol * max(1, |a|, |b|) element-wise.
inline bool gradients_match(const Matrix& analytic, const Matrix& numeric, double tol = 1e-4) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) return false;
  for (int c = 0; c < analytic.cols(); ++c) {
    for (int r = 0; r < analytic.rows(); ++r) {
      const double a = analytic(r, c);
      const double b = numeric(r, c);
      const double scale = std::max({1.0, std::abs(a), std::abs(b)});
      if (std::abs(a - b) > tol * scale) return false;
    }
  }
  return true;
}

/// Runs f over perturbations of every parameter of `net`; compares against
/// the analytic gradients in `grads`.
inline bool network_gradients_match(Network& net, const Gradients& grads,
                                    const std::function<double()>& loss_fn, double tol = 1e-4,
                                    double step = kFdStep) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Matrix fd(net.weights[l].rows(), net.weights[l].cols());
    for (int c = 0; c < net.weights[l].cols(); ++c) {
      for (int r = 0; r < net.weights[l].rows(); ++r) {
        const double saved = net.weights[l](r, c);
        net.weights[l](r, c) = saved + step;
        const double hi = loss_fn();
        net.weights[l](r, c) = saved - step;
        const double lo = loss_fn();
        net.weights[l](r, c) = saved;
        fd(r, c) = (hi - lo) / (2.0 * step);
      }
    }
    if (!gradients_match(grads.dw[l], fd, tol)) return false;

    Matrix fdb(net.biases[l].size(), 1);
    for (int r = 0; r < net.biases[l].size(); ++r) {
      const double saved = net.biases[l][r];
      net.biases[l][r] = saved + step;
      const double hi = loss_fn();
      net.biases[l][r] = saved - step;
      const double lo = loss_fn();
      net.biases[l][r] = saved;
      fdb(r, 0) = (hi - lo) / (2.0 * step);
    }
    if (!gradients_match(Matrix(grads.db[l]), fdb, tol)) return false;
  }
  return true;
}

}  // namespace mmjoints::testing
