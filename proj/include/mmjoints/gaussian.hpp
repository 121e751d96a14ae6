#pragma once

#include "mmjoints/common.hpp"

#include <cstdint>
#include <vector>

namespace mmjoints {

/// Axis-aligned Gaussian N(mean, diag(std)^2).
struct DiagonalGaussian {
  Vector mean;
  Vector std;

  DiagonalGaussian() = default;
  DiagonalGaussian(Vector m, Vector s) : mean(std::move(m)), std(std::move(s)) { validate(); }

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;

  double log_pdf(const Vector& x) const;
  Vector sample(Rng& rng) const;
};

/// Convex combination of diagonal Gaussians over a shared space.
struct GaussianMixture {
  Vector weights;                           // G, non-negative, sums to 1
  std::vector<DiagonalGaussian> components; // G, equal dimension

  int size() const { return static_cast<int>(components.size()); }
  int dim() const { return components.empty() ? 0 : components.front().dim(); }
  void validate() const;

  double log_pdf(const Vector& x) const;
  Vector sample(Rng& rng) const;
};

/// One mixture component as a (weight, mean, covariance-diagonal) triple,
/// the unit the assignment loss matches on.
struct ComponentTriple {
  double weight = 0.0;
  Vector mean;
  Vector cov_diag;  // variances, > 0
};

std::vector<ComponentTriple> to_triples(const GaussianMixture& mixture);
GaussianMixture from_triples(const std::vector<ComponentTriple>& triples);

/// KL(p || q) for diagonal Gaussians, closed form. Zero iff p == q.
double kl_diag(const DiagonalGaussian& p, const DiagonalGaussian& q);

/// Jeffrey divergence KL(p||q) + KL(q||p); symmetric. For diagonal Gaussians
/// the log-determinant terms cancel, leaving
/// 0.5 * sum_d [(vp + delta^2)/vq + (vq + delta^2)/vp - 2].
double jeffrey_gaussians(const DiagonalGaussian& p, const DiagonalGaussian& q);

/// Tractable upper bound on the Gaussian-vs-mixture Jeffrey divergence:
/// convexity of x ln(x/p) + p ln(p/x) gives
/// J(P_s, P_g) <= sum_i w_i * J(P_s, component_i).
struct JensenBound {
  Vector per_component;  // w_i * J(P_s, c_i)
  double total = 0.0;
};

JensenBound jensen_upper_bound(const DiagonalGaussian& p_s, const GaussianMixture& p_g);

/// Monte-Carlo estimate of the exact Gaussian-vs-mixture Jeffrey divergence.
/// Unbiased; serves as the statistical oracle for the Jensen bound.
struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
};

McEstimate mc_jeffrey(const DiagonalGaussian& p_s, const GaussianMixture& p_g, int n_samples,
                      std::uint64_t seed);

/// Symmetrized two-way application of the Jensen bound for mixture-vs-mixture
/// comparisons (no closed form exists): average of
/// sum_i w^a_i * bound(c^a_i, b) and sum_j w^b_j * bound(c^b_j, a).
double jeffrey_mixtures_approx(const GaussianMixture& a, const GaussianMixture& b);

}  // namespace mmjoints
