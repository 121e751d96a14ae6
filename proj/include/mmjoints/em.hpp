#pragma once

#include "mmjoints/gaussian.hpp"

namespace mmjoints {

struct FitConfig {
  int max_iterations = 200;
  double tolerance = 1e-6;       // log-likelihood improvement per sample
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;
  int g_max = 4;

  void validate() const {
    if (!(tolerance > 0.0)) throw ValidationError("FitConfig: tolerance must be > 0");
    if (!(variance_floor > 0.0)) throw ValidationError("FitConfig: variance_floor must be > 0");
    if (max_iterations < 1) throw ValidationError("FitConfig: max_iterations must be >= 1");
    if (g_max < 1) throw ValidationError("FitConfig: g_max must be >= 1");
  }
};

/// Diagonal-covariance EM with k-means++-style seeded initialization.
/// Samples are rows of an n x d matrix. Log-likelihood is non-decreasing
/// across iterations; variances are floored. All-identical samples collapse
/// to a single component at that point.
GaussianMixture em_fit(const Matrix& samples, int g, const FitConfig& config);

/// Mean per-sample log-likelihood of the mixture on the sample rows.
double mixture_log_likelihood(const GaussianMixture& mixture, const Matrix& samples);

/// BIC = -2 logL + p ln(n) with p = G(2D + 1) - 1 free parameters for a
/// diagonal mixture. Returns the argmin over G in [g_min, g_max] (candidates
/// capped at the sample count), ties broken toward smaller G.
int bic_select(const Matrix& samples, int g_max, const FitConfig& config, int g_min = 1);

}  // namespace mmjoints
