#pragma once

#include "mmjoints/gaussian.hpp"
#include "mmjoints/types.hpp"

#include <span>
#include <vector>

namespace mmjoints {

/// Fixed scene box for signal rasterization, cm. Points outside clamp to the
/// nearest voxel so no intensity is lost.
struct SceneBox {
  Eigen::Vector3d lo{-110.0, -110.0, 0.0};
  Eigen::Vector3d hi{110.0, 110.0, 240.0};
};

inline constexpr int kVoxelGrid = 8;  // 8x8x8 raster

/// Intensity-weighted occupancy over the voxel grid; permutation-invariant,
/// zero vector for an empty frame.
Vector rasterize_signal(const PointCloudFrame& frame, const SceneBox& box = {});

struct CovarianceReport {
  std::vector<double> samples;  // bootstrap |covariance| draws
  double mean = 0.0;
  std::vector<long> histogram;  // counts over [0, max] bins
  double histogram_max = 0.0;
};

/// Pose-instance vs signal-instance dependency: normalized |Cov| between
/// pose-pair distances and rasterized-signal-pair distances, bootstrapped.
struct PoseSignalSample {
  Vector pose_flat;
  Vector raster;
};

CovarianceReport covariance_instance_study(std::span<const PoseSignalSample> dataset, int n_pairs,
                                           std::uint64_t seed, int n_bootstrap = 200);

/// Pose vs signal-distribution dependency: per pose, many rendered frames are
/// rasterized, PCA-reduced and fitted with a mixture; pair distance is the
/// symmetrized mixture divergence approximation.
struct PoseDistributionSample {
  Vector pose_flat;
  GaussianMixture distribution;  // over the PCA space
};

CovarianceReport covariance_distribution_study(std::span<const PoseDistributionSample> dataset,
                                               int n_pairs, std::uint64_t seed,
                                               int n_bootstrap = 200);

/// PCA projection fitted on rows of `data`; used to reduce rasterized signals
/// before mixture fitting.
struct PcaModel {
  Vector mean;
  Matrix components;  // d x k, orthonormal columns

  Vector project(const Vector& x) const { return components.transpose() * (x - mean); }
};

PcaModel fit_pca(const Matrix& data, int k);

/// || F - B B^T F ||^2 for a basis with orthonormal columns (B may be
/// rectangular). Flags non-orthonormal input.
double basis_reconstruction_error(const Vector& feature, const Matrix& basis);

/// ||mu - mu_neg||^2 - ||mu - mu_pos||^2; positive when the positive sits
/// closer than the negative.
double margin_difference(const Vector& mu, const Vector& mu_pos, const Vector& mu_neg);

}  // namespace mmjoints
