#include "mmjoints/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace mmjoints {

Vector rasterize_signal(const PointCloudFrame& frame, const SceneBox& box) {
  Vector out = Vector::Zero(kVoxelGrid * kVoxelGrid * kVoxelGrid);
  const Eigen::Vector3d span = box.hi - box.lo;
  for (const auto& p : frame.points) {
    int idx[3];
    for (int d = 0; d < 3; ++d) {
      const double t = (p.position[d] - box.lo[d]) / span[d];
      idx[d] = std::clamp(static_cast<int>(t * kVoxelGrid), 0, kVoxelGrid - 1);
    }
    out[(idx[0] * kVoxelGrid + idx[1]) * kVoxelGrid + idx[2]] += p.intensity;
  }
  return out;
}

namespace {

// Normalized absolute covariance (|Pearson correlation|) of two equally long
// series; 0 when either is constant. Normalization keeps the instance- and
// distribution-level studies on one scale.
double abs_normalized_cov(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return std::abs(cov / std::sqrt(va * vb));
}

CovarianceReport bootstrap_report(const std::vector<double>& dp, const std::vector<double>& dx,
                                  std::uint64_t seed, int n_bootstrap) {
  CovarianceReport report;
  Rng rng(seed);
  const int n = static_cast<int>(dp.size());
  std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
  for (int it = 0; it < n_bootstrap; ++it) {
    for (int i = 0; i < n; ++i) {
      const int pick = rng.uniform_int(0, n - 1);
      a[static_cast<std::size_t>(i)] = dp[static_cast<std::size_t>(pick)];
      b[static_cast<std::size_t>(i)] = dx[static_cast<std::size_t>(pick)];
    }
    report.samples.push_back(abs_normalized_cov(a, b));
  }
  report.mean = 0.0;
  for (double v : report.samples) report.mean += v;
  report.mean /= static_cast<double>(report.samples.size());

  report.histogram_max = 1.0;
  report.histogram.assign(20, 0);
  for (double v : report.samples) {
    const int bin = std::clamp(static_cast<int>(v / report.histogram_max * 20.0), 0, 19);
    report.histogram[static_cast<std::size_t>(bin)] += 1;
  }
  return report;
}

}  // namespace

CovarianceReport covariance_instance_study(std::span<const PoseSignalSample> dataset, int n_pairs,
                                           std::uint64_t seed, int n_bootstrap) {
  if (dataset.size() < 2) throw ValidationError("covariance_instance_study: need >= 2 samples");
  Rng rng(seed);
  std::vector<double> dp, dx;
  for (int i = 0; i < n_pairs; ++i) {
    const int a = rng.uniform_int(0, static_cast<int>(dataset.size()) - 1);
    int b = rng.uniform_int(0, static_cast<int>(dataset.size()) - 1);
    if (b == a) b = (b + 1) % static_cast<int>(dataset.size());
    dp.push_back((dataset[static_cast<std::size_t>(a)].pose_flat -
                  dataset[static_cast<std::size_t>(b)].pose_flat)
                     .norm());
    dx.push_back((dataset[static_cast<std::size_t>(a)].raster -
                  dataset[static_cast<std::size_t>(b)].raster)
                     .norm());
  }
  return bootstrap_report(dp, dx, seed + 1, n_bootstrap);
}

CovarianceReport covariance_distribution_study(std::span<const PoseDistributionSample> dataset,
                                               int n_pairs, std::uint64_t seed, int n_bootstrap) {
  if (dataset.size() < 2) throw ValidationError("covariance_distribution_study: need >= 2 samples");
  Rng rng(seed);
  std::vector<double> dp, dx;
  for (int i = 0; i < n_pairs; ++i) {
    const int a = rng.uniform_int(0, static_cast<int>(dataset.size()) - 1);
    int b = rng.uniform_int(0, static_cast<int>(dataset.size()) - 1);
    if (b == a) b = (b + 1) % static_cast<int>(dataset.size());
    dp.push_back((dataset[static_cast<std::size_t>(a)].pose_flat -
                  dataset[static_cast<std::size_t>(b)].pose_flat)
                     .norm());
    dx.push_back(jeffrey_mixtures_approx(dataset[static_cast<std::size_t>(a)].distribution,
                                         dataset[static_cast<std::size_t>(b)].distribution));
  }
  return bootstrap_report(dp, dx, seed + 1, n_bootstrap);
}

PcaModel fit_pca(const Matrix& data, int k) {
  if (data.rows() < 2) throw ValidationError("fit_pca: need >= 2 rows");
  if (k < 1 || k > data.cols()) throw ValidationError("fit_pca: invalid component count");
  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - model.mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  // eigenvalues ascending; take the top-k columns in descending order
  model.components.resize(data.cols(), k);
  for (int i = 0; i < k; ++i) {
    model.components.col(i) = solver.eigenvectors().col(data.cols() - 1 - i);
  }
  return model;
}

double basis_reconstruction_error(const Vector& feature, const Matrix& basis) {
  if (feature.size() != basis.rows()) {
    throw ValidationError("basis_reconstruction_error: dimension mismatch");
  }
  const Matrix gram = basis.transpose() * basis;
  if ((gram - Matrix::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff() > 1e-8) {
    throw ValidationError("basis_reconstruction_error: basis columns must be orthonormal");
  }
  const Vector residual = feature - basis * (basis.transpose() * feature);
  return residual.squaredNorm();
}

double margin_difference(const Vector& mu, const Vector& mu_pos, const Vector& mu_neg) {
  if (mu.size() != mu_pos.size() || mu.size() != mu_neg.size()) {
    throw ValidationError("margin_difference: dimension mismatch");
  }
  return (mu - mu_neg).squaredNorm() - (mu - mu_pos).squaredNorm();
}

}  // namespace mmjoints
