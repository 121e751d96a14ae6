#include "mmjoints/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmjoints {

namespace {

// k-means++ seeding: first center uniform, later centers proportional to
// squared distance from the nearest chosen center.
std::vector<int> seed_centers(const Matrix& samples, int g, Rng& rng) {
  const int n = static_cast<int>(samples.rows());
  std::vector<int> centers;
  centers.push_back(rng.uniform_int(0, n - 1));
  Vector dist2 = (samples.rowwise() - samples.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < g) {
    const double total = dist2.sum();
    int pick;
    if (total <= 0.0) {
      pick = rng.uniform_int(0, n - 1);
    } else {
      const double u = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        cum += dist2[i];
        if (u < cum) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(pick);
    const Vector d2 = (samples.rowwise() - samples.row(pick)).rowwise().squaredNorm();
    dist2 = dist2.cwiseMin(d2);
  }
  return centers;
}

struct LogPdfTable {
  // log of weight_i * N(x_n | mu_i, var_i) for every sample/component pair
  Matrix log_joint;  // n x g
  Vector log_norm;   // n, log-sum-exp over components
};

LogPdfTable evaluate(const Matrix& samples, const Matrix& means, const Matrix& vars,
                     const Vector& weights) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  const int n = static_cast<int>(samples.rows());
  const int g = static_cast<int>(means.rows());
  const int d = static_cast<int>(samples.cols());
  LogPdfTable t;
  t.log_joint.resize(n, g);
  for (int i = 0; i < g; ++i) {
    const Vector inv_var = vars.row(i).cwiseInverse().transpose();
    const double log_det = vars.row(i).array().log().sum();
    const double log_w = weights[i] > 0.0 ? std::log(weights[i]) : -1e300;
    const Matrix centered = samples.rowwise() - means.row(i);
    const Vector quad = (centered.array().square().matrix() * inv_var);
    t.log_joint.col(i) =
        (-0.5 * (quad.array() + d * kLog2Pi + log_det) + log_w).matrix();
  }
  t.log_norm.resize(n);
  for (int r = 0; r < n; ++r) {
    const double m = t.log_joint.row(r).maxCoeff();
    t.log_norm[r] = m + std::log((t.log_joint.row(r).array() - m).exp().sum());
  }
  return t;
}

GaussianMixture pack(const Matrix& means, const Matrix& vars, const Vector& weights) {
  GaussianMixture out;
  out.weights = weights;
  for (int i = 0; i < means.rows(); ++i) {
    out.components.push_back(
        {means.row(i).transpose(), vars.row(i).transpose().cwiseSqrt()});
  }
  out.validate();
  return out;
}

}  // namespace

GaussianMixture em_fit(const Matrix& samples, int g, const FitConfig& config) {
  config.validate();
  const int n = static_cast<int>(samples.rows());
  const int d = static_cast<int>(samples.cols());
  if (g < 1) throw ValidationError("em_fit: component count must be >= 1");
  if (d < 1) throw ValidationError("em_fit: sample dimension must be >= 1");
  if (n < g) throw ValidationError("em_fit: need at least as many samples as components");

  const Eigen::RowVectorXd sample_mean = samples.colwise().mean();
  const Eigen::RowVectorXd sample_var =
      ((samples.rowwise() - sample_mean).array().square().colwise().sum() / std::max(1, n))
          .cwiseMax(config.variance_floor);

  const bool degenerate =
      ((samples.rowwise() - samples.row(0)).rowwise().squaredNorm().maxCoeff() == 0.0);
  if (degenerate) {
    Matrix means = samples.row(0);
    Matrix vars = Matrix::Constant(1, d, config.variance_floor);
    return pack(means, vars, Vector::Ones(1));
  }

  Rng rng(config.seed);
  const auto centers = seed_centers(samples, g, rng);
  Matrix means(g, d);
  for (int i = 0; i < g; ++i) means.row(i) = samples.row(centers[static_cast<std::size_t>(i)]);
  Matrix vars = sample_var.replicate(g, 1);
  Vector weights = Vector::Constant(g, 1.0 / g);

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const LogPdfTable t = evaluate(samples, means, vars, weights);
    const double ll = t.log_norm.mean();

    // E step: responsibilities
    Matrix resp = (t.log_joint.colwise() - t.log_norm).array().exp();

    // M step
    Vector mass = resp.colwise().sum().transpose();
    for (int i = 0; i < g; ++i) {
      if (mass[i] < 1e-10) {
        // Reseed an emptied component at a random sample.
        const int pick = rng.uniform_int(0, n - 1);
        means.row(i) = samples.row(pick);
        vars.row(i) = sample_var;
        weights[i] = 1.0 / n;
        continue;
      }
      means.row(i) = (resp.col(i).transpose() * samples) / mass[i];
      const Matrix centered = samples.rowwise() - means.row(i);
      vars.row(i) = ((resp.col(i).transpose() * centered.array().square().matrix()) / mass[i])
                        .cwiseMax(config.variance_floor);
      weights[i] = mass[i] / n;
    }
    weights /= weights.sum();

    if (ll - prev_ll < config.tolerance && iter > 0) break;
    prev_ll = ll;
  }
  return pack(means, vars, weights);
}

double mixture_log_likelihood(const GaussianMixture& mixture, const Matrix& samples) {
  double total = 0.0;
  for (int r = 0; r < samples.rows(); ++r) {
    total += mixture.log_pdf(samples.row(r).transpose());
  }
  return total;
}

int bic_select(const Matrix& samples, int g_max, const FitConfig& config, int g_min) {
  if (g_max < 1) throw ValidationError("bic_select: g_max must be >= 1");
  if (g_min < 1 || g_min > g_max) throw ValidationError("bic_select: invalid g_min");
  const int n = static_cast<int>(samples.rows());
  const int d = static_cast<int>(samples.cols());
  const int hi = std::min(g_max, n);
  if (n < g_min) throw ValidationError("bic_select: fewer samples than g_min");

  int best_g = g_min;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int g = g_min; g <= hi; ++g) {
    const GaussianMixture fit = em_fit(samples, g, config);
    const double ll = mixture_log_likelihood(fit, samples);
    const double p = g * (2.0 * d + 1.0) - 1.0;
    const double bic = -2.0 * ll + p * std::log(static_cast<double>(n));
    if (bic < best_bic) {
      best_bic = bic;
      best_g = g;
    }
  }
  return best_g;
}

}  // namespace mmjoints
