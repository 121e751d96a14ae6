#include "mmjoints/gaussian.hpp"

#include <cmath>

namespace mmjoints {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kWeightSumTol = 1e-9;
}  // namespace

void DiagonalGaussian::validate() const {
  if (mean.size() != std.size()) {
    throw ValidationError("DiagonalGaussian: mean/std dimension mismatch");
  }
  if (!(std.array() > 0.0).all()) {
    throw ValidationError("DiagonalGaussian: std must be component-wise positive");
  }
  if (!mean.allFinite() || !std.allFinite()) {
    throw ValidationError("DiagonalGaussian: parameters must be finite");
  }
}

double DiagonalGaussian::log_pdf(const Vector& x) const {
  if (x.size() != mean.size()) throw ValidationError("log_pdf: dimension mismatch");
  const Vector z = (x - mean).cwiseQuotient(std);
  return -0.5 * (z.squaredNorm() + dim() * kLog2Pi) - std.array().log().sum();
}

Vector DiagonalGaussian::sample(Rng& rng) const {
  Vector z(dim());
  for (int d = 0; d < dim(); ++d) z[d] = rng.normal();
  return mean + std.cwiseProduct(z);
}

void GaussianMixture::validate() const {
  if (components.empty()) throw ValidationError("GaussianMixture: no components");
  if (weights.size() != static_cast<Eigen::Index>(components.size())) {
    throw ValidationError("GaussianMixture: weight/component count mismatch");
  }
  if (!(weights.array() >= 0.0).all()) {
    throw ValidationError("GaussianMixture: weights must be non-negative");
  }
  if (std::abs(weights.sum() - 1.0) > kWeightSumTol) {
    throw ValidationError("GaussianMixture: weights must sum to 1");
  }
  const int d = components.front().dim();
  for (const auto& c : components) {
    c.validate();
    if (c.dim() != d) throw ValidationError("GaussianMixture: component dimension mismatch");
  }
}

double GaussianMixture::log_pdf(const Vector& x) const {
  // log-sum-exp over weighted component densities
  double max_term = -std::numeric_limits<double>::infinity();
  Vector terms(size());
  for (int i = 0; i < size(); ++i) {
    terms[i] = weights[i] > 0.0 ? std::log(weights[i]) + components[static_cast<std::size_t>(i)].log_pdf(x)
                                : -std::numeric_limits<double>::infinity();
    max_term = std::max(max_term, terms[i]);
  }
  if (!std::isfinite(max_term)) return -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (int i = 0; i < size(); ++i) acc += std::exp(terms[i] - max_term);
  return max_term + std::log(acc);
}

Vector GaussianMixture::sample(Rng& rng) const {
  const double u = rng.uniform();
  double cum = 0.0;
  for (int i = 0; i < size(); ++i) {
    cum += weights[i];
    if (u < cum) return components[static_cast<std::size_t>(i)].sample(rng);
  }
  return components.back().sample(rng);
}

std::vector<ComponentTriple> to_triples(const GaussianMixture& mixture) {
  std::vector<ComponentTriple> out;
  out.reserve(static_cast<std::size_t>(mixture.size()));
  for (int i = 0; i < mixture.size(); ++i) {
    const auto& c = mixture.components[static_cast<std::size_t>(i)];
    out.push_back({mixture.weights[i], c.mean, c.std.array().square().matrix()});
  }
  return out;
}

GaussianMixture from_triples(const std::vector<ComponentTriple>& triples) {
  GaussianMixture m;
  m.weights.resize(static_cast<Eigen::Index>(triples.size()));
  for (std::size_t i = 0; i < triples.size(); ++i) {
    m.weights[static_cast<Eigen::Index>(i)] = triples[i].weight;
    m.components.push_back({triples[i].mean, triples[i].cov_diag.cwiseSqrt()});
  }
  return m;
}

double kl_diag(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  if (p.dim() != q.dim()) throw ValidationError("kl_diag: dimension mismatch");
  const auto vp = p.std.array().square();
  const auto vq = q.std.array().square();
  const auto delta2 = (p.mean - q.mean).array().square();
  return ((vq / vp).log() + (vp + delta2) / vq - 1.0).sum() * 0.5;
}

double jeffrey_gaussians(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  if (p.dim() != q.dim()) throw ValidationError("jeffrey_gaussians: dimension mismatch");
  const auto vp = p.std.array().square();
  const auto vq = q.std.array().square();
  const auto delta2 = (p.mean - q.mean).array().square();
  return (((vp + delta2) / vq) + ((vq + delta2) / vp) - 2.0).sum() * 0.5;
}

JensenBound jensen_upper_bound(const DiagonalGaussian& p_s, const GaussianMixture& p_g) {
  if (p_s.dim() != p_g.dim()) throw ValidationError("jensen_upper_bound: dimension mismatch");
  JensenBound bound;
  bound.per_component.resize(p_g.size());
  for (int i = 0; i < p_g.size(); ++i) {
    bound.per_component[i] =
        p_g.weights[i] * jeffrey_gaussians(p_s, p_g.components[static_cast<std::size_t>(i)]);
  }
  bound.total = bound.per_component.sum();
  return bound;
}

McEstimate mc_jeffrey(const DiagonalGaussian& p_s, const GaussianMixture& p_g, int n_samples,
                      std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("mc_jeffrey: n_samples must be >= 1");
  if (p_s.dim() != p_g.dim()) throw ValidationError("mc_jeffrey: dimension mismatch");
  Rng rng(seed);
  // KL(g||s) from draws of g, KL(s||g) from draws of s
  double sum_g = 0.0, sumsq_g = 0.0, sum_s = 0.0, sumsq_s = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const Vector xg = p_g.sample(rng);
    const double tg = p_g.log_pdf(xg) - p_s.log_pdf(xg);
    sum_g += tg;
    sumsq_g += tg * tg;

    const Vector xs = p_s.sample(rng);
    const double ts = p_s.log_pdf(xs) - p_g.log_pdf(xs);
    sum_s += ts;
    sumsq_s += ts * ts;
  }
  const double n = static_cast<double>(n_samples);
  const double mean_g = sum_g / n;
  const double mean_s = sum_s / n;
  const double var_g = std::max(0.0, sumsq_g / n - mean_g * mean_g);
  const double var_s = std::max(0.0, sumsq_s / n - mean_s * mean_s);
  McEstimate est;
  est.estimate = mean_g + mean_s;
  est.stderr_ = std::sqrt((var_g + var_s) / n);
  return est;
}

double jeffrey_mixtures_approx(const GaussianMixture& a, const GaussianMixture& b) {
  if (a.dim() != b.dim()) throw ValidationError("jeffrey_mixtures_approx: dimension mismatch");
  double ab = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    ab += a.weights[i] *
          jensen_upper_bound(a.components[static_cast<std::size_t>(i)], b).total;
  }
  double ba = 0.0;
  for (int j = 0; j < b.size(); ++j) {
    ba += b.weights[j] *
          jensen_upper_bound(b.components[static_cast<std::size_t>(j)], a).total;
  }
  return 0.5 * (ab + ba);
}

}  // namespace mmjoints
