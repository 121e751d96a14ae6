#include "mmjoints/gaussian.hpp"

#include <doctest.h>

#include <cmath>

using namespace mmjoints;

namespace {

DiagonalGaussian random_gaussian(Rng& rng, int dim) {
  Vector mean(dim), std(dim);
  for (int d = 0; d < dim; ++d) {
    mean[d] = rng.uniform(-3, 3);
    std[d] = rng.uniform(0.3, 2.0);
  }
  return {mean, std};
}

GaussianMixture random_mixture(Rng& rng, int dim, int g) {
  GaussianMixture m;
  m.weights.resize(g);
  for (int i = 0; i < g; ++i) {
    m.weights[i] = rng.uniform(0.1, 1.0);
    m.components.push_back(random_gaussian(rng, dim));
  }
  m.weights /= m.weights.sum();
  return m;
}

}  // namespace

TEST_CASE("kl_diag: zero on identical, closed-form values") {
  Rng rng(3);
  const auto p = random_gaussian(rng, 4);
  CHECK(kl_diag(p, p) == doctest::Approx(0.0));

  // unit-std Gaussians with mean gap delta -> |delta|^2 / 2
  Vector m1 = Vector::Zero(3), m2(3);
  m2 << 1.0, -2.0, 0.5;
  const DiagonalGaussian a{m1, Vector::Ones(3)}, b{m2, Vector::Ones(3)};
  CHECK(kl_diag(a, b) == doctest::Approx(m2.squaredNorm() / 2.0));

  // 1-D N(0,1) vs N(0, std 2): ln 2 + 1/8 - 1/2
  const DiagonalGaussian p1{Vector::Zero(1), Vector::Ones(1)};
  const DiagonalGaussian q1{Vector::Zero(1), 2.0 * Vector::Ones(1)};
  CHECK(kl_diag(p1, q1) == doctest::Approx(std::log(2.0) + 0.125 - 0.5));

  CHECK_THROWS_AS(kl_diag(p1, a), ValidationError);
}

// Quadrature oracle: integral of p(x) ln(p(x)/q(x)) on a wide 1-D grid.
static double kl_quadrature(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  const double lo = p.mean[0] - 12.0 * p.std[0];
  const double hi = p.mean[0] + 12.0 * p.std[0];
  const int n = 200000;
  const double h = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + h * i;
    Vector xv(1);
    xv << x;
    const double lp = p.log_pdf(xv);
    const double term = std::exp(lp) * (lp - q.log_pdf(xv));
    acc += (i == 0 || i == n) ? 0.5 * term : term;
  }
  return acc * h;
}

TEST_CASE("kl_diag: matches quadrature oracle in 1-D") {
  Rng rng(41);
  for (int i = 0; i < 10; ++i) {
    const auto p = random_gaussian(rng, 1);
    const auto q = random_gaussian(rng, 1);
    CHECK(kl_diag(p, q) == doctest::Approx(kl_quadrature(p, q)).epsilon(1e-6));
  }
  const DiagonalGaussian p{Vector::Zero(1), Vector::Ones(1)};
  const DiagonalGaussian q{Vector::Zero(1), 2.0 * Vector::Ones(1)};
  CHECK(kl_quadrature(p, q) == doctest::Approx(std::log(2.0) + 0.125 - 0.5).epsilon(1e-8));
}

TEST_CASE("kl_diag: non-negative, zero iff equal") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_gaussian(rng, 3);
    const auto q = random_gaussian(rng, 3);
    const double kl = kl_diag(p, q);
    CHECK(kl >= 0.0);
    if ((p.mean - q.mean).norm() > 1e-9 || (p.std - q.std).norm() > 1e-9) {
      CHECK(kl > 0.0);
    }
  }
}

TEST_CASE("jeffrey_gaussians: symmetry and unit-std closed form") {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_gaussian(rng, 4);
    const auto q = random_gaussian(rng, 4);
    CHECK(jeffrey_gaussians(p, q) == doctest::Approx(jeffrey_gaussians(q, p)));
    CHECK(jeffrey_gaussians(p, q) == doctest::Approx(kl_diag(p, q) + kl_diag(q, p)));
  }
  const auto p = random_gaussian(rng, 2);
  CHECK(jeffrey_gaussians(p, p) == doctest::Approx(0.0));

  Vector gap(2);
  gap << 3.0, -4.0;
  const DiagonalGaussian a{Vector::Zero(2), Vector::Ones(2)};
  const DiagonalGaussian b{gap, Vector::Ones(2)};
  CHECK(jeffrey_gaussians(a, b) == doctest::Approx(gap.squaredNorm()));
}

TEST_CASE("jensen_upper_bound: single component and identical components") {
  Rng rng(9);
  const auto p = random_gaussian(rng, 4);
  const auto q = random_gaussian(rng, 4);

  GaussianMixture single;
  single.weights = Vector::Ones(1);
  single.components = {q};
  const auto bound = jensen_upper_bound(p, single);
  CHECK(bound.total == doctest::Approx(jeffrey_gaussians(p, q)));
  CHECK(bound.per_component.size() == 1);

  GaussianMixture same;
  same.weights = Vector::Constant(3, 1.0 / 3.0);
  same.components = {p, p, p};
  CHECK(jensen_upper_bound(p, same).total == doctest::Approx(0.0));
}

TEST_CASE("mc_jeffrey: determinism, closed-form cross-check, bound holds") {
  Rng rng(11);
  const auto p = random_gaussian(rng, 4);

  GaussianMixture self;
  self.weights = Vector::Ones(1);
  self.components = {p};
  const auto zero_est = mc_jeffrey(p, self, 20000, 123);
  CHECK(std::abs(zero_est.estimate) <= 3.0 * std::max(zero_est.stderr_, 1e-12));

  const auto q = random_gaussian(rng, 4);
  GaussianMixture qm;
  qm.weights = Vector::Ones(1);
  qm.components = {q};
  const auto est = mc_jeffrey(p, qm, 50000, 77);
  CHECK(std::abs(est.estimate - jeffrey_gaussians(p, q)) <= 3.0 * est.stderr_);

  const auto rerun = mc_jeffrey(p, qm, 50000, 77);
  CHECK(est.estimate == rerun.estimate);
  CHECK(est.stderr_ == rerun.stderr_);

  // random mixtures: bound >= estimate - 3 stderr
  for (int i = 0; i < 10; ++i) {
    const auto ps = random_gaussian(rng, 4);
    const auto mix = random_mixture(rng, 4, 3);
    const auto b = jensen_upper_bound(ps, mix);
    const auto mc = mc_jeffrey(ps, mix, 100000, 1000 + static_cast<std::uint64_t>(i));
    CHECK(b.total >= mc.estimate - 3.0 * mc.stderr_);
  }
}

TEST_CASE("mixture validation") {
  GaussianMixture m;
  m.weights = Vector::Constant(2, 0.5);
  m.components = {DiagonalGaussian{Vector::Zero(2), Vector::Ones(2)},
                  DiagonalGaussian{Vector::Ones(2), Vector::Ones(2)}};
  CHECK_NOTHROW(m.validate());

  m.weights[0] = 0.6;
  CHECK_THROWS_AS(m.validate(), ValidationError);

  m.weights[0] = -0.5;
  m.weights[1] = 1.5;
  CHECK_THROWS_AS(m.validate(), ValidationError);
}

TEST_CASE("triples round-trip") {
  Rng rng(13);
  const auto mix = random_mixture(rng, 3, 4);
  const auto triples = to_triples(mix);
  REQUIRE(triples.size() == 4);
  const auto back = from_triples(triples);
  for (int i = 0; i < 4; ++i) {
    CHECK(back.weights[i] == doctest::Approx(mix.weights[i]));
    CHECK((back.components[i].std - mix.components[i].std).norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("jeffrey_mixtures_approx: symmetric, zero on identical") {
  Rng rng(17);
  const auto a = random_mixture(rng, 3, 2);
  const auto b = random_mixture(rng, 3, 3);
  CHECK(jeffrey_mixtures_approx(a, b) == doctest::Approx(jeffrey_mixtures_approx(b, a)));
  CHECK(jeffrey_mixtures_approx(a, b) > 0.0);

  // identical one-component mixtures
  GaussianMixture c;
  c.weights = Vector::Ones(1);
  c.components = {random_gaussian(rng, 3)};
  CHECK(jeffrey_mixtures_approx(c, c) == doctest::Approx(0.0));
}
