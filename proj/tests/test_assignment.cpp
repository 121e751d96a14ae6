#include "mmjoints/assignment.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace mmjoints;

namespace {

// Exhaustive LAP oracle; also returns the lexicographically smallest optimum.
std::pair<std::vector<int>, double> brute_force(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += cost(i, perm[static_cast<std::size_t>(i)]);
    if (c < best_cost - 1e-12) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best, best_cost};
}

ComponentTriple random_triple(Rng& rng, int dim) {
  ComponentTriple t;
  t.weight = rng.uniform(0, 1);
  t.mean.resize(dim);
  t.cov_diag.resize(dim);
  for (int d = 0; d < dim; ++d) {
    t.mean[d] = rng.uniform(-2, 2);
    t.cov_diag[d] = rng.uniform(0.1, 2.0);
  }
  return t;
}

}  // namespace

TEST_CASE("hungarian: zero diagonal picks identity") {
  Matrix cost = Matrix::Constant(4, 4, 100.0);
  cost.diagonal().setZero();
  const auto a = hungarian(cost);
  CHECK(a.total_cost == doctest::Approx(0.0));
  for (int i = 0; i < 4; ++i) CHECK(a.permutation[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("hungarian: 2x2 with tie broken lexicographically") {
  Matrix cost(2, 2);
  cost << 1.0, 2.0, 2.0, 1.0;
  const auto a = hungarian(cost);
  CHECK(a.total_cost == doctest::Approx(2.0));
  CHECK(a.permutation == std::vector<int>{0, 1});

  // all-equal costs: every permutation optimal, identity is lexicographically smallest
  const auto tie = hungarian(Matrix::Constant(3, 3, 5.0));
  CHECK(tie.permutation == std::vector<int>{0, 1, 2});
}

TEST_CASE("hungarian: equals brute force on random 5x5 matrices") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix cost(5, 5);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) cost(i, j) = rng.uniform(0, 10);
    }
    const auto a = hungarian(cost);
    const auto [perm, best] = brute_force(cost);
    CHECK(a.total_cost == doctest::Approx(best));
    CHECK(a.permutation == perm);
  }
}

TEST_CASE("hungarian: input validation") {
  CHECK_THROWS_AS(hungarian(Matrix::Zero(2, 3)), ValidationError);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(hungarian(bad), ValidationError);
}

TEST_CASE("component_assessment: single-term examples") {
  Rng rng(33);
  const auto a = random_triple(rng, 2);
  CHECK(component_assessment(a, a) == doctest::Approx(0.0));

  ComponentTriple b = a;
  b.weight = a.weight + 0.1;
  CHECK(component_assessment(a, b) == doctest::Approx(0.1));

  ComponentTriple c = a;
  c.mean[0] += 1.0;
  c.mean[1] -= 1.0;
  CHECK(component_assessment(a, c) == doctest::Approx(2.0));

  CHECK(component_assessment(a, b) == doctest::Approx(component_assessment(b, a)));
}

TEST_CASE("lap_loss: identity, permutation invariance, brute-force agreement") {
  Rng rng(35);
  std::vector<ComponentTriple> target;
  for (int i = 0; i < 4; ++i) target.push_back(random_triple(rng, 3));

  const auto self = lap_loss(target, target);
  CHECK(self.loss == doctest::Approx(0.0));
  CHECK(self.matching == std::vector<int>{0, 1, 2, 3});

  std::vector<ComponentTriple> shuffled = {target[2], target[0], target[3], target[1]};
  const auto perm = lap_loss(shuffled, target);
  CHECK(perm.loss == doctest::Approx(0.0));
  CHECK(perm.matching == std::vector<int>{2, 0, 3, 1});

  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ComponentTriple> est, tgt;
    for (int i = 0; i < 4; ++i) {
      est.push_back(random_triple(rng, 3));
      tgt.push_back(random_triple(rng, 3));
    }
    Matrix cost(4, 4);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        cost(i, j) = component_assessment(est[static_cast<std::size_t>(i)],
                                          tgt[static_cast<std::size_t>(j)]);
      }
    }
    const auto [perm_bf, best] = brute_force(cost);
    const auto result = lap_loss(est, tgt);
    CHECK(result.loss == doctest::Approx(best));
    // symmetric in argument order
    CHECK(lap_loss(tgt, est).loss == doctest::Approx(result.loss));
  }

  std::vector<ComponentTriple> three(target.begin(), target.begin() + 3);
  CHECK_THROWS_AS(lap_loss(three, target), ValidationError);
}
