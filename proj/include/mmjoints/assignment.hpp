#pragma once

#include "mmjoints/gaussian.hpp"

#include <span>
#include <vector>

namespace mmjoints {

struct Assignment {
  std::vector<int> permutation;  // row i -> column permutation[i]
  double total_cost = 0.0;
};

/// Minimum-cost assignment on a square finite matrix. Among all optimal
/// assignments, returns the lexicographically smallest permutation.
Assignment hungarian(const Matrix& cost);

/// l1 gap between two mixture-component triples:
/// |w_a - w_b| + sum|mu_a - mu_b| + sum|cov_a - cov_b|.
/// Symmetric, non-negative, zero iff identical.
double component_assessment(const ComponentTriple& a, const ComponentTriple& b);

struct LapResult {
  double loss = 0.0;
  std::vector<int> matching;  // estimated i -> target matching[i]
};

/// Permutation-invariant mixture matching loss: Hungarian over the pairwise
/// component_assessment matrix.
LapResult lap_loss(std::span<const ComponentTriple> estimated,
                   std::span<const ComponentTriple> target);

}  // namespace mmjoints
