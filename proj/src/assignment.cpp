#include "mmjoints/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmjoints {

namespace {

// Jonker-Volgenant style shortest augmenting path, O(n^3).
double solve_lap(const Matrix& cost, std::vector<int>& row_to_col) {
  const int n = static_cast<int>(cost.rows());
  row_to_col.assign(static_cast<std::size_t>(n), -1);
  if (n == 0) return 0.0;

  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1,
                             std::numeric_limits<double>::infinity());
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = 0;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    if (p[static_cast<std::size_t>(j)] > 0) {
      row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)]) - 1] = j - 1;
      total += cost(p[static_cast<std::size_t>(j)] - 1, j - 1);
    }
  }
  return total;
}

}  // namespace

Assignment hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw ValidationError("hungarian: matrix must be square");
  if (!cost.allFinite()) throw ValidationError("hungarian: matrix must be finite");
  const int n = static_cast<int>(cost.rows());

  std::vector<int> sol;
  const double optimal = solve_lap(cost, sol);
  if (n <= 1) return {sol, optimal};

  // Tie-break to the lexicographically smallest optimal permutation: fix rows
  // in order, accept the smallest column whose residual subproblem still
  // reaches the optimum. Tolerance scales with the cost magnitude.
  const double tol = 1e-9 * std::max(1.0, cost.cwiseAbs().maxCoeff()) * n;
  std::vector<int> fixed(static_cast<std::size_t>(n), -1);
  std::vector<char> col_taken(static_cast<std::size_t>(n), 0);
  std::vector<int> free_cols;
  double fixed_cost = 0.0;

  for (int i = 0; i < n; ++i) {
    const int rem = n - i - 1;
    for (int j = 0; j < n; ++j) {
      if (col_taken[static_cast<std::size_t>(j)]) continue;
      if (rem == 0) {
        fixed[static_cast<std::size_t>(i)] = j;
        break;
      }
      // Residual matrix over rows i+1..n-1 and untaken columns != j.
      free_cols.clear();
      for (int c = 0; c < n; ++c) {
        if (!col_taken[static_cast<std::size_t>(c)] && c != j) free_cols.push_back(c);
      }
      Matrix sub(rem, rem);
      for (int r = 0; r < rem; ++r) {
        for (int c = 0; c < rem; ++c) {
          sub(r, c) = cost(i + 1 + r, free_cols[static_cast<std::size_t>(c)]);
        }
      }
      std::vector<int> sub_sol;
      const double sub_cost = solve_lap(sub, sub_sol);
      if (fixed_cost + cost(i, j) + sub_cost <= optimal + tol) {
        fixed[static_cast<std::size_t>(i)] = j;
        break;
      }
    }
    const int j = fixed[static_cast<std::size_t>(i)];
    col_taken[static_cast<std::size_t>(j)] = 1;
    fixed_cost += cost(i, j);
  }

  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost(i, fixed[static_cast<std::size_t>(i)]);
  return {fixed, total};
}

double component_assessment(const ComponentTriple& a, const ComponentTriple& b) {
  if (a.mean.size() != b.mean.size() || a.cov_diag.size() != b.cov_diag.size()) {
    throw ValidationError("component_assessment: dimension mismatch");
  }
  return std::abs(a.weight - b.weight) + (a.mean - b.mean).lpNorm<1>() +
         (a.cov_diag - b.cov_diag).lpNorm<1>();
}

LapResult lap_loss(std::span<const ComponentTriple> estimated,
                   std::span<const ComponentTriple> target) {
  if (estimated.size() != target.size()) {
    throw ValidationError("lap_loss: component counts must match");
  }
  const int g = static_cast<int>(estimated.size());
  Matrix cost(g, g);
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      cost(i, j) = component_assessment(estimated[static_cast<std::size_t>(i)],
                                        target[static_cast<std::size_t>(j)]);
    }
  }
  const Assignment a = hungarian(cost);
  return {a.total_cost, a.permutation};
}

}  // namespace mmjoints
