#pragma once

// Kuhn-Munkres with row/column potentials, O(n^3) on the padded square matrix.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

namespace propseg {

// Assignment maximising the total score of a rows x cols matrix (row-major).
// Returns, per row, the assigned column or -1. Rectangular inputs are padded
// with zero-score dummies, so every row gets a column when rows <= cols.
inline std::vector<int> max_score_assignment(const std::vector<double>& scores, std::size_t rows, std::size_t cols) {
  std::vector<int> assignment(rows, -1);
  if (rows == 0 || cols == 0) return assignment;
  const std::size_t n = std::max(rows, cols);
  auto cost = [&](std::size_t i, std::size_t j) -> double {
    // 1-based indices into the padded matrix.
    if (i > rows || j > cols) return 0.0;
    return -scores[(i - 1) * cols + (j - 1)];
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] >= 1 && p[j] <= rows && j <= cols) assignment[p[j] - 1] = static_cast<int>(j - 1);
  }
  return assignment;
}

}  // namespace propseg
