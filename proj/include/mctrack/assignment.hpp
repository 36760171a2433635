#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mctrack {

constexpr double kForbidden = std::numeric_limits<double>::infinity();

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), row-ascending
  double cost = 0.0;
};

namespace detail {

// Potentials-based shortest-augmenting-path assignment for a dense
// rectangular matrix with n <= m. Runs in O(n^2 m). Costs must be finite.
inline std::vector<int> solve_rows_to_cols(
    const std::vector<std::vector<double>>& a, int n, int m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace detail

/// Minimum-cost one-to-one assignment over a dense cost matrix. Entries set
/// to infinity mark forbidden pairs. Among assignments that never use a
/// forbidden pair, one of maximum cardinality and minimum total cost is
/// returned; when every pair is forbidden the assignment is empty.
inline Assignment hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  Assignment result;
  if (n == 0 || m == 0) return result;

  double max_abs = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double c = cost(i, j);
      if (std::isnan(c)) throw std::invalid_argument("hungarian: NaN cost");
      if (std::isfinite(c)) max_abs = std::max(max_abs, std::abs(c));
    }
  }
  // Forbidden entries become a sentinel so large that using one extra of
  // them can never pay off; matches through the sentinel are dropped below.
  const double big =
      2.0 * (max_abs + 1.0) * (static_cast<double>(std::min(n, m)) + 1.0);

  const bool transposed = n > m;
  const int rows = transposed ? m : n;
  const int cols = transposed ? n : m;
  std::vector<std::vector<double>> a(rows, std::vector<double>(cols));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double c = transposed ? cost(j, i) : cost(i, j);
      a[i][j] = std::isfinite(c) ? c : big;
    }
  }

  const std::vector<int> row_to_col = detail::solve_rows_to_cols(a, rows, cols);
  for (int i = 0; i < rows; ++i) {
    const int j = row_to_col[i];
    if (j < 0) continue;
    const int r = transposed ? j : i;
    const int c = transposed ? i : j;
    if (!std::isfinite(cost(r, c))) continue;
    result.pairs.emplace_back(r, c);
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  for (const auto& [r, c] : result.pairs) result.cost += cost(r, c);
  return result;
}

}  // namespace mctrack
