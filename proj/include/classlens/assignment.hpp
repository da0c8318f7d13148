#pragma once

// Rectangular min-cost bipartite assignment with forbidden pairs.

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace classlens {

/// Row-major cost matrix; nullopt entries are forbidden pairs.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::optional<double>> cells;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), cells(r * c) {}

  std::optional<double>& at(std::size_t r, std::size_t c) { return cells[r * cols + c]; }
  const std::optional<double>& at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
};

/// Assignment result: match[r] is the column assigned to row r, if any.
struct Assignment {
  std::vector<std::optional<std::size_t>> match;
  double total_cost = 0.0;
  std::size_t matched = 0;
};

/// Maximum-cardinality matching over allowed pairs, and among those the one
/// of least total cost. Solved exactly with the Hungarian method on a padded
/// square matrix where forbidden pairs carry a penalty larger than any
/// feasible total.
inline Assignment solve_assignment(const CostMatrix& m) {
  Assignment out;
  out.match.assign(m.rows, std::nullopt);
  if (m.rows == 0 || m.cols == 0) return out;

  const std::size_t n = std::max(m.rows, m.cols);
  double max_cost = 0.0;
  for (const auto& c : m.cells)
    if (c) max_cost = std::max(max_cost, std::abs(*c));
  const double penalty = (max_cost + 1.0) * static_cast<double>(n + 1);

  auto cost = [&](std::size_t r, std::size_t c) -> double {
    if (r >= m.rows || c >= m.cols) return 0.0;
    const auto& v = m.at(r, c);
    return v ? *v : penalty;
  };

  // Potentials formulation, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
    const std::size_t r = p[j] - 1;
    const std::size_t c = j - 1;
    if (r < m.rows && c < m.cols && m.at(r, c)) {
      out.match[r] = c;
      out.total_cost += *m.at(r, c);
      ++out.matched;
    }
  }
  return out;
}

}  // namespace classlens
