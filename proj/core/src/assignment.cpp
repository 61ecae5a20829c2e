#include "neuracodec/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "neuracodec/errors.hpp"

namespace neuracodec {

CostMatrix::CostMatrix(std::size_t n, std::vector<double> data) : n_(n), data_(std::move(data)) {
  if (data_.size() != n_ * n_) throw ShapeError("cost matrix must be square");
}

namespace {

struct Potentials {
  std::vector<double> row;
  std::vector<double> col;
  std::vector<std::size_t> column_of_row;
};

// Shortest augmenting path Hungarian algorithm, O(n^3). Index 0 is a sentinel.
Potentials solve(const CostMatrix& a) {
  const std::size_t n = a.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
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
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Potentials p;
  p.row.assign(u.begin() + 1, u.end());
  p.col.assign(v.begin() + 1, v.end());
  p.column_of_row.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) p.column_of_row[match[j] - 1] = j - 1;
  return p;
}

}  // namespace

Assignment hungarian_assign(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double c = cost(i, j);
      if (!std::isfinite(c)) throw DataError("cost matrix has a non-finite entry at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      if (c < 0.0) throw DataError("cost matrix has a negative entry at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      scale = std::max(scale, c);
    }
  Assignment result;
  if (n == 0) return result;

  Potentials p = solve(cost);
  const double eps = 1e-9 * (1.0 + scale) * static_cast<double>(n);

  // Every optimal matching uses only edges that are tight under the optimal
  // dual, so the lexicographic tie-break is a search over the tight subgraph.
  std::vector<std::vector<std::size_t>> tight(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (std::abs(cost(i, j) - p.row[i] - p.col[j]) <= eps) tight[i].push_back(j);

  std::vector<std::size_t> col_of_row = p.column_of_row;
  std::vector<std::size_t> row_of_col(n);
  for (std::size_t i = 0; i < n; ++i) row_of_col[col_of_row[i]] = i;
  std::vector<bool> locked(n, false);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c : tight[i]) {
      if (c >= col_of_row[i]) break;
      if (locked[row_of_col[c]]) continue;
      // Try to give column c to row i: the row holding c must move to another
      // tight column, ending at the column row i releases.
      auto trial_cor = col_of_row;
      auto trial_roc = row_of_col;
      const std::size_t freed = trial_cor[i];
      const std::size_t displaced = trial_roc[c];
      trial_roc[freed] = n;  // placeholder: free
      std::vector<bool> visited(n, false);
      visited[c] = true;
      bool ok = false;
      // Depth-first alternating path from the displaced row to the freed column.
      std::vector<std::size_t> stack_rows{displaced};
      std::vector<std::size_t> parent_col(n, n);
      std::vector<std::size_t> via_row(n, n);
      while (!stack_rows.empty() && !ok) {
        const std::size_t r = stack_rows.back();
        stack_rows.pop_back();
        for (std::size_t cc : tight[r]) {
          if (visited[cc]) continue;
          if (cc != freed && locked[trial_roc[cc]]) continue;
          visited[cc] = true;
          via_row[cc] = r;
          if (cc == freed) {
            ok = true;
            break;
          }
          stack_rows.push_back(trial_roc[cc]);
        }
      }
      if (!ok) continue;
      // Walk back from the freed column shifting each row along the path.
      std::size_t cc = freed;
      while (true) {
        const std::size_t r = via_row[cc];
        const std::size_t prev = trial_cor[r];
        trial_cor[r] = cc;
        trial_roc[cc] = r;
        if (r == displaced) break;
        cc = prev;
      }
      trial_cor[i] = c;
      trial_roc[c] = i;
      col_of_row = std::move(trial_cor);
      row_of_col = std::move(trial_roc);
      break;
    }
    locked[i] = true;
  }

  result.column_of_row = std::move(col_of_row);
  for (std::size_t i = 0; i < n; ++i) result.cost += cost(i, result.column_of_row[i]);
  return result;
}

}  // namespace neuracodec
