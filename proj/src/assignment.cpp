#include "motionseg/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace motionseg {
namespace {

// Shortest-augmenting-path Hungarian (potentials), rows <= cols.
// Returns col index per row.
std::vector<int> solve_rows_le_cols(const std::vector<double>& a, int n, int m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(m + 1), 0);
  std::vector<int> way(static_cast<std::size_t>(m + 1), 0);
  auto cost = [&](int i, int j) {
    return a[static_cast<std::size_t>(i - 1) * m + static_cast<std::size_t>(j - 1)];
  };
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0, j) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
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
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (p[static_cast<std::size_t>(j)] != 0) {
      row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    }
  }
  return row_to_col;
}

// Optimal cost of matching the given rows to the given columns
// (min(|rows|, |cols|) pairs).
double optimal_cost(const CostMatrix& costs, const std::vector<int>& rows,
                    const std::vector<int>& cols) {
  if (rows.empty() || cols.empty()) return 0.0;
  const bool transpose = rows.size() > cols.size();
  const auto& r = transpose ? cols : rows;
  const auto& c = transpose ? rows : cols;
  const int n = static_cast<int>(r.size());
  const int m = static_cast<int>(c.size());
  std::vector<double> a(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      a[static_cast<std::size_t>(i) * m + j] =
          transpose ? costs(c[static_cast<std::size_t>(j)], r[static_cast<std::size_t>(i)])
                    : costs(r[static_cast<std::size_t>(i)], c[static_cast<std::size_t>(j)]);
    }
  }
  const auto match = solve_rows_le_cols(a, n, m);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += a[static_cast<std::size_t>(i) * m + match[static_cast<std::size_t>(i)]];
  return total;
}

}  // namespace

CostMatrix::CostMatrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols),
      data_(static_cast<std::size_t>(std::max(rows, 0)) * std::max(cols, 0), fill) {
  if (rows < 0 || cols < 0) throw Error(ErrorCode::InvalidArgument, "negative cost matrix size");
}

int MatchResult::instance_for(int slot) const {
  for (const auto& [s, inst] : pairs) {
    if (s == slot) return inst;
  }
  return -1;
}

double mask_cost(const Grid<double>& slot_mask, const BinaryMask& instance_mask) {
  require_same_shape(slot_mask, instance_mask, "slot mask and instance mask differ in size");
  double inter = 0.0;
  double uni = 0.0;
  for (std::size_t i = 0; i < slot_mask.size(); ++i) {
    const double m = slot_mask[i];
    const double p = instance_mask[i] ? 1.0 : 0.0;
    inter += std::min(m, p);
    uni += std::max(m, p);
  }
  const double soft_iou = uni > 0.0 ? inter / uni : 1.0;
  return 1.0 - soft_iou;
}

MatchResult hungarian(const CostMatrix& costs) {
  const int k = costs.rows();
  const int s = costs.cols();
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < s; ++c) {
      if (!std::isfinite(costs(r, c))) {
        throw Error(ErrorCode::NonFinite, "cost matrix contains NaN or Inf");
      }
    }
  }
  MatchResult result;
  std::vector<int> free_rows(static_cast<std::size_t>(k));
  std::vector<int> free_cols(static_cast<std::size_t>(s));
  for (int r = 0; r < k; ++r) free_rows[static_cast<std::size_t>(r)] = r;
  for (int c = 0; c < s; ++c) free_cols[static_cast<std::size_t>(c)] = c;
  const int target_pairs = std::min(k, s);
  if (target_pairs == 0) {
    result.unmatched_slots = free_rows;
    return result;
  }

  const double best = optimal_cost(costs, free_rows, free_cols);
  const double tol = 1e-12 * (1.0 + std::abs(best));

  // Fix rows in order, trying columns ascending and "unmatched" last; keep
  // the first choice that still admits an optimal completion.
  double committed = 0.0;
  for (int r = 0; r < k; ++r) {
    std::vector<int> rest_rows(free_rows.begin() + 1, free_rows.end());
    const int pairs_left = target_pairs - static_cast<int>(result.pairs.size());
    bool fixed = false;
    if (pairs_left > 0) {
      for (std::size_t ci = 0; ci < free_cols.size() && !fixed; ++ci) {
        const int c = free_cols[ci];
        std::vector<int> rest_cols = free_cols;
        rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(ci));
        const int achievable = std::min(static_cast<int>(rest_rows.size()),
                                        static_cast<int>(rest_cols.size()));
        if (achievable < pairs_left - 1) continue;
        const double total = committed + costs(r, c) + optimal_cost(costs, rest_rows, rest_cols);
        if (total <= best + tol) {
          result.pairs.emplace_back(r, c);
          committed += costs(r, c);
          free_cols = std::move(rest_cols);
          fixed = true;
        }
      }
    }
    if (!fixed) result.unmatched_slots.push_back(r);
    free_rows.erase(free_rows.begin());
  }
  // Summed in slot order.
  result.total_cost = 0.0;
  for (const auto& [r, c] : result.pairs) result.total_cost += costs(r, c);
  return result;
}

CostMatrix mask_cost_matrix(const std::vector<Grid<double>>& slot_masks,
                            const std::vector<BinaryMask>& instance_masks) {
  CostMatrix costs(static_cast<int>(slot_masks.size()), static_cast<int>(instance_masks.size()));
  for (std::size_t r = 0; r < slot_masks.size(); ++r) {
    for (std::size_t c = 0; c < instance_masks.size(); ++c) {
      costs(static_cast<int>(r), static_cast<int>(c)) = mask_cost(slot_masks[r], instance_masks[c]);
    }
  }
  return costs;
}

}  // namespace motionseg
