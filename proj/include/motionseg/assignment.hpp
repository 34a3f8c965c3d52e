#pragma once

#include <utility>
#include <vector>

#include "motionseg/grid.hpp"
#include "motionseg/types.hpp"

namespace motionseg {

// rows = slots (K), cols = instances (S); lower cost is better.
class CostMatrix {
 public:
  CostMatrix(int rows, int cols, double fill = 0.0);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

 private:
  int rows_;
  int cols_;
  std::vector<double> data_;
};

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (slot, instance), ascending slot
  std::vector<int> unmatched_slots;        // ascending
  double total_cost = 0.0;

  // Instance matched to a slot, or -1.
  int instance_for(int slot) const;
};

// 1 - softIoU with softIoU = sum min(m, p) / sum max(m, p); two empty masks
// have IoU 1.
double mask_cost(const Grid<double>& slot_mask, const BinaryMask& instance_mask);

// Minimum-cost assignment with min(K, S) pairs. Among optimal assignments
// the lexicographically smallest slot-ordered pair list is returned.
MatchResult hungarian(const CostMatrix& costs);

// Convenience: costs from mask_cost over every (slot, instance) pair.
CostMatrix mask_cost_matrix(const std::vector<Grid<double>>& slot_masks,
                            const std::vector<BinaryMask>& instance_masks);

}  // namespace motionseg
