#pragma once

#include <span>
#include <vector>

#include "motionseg/error.hpp"

namespace motionseg {

// n points in d dimensions, row-major.
class PointSet {
 public:
  PointSet() = default;
  PointSet(int n, int d) : n_(n), d_(d), data_(static_cast<std::size_t>(n) * d, 0.0) {
    if (n < 0 || d < 1) throw Error(ErrorCode::InvalidArgument, "bad point set shape");
  }
  PointSet(int n, int d, std::vector<double> data);

  int size() const noexcept { return n_; }
  int dim() const noexcept { return d_; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * d_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * d_ + j]; }
  std::span<const double> row(int i) const {
    return {data_.data() + static_cast<std::size_t>(i) * d_, static_cast<std::size_t>(d_)};
  }
  double distance(int a, int b) const;

 private:
  int n_ = 0;
  int d_ = 1;
  std::vector<double> data_;
};

struct HdbscanParams {
  int min_cluster_size = 25;
  int min_samples = 10;
  // Lets the root of the condensed tree be selected, so a single dense
  // group comes back as one cluster instead of noise.
  bool allow_single_cluster = true;
};

struct MstEdge {
  int a = 0;
  int b = 0;
  double weight = 0.0;
};

struct ClusterAssignment {
  std::vector<int> labels;  // -1 = noise, clusters 0..C-1
  std::vector<double> stabilities;

  int cluster_count() const noexcept { return static_cast<int>(stabilities.size()); }
  int noise_count() const;
};

// Distance to the min_samples-th nearest neighbour, the point itself excluded.
// O(n^2 d) brute force.
std::vector<double> core_distances(const PointSet& points, int min_samples);

// Prim's algorithm over the dense mutual-reachability graph,
// d(a,b) = max(core_a, core_b, |a-b|). Returns n-1 edges sorted by
// (weight, min index, max index). O(n^2 d) time, O(n) memory.
std::vector<MstEdge> mutual_reachability_mst(const PointSet& points,
                                             std::span<const double> core);

// Single-linkage hierarchy -> condensed tree -> excess-of-mass selection.
ClusterAssignment extract_clusters(std::span<const MstEdge> mst, int point_count,
                                   int min_cluster_size, bool allow_single_cluster = true);

ClusterAssignment hdbscan(const PointSet& points, const HdbscanParams& params);

}  // namespace motionseg
