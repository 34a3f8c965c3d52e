#include "motionseg/hdbscan.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace motionseg {
namespace {

// Stand-in for 1/0 when points coincide; large but finite so stability sums
// stay comparable.
constexpr double kMaxLambda = 1e300;

double lambda_of(double distance) { return distance > 0.0 ? 1.0 / distance : kMaxLambda; }

struct Merge {
  int left = 0;
  int right = 0;
  double distance = 0.0;
  int size = 0;
};

class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  void link(int child, int root) { parent_[static_cast<std::size_t>(child)] = root; }

 private:
  std::vector<int> parent_;
};

// Nodes 0..n-1 are points; merge i creates node n+i.
std::vector<Merge> single_linkage(std::span<const MstEdge> sorted_edges, int n) {
  std::vector<Merge> merges;
  merges.reserve(sorted_edges.size());
  DisjointSet components(2 * n - 1);
  std::vector<int> size(static_cast<std::size_t>(2 * n - 1), 1);
  int next = n;
  for (const auto& e : sorted_edges) {
    const int ra = components.find(e.a);
    const int rb = components.find(e.b);
    if (ra == rb) throw Error(ErrorCode::InvalidArgument, "edge list is not a spanning tree");
    const int s = size[static_cast<std::size_t>(ra)] + size[static_cast<std::size_t>(rb)];
    merges.push_back({ra, rb, e.weight, s});
    size[static_cast<std::size_t>(next)] = s;
    components.link(ra, next);
    components.link(rb, next);
    ++next;
  }
  return merges;
}

struct CondensedRow {
  int parent = 0;  // cluster id (>= n)
  int child = 0;   // point (< n) or cluster (>= n)
  double lambda = 0.0;
  int child_size = 0;
};

std::vector<CondensedRow> condense(const std::vector<Merge>& merges, int n,
                                   int min_cluster_size) {
  std::vector<CondensedRow> rows;
  const int root = 2 * n - 2;
  auto node_size = [&](int node) {
    return node < n ? 1 : merges[static_cast<std::size_t>(node - n)].size;
  };
  auto collect_points = [&](int node, std::vector<int>& out) {
    std::vector<int> stack{node};
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      if (cur < n) {
        out.push_back(cur);
      } else {
        const auto& m = merges[static_cast<std::size_t>(cur - n)];
        stack.push_back(m.right);
        stack.push_back(m.left);
      }
    }
  };

  std::vector<int> relabel(static_cast<std::size_t>(2 * n - 1), -1);
  relabel[static_cast<std::size_t>(root)] = n;
  int next_label = n + 1;
  std::deque<int> queue{root};
  std::vector<int> fallen;
  while (!queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    if (node < n) continue;
    const auto& m = merges[static_cast<std::size_t>(node - n)];
    const int cluster = relabel[static_cast<std::size_t>(node)];
    const double lambda = lambda_of(m.distance);
    const int left_size = node_size(m.left);
    const int right_size = node_size(m.right);
    const bool left_big = left_size >= min_cluster_size;
    const bool right_big = right_size >= min_cluster_size;

    auto spill = [&](int child) {
      fallen.clear();
      collect_points(child, fallen);
      for (int p : fallen) rows.push_back({cluster, p, lambda, 1});
    };

    if (left_big && right_big) {
      for (int child : {m.left, m.right}) {
        relabel[static_cast<std::size_t>(child)] = next_label++;
        rows.push_back({cluster, relabel[static_cast<std::size_t>(child)], lambda,
                        node_size(child)});
        queue.push_back(child);
      }
    } else if (!left_big && !right_big) {
      spill(m.left);
      spill(m.right);
    } else if (left_big) {
      spill(m.right);
      relabel[static_cast<std::size_t>(m.left)] = cluster;
      queue.push_back(m.left);
    } else {
      spill(m.left);
      relabel[static_cast<std::size_t>(m.right)] = cluster;
      queue.push_back(m.right);
    }
  }
  return rows;
}

}  // namespace

PointSet::PointSet(int n, int d, std::vector<double> data)
    : n_(n), d_(d), data_(std::move(data)) {
  if (n < 0 || d < 1 || data_.size() != static_cast<std::size_t>(n) * d) {
    throw Error(ErrorCode::InvalidArgument, "point data does not match n*d");
  }
  for (double x : data_) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "point set contains NaN or Inf");
  }
}

double PointSet::distance(int a, int b) const {
  double sum = 0.0;
  const double* pa = data_.data() + static_cast<std::size_t>(a) * d_;
  const double* pb = data_.data() + static_cast<std::size_t>(b) * d_;
  for (int j = 0; j < d_; ++j) {
    const double diff = pa[j] - pb[j];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

int ClusterAssignment::noise_count() const {
  return static_cast<int>(std::count(labels.begin(), labels.end(), -1));
}

std::vector<double> core_distances(const PointSet& points, int min_samples) {
  const int n = points.size();
  if (min_samples < 1) throw Error(ErrorCode::InvalidArgument, "min_samples must be >= 1");
  if (min_samples > n - 1) {
    throw Error(ErrorCode::TooFewPoints, "min_samples exceeds the number of other points");
  }
  std::vector<double> core(static_cast<std::size_t>(n));
  std::vector<double> row(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    std::size_t k = 0;
    for (int j = 0; j < n; ++j) {
      if (j != i) row[k++] = points.distance(i, j);
    }
    auto nth = row.begin() + (min_samples - 1);
    std::nth_element(row.begin(), nth, row.end());
    core[static_cast<std::size_t>(i)] = *nth;
  }
  return core;
}

std::vector<MstEdge> mutual_reachability_mst(const PointSet& points,
                                             std::span<const double> core) {
  const int n = points.size();
  if (core.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorCode::DimensionMismatch, "core distance count differs from point count");
  }
  std::vector<MstEdge> edges;
  if (n <= 1) return edges;
  edges.reserve(static_cast<std::size_t>(n - 1));

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> key(static_cast<std::size_t>(n), inf);
  std::vector<int> from(static_cast<std::size_t>(n), -1);
  std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
  int current = 0;
  in_tree[0] = 1;
  for (int step = 1; step < n; ++step) {
    const double core_cur = core[static_cast<std::size_t>(current)];
    int best = -1;
    double best_key = inf;
    for (int v = 0; v < n; ++v) {
      if (in_tree[static_cast<std::size_t>(v)]) continue;
      const double d = std::max({core_cur, core[static_cast<std::size_t>(v)],
                                 points.distance(current, v)});
      if (d < key[static_cast<std::size_t>(v)]) {
        key[static_cast<std::size_t>(v)] = d;
        from[static_cast<std::size_t>(v)] = current;
      }
      if (key[static_cast<std::size_t>(v)] < best_key) {
        best_key = key[static_cast<std::size_t>(v)];
        best = v;
      }
    }
    in_tree[static_cast<std::size_t>(best)] = 1;
    edges.push_back({from[static_cast<std::size_t>(best)], best, best_key});
    current = best;
  }
  for (auto& e : edges) {
    if (e.a > e.b) std::swap(e.a, e.b);
  }
  std::sort(edges.begin(), edges.end(), [](const MstEdge& x, const MstEdge& y) {
    if (x.weight != y.weight) return x.weight < y.weight;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  return edges;
}

ClusterAssignment extract_clusters(std::span<const MstEdge> mst, int point_count,
                                   int min_cluster_size, bool allow_single_cluster) {
  const int n = point_count;
  if (min_cluster_size < 2) {
    throw Error(ErrorCode::InvalidArgument, "min_cluster_size must be >= 2");
  }
  if (n < 1 || mst.size() != static_cast<std::size_t>(n - 1)) {
    throw Error(ErrorCode::InvalidArgument, "MST must have point_count - 1 edges");
  }
  ClusterAssignment result;
  result.labels.assign(static_cast<std::size_t>(n), -1);
  if (n < min_cluster_size) return result;

  std::vector<MstEdge> sorted(mst.begin(), mst.end());
  for (auto& e : sorted) {
    if (e.a > e.b) std::swap(e.a, e.b);
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const MstEdge& x, const MstEdge& y) {
    if (x.weight != y.weight) return x.weight < y.weight;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  const auto merges = single_linkage(sorted, n);
  const auto rows = condense(merges, n, min_cluster_size);

  // Clusters are labelled n, n+1, ... in creation order, so a child always
  // has a larger label than its parent.
  int max_cluster = n;
  for (const auto& r : rows) {
    if (r.child >= n) max_cluster = std::max(max_cluster, r.child);
  }
  const int cluster_slots = max_cluster - n + 1;
  auto slot = [n](int cluster) { return static_cast<std::size_t>(cluster - n); };

  std::vector<double> birth(static_cast<std::size_t>(cluster_slots), 0.0);
  std::vector<int> parent(static_cast<std::size_t>(cluster_slots), -1);
  for (const auto& r : rows) {
    if (r.child >= n) {
      birth[slot(r.child)] = r.lambda;
      parent[slot(r.child)] = r.parent;
    }
  }
  std::vector<double> stability(static_cast<std::size_t>(cluster_slots), 0.0);
  for (const auto& r : rows) {
    stability[slot(r.parent)] += (r.lambda - birth[slot(r.parent)]) * r.child_size;
  }

  // Excess of mass: leaves first.
  std::vector<char> selected(static_cast<std::size_t>(cluster_slots), 1);
  std::vector<double> own_stability = stability;
  std::vector<double> child_sum(static_cast<std::size_t>(cluster_slots), 0.0);
  const int lowest = allow_single_cluster ? n : n + 1;
  if (!allow_single_cluster) selected[0] = 0;
  for (int c = max_cluster; c >= lowest; --c) {
    bool has_children = false;
    for (int k = c + 1; k <= max_cluster; ++k) {
      if (parent[slot(k)] == c) has_children = true;
    }
    const double subtree = child_sum[slot(c)];
    if (has_children && subtree > stability[slot(c)]) {
      selected[slot(c)] = 0;
      stability[slot(c)] = subtree;
    } else {
      for (int k = c + 1; k <= max_cluster; ++k) {
        // Descendants have larger labels; walk each one's parent chain.
        for (int a = parent[slot(k)]; a >= n; a = parent[slot(a)]) {
          if (a == c) {
            selected[slot(k)] = 0;
            break;
          }
        }
      }
    }
    if (c > n) child_sum[slot(parent[slot(c)])] += stability[slot(c)];
  }

  // A point belongs to the nearest selected ancestor of the cluster it fell
  // out of; none selected means noise.
  std::vector<int> raw_label(static_cast<std::size_t>(n), -1);
  for (const auto& r : rows) {
    if (r.child >= n) continue;
    for (int a = r.parent; a >= n; a = parent[slot(a)]) {
      if (selected[slot(a)]) {
        raw_label[static_cast<std::size_t>(r.child)] = a;
        break;
      }
    }
  }

  // Renumber clusters by their smallest member index.
  std::vector<int> order;
  std::vector<int> remap(static_cast<std::size_t>(cluster_slots), -1);
  for (int p = 0; p < n; ++p) {
    const int c = raw_label[static_cast<std::size_t>(p)];
    if (c < 0) continue;
    if (remap[slot(c)] < 0) {
      remap[slot(c)] = static_cast<int>(order.size());
      order.push_back(c);
    }
    result.labels[static_cast<std::size_t>(p)] = remap[slot(c)];
  }
  for (int c : order) result.stabilities.push_back(own_stability[slot(c)]);
  return result;
}

ClusterAssignment hdbscan(const PointSet& points, const HdbscanParams& params) {
  const int n = points.size();
  if (params.min_cluster_size < 2 || params.min_samples < 1) {
    throw Error(ErrorCode::InvalidArgument, "invalid HDBSCAN parameters");
  }
  if (n < params.min_cluster_size) {
    ClusterAssignment all_noise;
    all_noise.labels.assign(static_cast<std::size_t>(n), -1);
    return all_noise;
  }
  const int min_samples = std::min(params.min_samples, n - 1);
  const auto core = core_distances(points, min_samples);
  const auto mst = mutual_reachability_mst(points, core);
  return extract_clusters(mst, n, params.min_cluster_size, params.allow_single_cluster);
}

}  // namespace motionseg
