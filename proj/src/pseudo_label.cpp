#include "motionseg/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace motionseg {
namespace {

// d/dx or d/dy of one flow component at (x, y) with replicate padding.
double derivative(const Grid<float>& f, int x, int y, bool along_x, GradientOperator op) {
  const int w = f.width();
  const int h = f.height();
  auto at = [&](int xx, int yy) {
    return static_cast<double>(f(std::clamp(xx, 0, w - 1), std::clamp(yy, 0, h - 1)));
  };
  if (op == GradientOperator::Central) {
    return along_x ? 0.5 * (at(x + 1, y) - at(x - 1, y))
                   : 0.5 * (at(x, y + 1) - at(x, y - 1));
  }
  double sum = 0.0;
  for (int t = -1; t <= 1; ++t) {
    const double weight = t == 0 ? 2.0 : 1.0;
    sum += along_x ? weight * (at(x + 1, y + t) - at(x - 1, y + t))
                   : weight * (at(x + t, y + 1) - at(x + t, y - 1));
  }
  return sum;
}

double grad_norm_at(const FlowField& flow, int x, int y, GradientOperator op) {
  const double ux = derivative(flow.u(), x, y, true, op);
  const double uy = derivative(flow.u(), x, y, false, op);
  const double vx = derivative(flow.v(), x, y, true, op);
  const double vy = derivative(flow.v(), x, y, false, op);
  return std::sqrt(ux * ux + uy * uy + vx * vx + vy * vy);
}

void standardize_jointly(PointSet& pts, int first_col, int cols, double floor, double weight) {
  const int n = pts.size();
  double total_var = 0.0;
  std::vector<double> mean(static_cast<std::size_t>(cols), 0.0);
  for (int c = 0; c < cols; ++c) {
    for (int i = 0; i < n; ++i) mean[static_cast<std::size_t>(c)] += pts(i, first_col + c);
    mean[static_cast<std::size_t>(c)] /= n;
    for (int i = 0; i < n; ++i) {
      const double d = pts(i, first_col + c) - mean[static_cast<std::size_t>(c)];
      total_var += d * d;
    }
  }
  const double scale = std::max(std::sqrt(total_var / (static_cast<double>(n) * cols)), floor);
  for (int c = 0; c < cols; ++c) {
    for (int i = 0; i < n; ++i) {
      pts(i, first_col + c) =
          weight * (pts(i, first_col + c) - mean[static_cast<std::size_t>(c)]) / scale;
    }
  }
}

}  // namespace

void PseudoLabelConfig::validate() const {
  if (!(tau_fg > 0.0)) throw Error(ErrorCode::BadConfig, "tau_fg must be positive");
  if (!(tau_grad > 0.0)) throw Error(ErrorCode::BadConfig, "tau_grad must be positive");
  if (min_component_px < 1) throw Error(ErrorCode::BadConfig, "min_component_px must be >= 1");
  if (connectivity != 4 && connectivity != 8) {
    throw Error(ErrorCode::BadConfig, "connectivity must be 4 or 8");
  }
  if (clustering.min_cluster_size < 2 || clustering.min_samples < 1) {
    throw Error(ErrorCode::BadConfig, "invalid clustering parameters");
  }
  if (!(scaling.magnitude_std_floor > 0.0) || !(scaling.angle_std_floor > 0.0) ||
      !(scaling.spatial_weight >= 0.0)) {
    throw Error(ErrorCode::BadConfig, "invalid feature scaling");
  }
}

BinaryMask foreground_mask(const FlowField& flow, double tau_fg) {
  if (!(tau_fg > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau_fg must be positive");
  BinaryMask mask(flow.width(), flow.height(), 0);
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) mask(x, y) = flow.magnitude(x, y) > tau_fg ? 1 : 0;
  }
  return mask;
}

LabelMap connected_components(const BinaryMask& mask, int connectivity, int min_component_px) {
  if (connectivity != 4 && connectivity != 8) {
    throw Error(ErrorCode::InvalidArgument, "connectivity must be 4 or 8");
  }
  const int w = mask.width();
  const int h = mask.height();
  Grid<std::uint32_t> raw(w, h, 0);
  std::uint32_t next = 0;
  std::vector<std::pair<int, int>> members;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y) || raw(x, y) != 0) continue;
      ++next;
      members.clear();
      raw(x, y) = next;
      queue.emplace_back(x, y);
      while (!queue.empty()) {
        const auto [cx, cy] = queue.front();
        queue.pop_front();
        members.emplace_back(cx, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (connectivity == 4 && dx != 0 && dy != 0) continue;
            const int nx = cx + dx;
            const int ny = cy + dy;
            if (!mask.contains(nx, ny) || !mask(nx, ny) || raw(nx, ny) != 0) continue;
            raw(nx, ny) = next;
            queue.emplace_back(nx, ny);
          }
        }
      }
      if (static_cast<int>(members.size()) < min_component_px) {
        for (const auto& [mx, my] : members) raw(mx, my) = std::numeric_limits<std::uint32_t>::max();
      }
    }
  }
  // Dropped components were parked at UINT32_MAX so the flood fill skips them.
  for (auto& id : raw.values()) {
    if (id == std::numeric_limits<std::uint32_t>::max()) id = 0;
  }
  return LabelMap::from_raw(raw);
}

BinaryMask erode(const BinaryMask& mask) {
  BinaryMask out(mask.width(), mask.height(), 0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      bool interior = true;
      for (int dy = -1; dy <= 1 && interior; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!mask.contains(x + dx, y + dy) || !mask(x + dx, y + dy)) {
            interior = false;
            break;
          }
        }
      }
      out(x, y) = interior ? 1 : 0;
    }
  }
  return out;
}

Grid<double> flow_gradient_norm(const FlowField& flow, GradientOperator op) {
  Grid<double> out(flow.width(), flow.height(), 0.0);
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) out(x, y) = grad_norm_at(flow, x, y, op);
  }
  return out;
}

bool needs_split(const FlowField& flow, const BinaryMask& component, double tau_grad,
                 GradientOperator op) {
  if (!component.same_shape(flow.width(), flow.height())) {
    throw Error(ErrorCode::DimensionMismatch, "component mask differs from flow size");
  }
  const auto interior = erode(component);
  for (int y = 0; y < interior.height(); ++y) {
    for (int x = 0; x < interior.width(); ++x) {
      if (interior(x, y) && grad_norm_at(flow, x, y, op) > tau_grad) return true;
    }
  }
  return false;
}

PointSet component_features(const FlowField& flow, const BinaryMask& component,
                            const FeatureScaling& scaling) {
  const int n = static_cast<int>(count(component));
  PointSet pts(n, 5);
  int i = 0;
  for (int y = 0; y < component.height(); ++y) {
    for (int x = 0; x < component.width(); ++x) {
      if (!component(x, y)) continue;
      const double u = flow.u()(x, y);
      const double v = flow.v()(x, y);
      const double theta = std::atan2(v, u);
      pts(i, 0) = std::hypot(u, v);
      pts(i, 1) = std::cos(theta);
      pts(i, 2) = std::sin(theta);
      pts(i, 3) = x;
      pts(i, 4) = y;
      ++i;
    }
  }
  if (n == 0) return pts;
  standardize_jointly(pts, 0, 1, scaling.magnitude_std_floor, 1.0);
  standardize_jointly(pts, 1, 2, scaling.angle_std_floor, 1.0);
  standardize_jointly(pts, 3, 2, std::numeric_limits<double>::min(), scaling.spatial_weight);
  return pts;
}

LabelMap split_component(const FlowField& flow, const BinaryMask& component,
                         const HdbscanParams& params, const FeatureScaling& scaling) {
  if (!component.same_shape(flow.width(), flow.height())) {
    throw Error(ErrorCode::DimensionMismatch, "component mask differs from flow size");
  }
  const auto pts = component_features(flow, component, scaling);
  const int n = pts.size();
  Grid<std::uint32_t> raw(component.width(), component.height(), 0);
  if (n == 0) return LabelMap::from_raw(raw);

  auto assignment = hdbscan(pts, params);
  const int clusters = assignment.cluster_count();
  if (clusters == 0) {
    // ClusteringDegenerate: keep the component whole.
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = component[i] ? 1 : 0;
    return LabelMap::from_raw(raw);
  }

  if (assignment.noise_count() > 0) {
    const int d = pts.dim();
    std::vector<double> centroid(static_cast<std::size_t>(clusters * d), 0.0);
    std::vector<int> members(static_cast<std::size_t>(clusters), 0);
    for (int i = 0; i < n; ++i) {
      const int c = assignment.labels[static_cast<std::size_t>(i)];
      if (c < 0) continue;
      ++members[static_cast<std::size_t>(c)];
      for (int j = 0; j < d; ++j) centroid[static_cast<std::size_t>(c * d + j)] += pts(i, j);
    }
    for (int c = 0; c < clusters; ++c) {
      for (int j = 0; j < d; ++j) {
        centroid[static_cast<std::size_t>(c * d + j)] /= members[static_cast<std::size_t>(c)];
      }
    }
    for (int i = 0; i < n; ++i) {
      auto& label = assignment.labels[static_cast<std::size_t>(i)];
      if (label >= 0) continue;
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < clusters; ++c) {
        double dist = 0.0;
        for (int j = 0; j < d; ++j) {
          const double diff = pts(i, j) - centroid[static_cast<std::size_t>(c * d + j)];
          dist += diff * diff;
        }
        if (dist < best) {
          best = dist;
          label = c;
        }
      }
    }
  }

  int i = 0;
  for (int y = 0; y < component.height(); ++y) {
    for (int x = 0; x < component.width(); ++x) {
      if (!component(x, y)) continue;
      raw(x, y) = static_cast<std::uint32_t>(assignment.labels[static_cast<std::size_t>(i++)] + 1);
    }
  }
  return LabelMap::from_raw(raw);
}

PseudoLabel generate_pseudo_label(const FlowField& flow, const PseudoLabelConfig& config,
                                  std::string source_frame) {
  config.validate();
  const auto fg = foreground_mask(flow, config.tau_fg);
  const auto components = connected_components(fg, config.connectivity, config.min_component_px);

  Grid<std::uint32_t> raw(flow.width(), flow.height(), 0);
  std::uint32_t next = 0;
  for (int c = 1; c <= components.instance_count(); ++c) {
    const auto component = components.mask(c);
    if (needs_split(flow, component, config.tau_grad, config.gradient)) {
      const auto local = split_component(flow, component, config.clustering, config.scaling);
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (local[i] > 0) raw[i] = next + static_cast<std::uint32_t>(local[i]);
      }
      next += static_cast<std::uint32_t>(local.instance_count());
    } else {
      ++next;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (component[i]) raw[i] = next;
      }
    }
  }
  PseudoLabel label;
  label.instances = LabelMap::from_raw(raw);
  label.fg = label.instances.foreground();
  label.source_frame = std::move(source_frame);
  return label;
}

}  // namespace motionseg
