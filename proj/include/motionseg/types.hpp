#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "motionseg/grid.hpp"

namespace motionseg {

// Dense forward flow in px/frame. Stored as 32-bit floats so .flo payloads
// round-trip bit-exactly; arithmetic downstream is done in double.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int width, int height);
  FlowField(Grid<float> u, Grid<float> v);

  // Planar 2×H×W buffer (all u, then all v), the layout array bindings hand over.
  static FlowField from_planar(std::span<const float> data, int width, int height);
  std::vector<float> to_planar() const;

  int width() const noexcept { return u_.width(); }
  int height() const noexcept { return u_.height(); }

  Grid<float>& u() noexcept { return u_; }
  Grid<float>& v() noexcept { return v_; }
  const Grid<float>& u() const noexcept { return u_; }
  const Grid<float>& v() const noexcept { return v_; }

  double magnitude(int x, int y) const;
  bool all_finite() const;

  friend bool operator==(const FlowField&, const FlowField&) = default;

 private:
  Grid<float> u_;
  Grid<float> v_;
};

using BinaryMask = Grid<std::uint8_t>;

std::size_t count(const BinaryMask& mask);

// Per-pixel instance IDs, 0 = background, instances 1..S contiguous.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int width, int height) : labels_(width, height, 0) {}

  // Relabels raw IDs to 1..S in first-occurrence raster order (0 stays 0).
  static LabelMap from_raw(const Grid<std::uint32_t>& raw);
  static LabelMap from_masks(std::span<const BinaryMask> masks, int width, int height);

  int width() const noexcept { return labels_.width(); }
  int height() const noexcept { return labels_.height(); }
  int instance_count() const noexcept { return count_; }

  int operator()(int x, int y) const { return labels_(x, y); }
  int operator[](std::size_t i) const { return labels_[i]; }
  const Grid<int>& labels() const noexcept { return labels_; }

  BinaryMask mask(int id) const;
  BinaryMask foreground() const;
  // Index 0 holds instance 1.
  std::vector<BinaryMask> masks() const;
  std::vector<std::size_t> areas() const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  Grid<int> labels_;
  int count_ = 0;
};

}  // namespace motionseg
