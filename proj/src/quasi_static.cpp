#include "motionseg/quasi_static.hpp"

#include <algorithm>
#include <cmath>

namespace motionseg {

int corner_patch_extent(int extent, double patch_fraction) {
  // The epsilon keeps products like 0.15 * 20 from rounding up past 3.
  const double raw = std::ceil(patch_fraction * extent - 1e-9);
  return std::clamp(static_cast<int>(raw), 1, extent);
}

CornerStats corner_stats(const FlowField& flow, double patch_fraction) {
  if (!(patch_fraction > 0.0 && patch_fraction <= 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "patch_fraction must lie in (0, 0.5]");
  }
  if (flow.width() < 2 || flow.height() < 2) {
    throw Error(ErrorCode::DegenerateImage, "corner statistics need at least a 2x2 field");
  }
  CornerStats stats;
  stats.patch_fraction = patch_fraction;
  stats.patch_width = corner_patch_extent(flow.width(), patch_fraction);
  stats.patch_height = corner_patch_extent(flow.height(), patch_fraction);

  const int x_origin[4] = {0, flow.width() - stats.patch_width, 0,
                           flow.width() - stats.patch_width};
  const int y_origin[4] = {0, 0, flow.height() - stats.patch_height,
                           flow.height() - stats.patch_height};
  const double pixels = static_cast<double>(stats.patch_width) * stats.patch_height;
  for (int c = 0; c < 4; ++c) {
    double sum = 0.0;
    for (int y = y_origin[c]; y < y_origin[c] + stats.patch_height; ++y) {
      for (int x = x_origin[c]; x < x_origin[c] + stats.patch_width; ++x) {
        sum += flow.magnitude(x, y);
      }
    }
    stats.mean_magnitudes[static_cast<std::size_t>(c)] = sum / pixels;
  }
  return stats;
}

bool is_quasi_static(const CornerStats& stats, double tau_static) {
  if (!(tau_static > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tau_static must be positive");
  }
  const auto below = std::count_if(stats.mean_magnitudes.begin(), stats.mean_magnitudes.end(),
                                   [&](double m) { return m < tau_static; });
  return below >= 3;
}

}  // namespace motionseg
