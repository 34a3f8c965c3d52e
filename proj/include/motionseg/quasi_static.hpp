#pragma once

#include <array>

#include "motionseg/types.hpp"

namespace motionseg {

inline constexpr double kDefaultPatchFraction = 0.15;
inline constexpr double kTauStaticTriPd = 0.5;
inline constexpr double kTauStaticKitti = 1.7;

// Mean per-pixel flow magnitude in the four corner patches, ordered
// top-left, top-right, bottom-left, bottom-right.
struct CornerStats {
  std::array<double, 4> mean_magnitudes{};
  double patch_fraction = kDefaultPatchFraction;
  int patch_width = 0;
  int patch_height = 0;
};

// Side length of a corner patch: ceil(fraction * extent), at least one pixel.
int corner_patch_extent(int extent, double patch_fraction);

CornerStats corner_stats(const FlowField& flow, double patch_fraction = kDefaultPatchFraction);

// Quasi-static iff at least three corner means are strictly below tau_static.
bool is_quasi_static(const CornerStats& stats, double tau_static);

}  // namespace motionseg
