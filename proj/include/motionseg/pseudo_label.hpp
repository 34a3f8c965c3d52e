#pragma once

#include <string>

#include "motionseg/hdbscan.hpp"
#include "motionseg/types.hpp"

namespace motionseg {

inline constexpr double kDefaultTauFg = 2.5;
inline constexpr double kDefaultTauGrad = 20.0;

// Sobel is the unnormalized 3x3 kernel (a velocity step D reads as 4D);
// Central is (f(x+1) - f(x-1)) / 2 (the same step reads as D/2).
enum class GradientOperator { Sobel, Central };

// How per-pixel clustering features are scaled inside one component.
struct FeatureScaling {
  double magnitude_std_floor = 1.0;  // px/frame
  double angle_std_floor = 0.25;     // on the (cos, sin) unit circle
  double spatial_weight = 0.5;
};

struct PseudoLabelConfig {
  double tau_fg = kDefaultTauFg;
  double tau_grad = kDefaultTauGrad;
  int min_component_px = 25;
  int connectivity = 8;
  GradientOperator gradient = GradientOperator::Sobel;
  HdbscanParams clustering{};
  FeatureScaling scaling{};

  void validate() const;
};

struct PseudoLabel {
  BinaryMask fg;        // union of all instances
  LabelMap instances;   // 1..S
  std::string source_frame;
};

BinaryMask foreground_mask(const FlowField& flow, double tau_fg);

// Labels 1..C in first-pixel raster order; components under
// min_component_px pixels are dropped to 0.
LabelMap connected_components(const BinaryMask& mask, int connectivity,
                              int min_component_px = 1);

// One-pixel erosion with the 8-neighbourhood; pixels outside the image count
// as unset.
BinaryMask erode(const BinaryMask& mask);

// Per-pixel sqrt(|grad u|^2 + |grad v|^2) with replicate padding.
Grid<double> flow_gradient_norm(const FlowField& flow, GradientOperator op);

bool needs_split(const FlowField& flow, const BinaryMask& component, double tau_grad,
                 GradientOperator op = GradientOperator::Sobel);

// Rows follow the component's pixels in raster order; columns are
// (magnitude, cos angle, sin angle, x, y) after scaling.
PointSet component_features(const FlowField& flow, const BinaryMask& component,
                            const FeatureScaling& scaling);

// Local instance IDs 1..k inside the component, 0 elsewhere. Noise pixels
// join the nearest cluster centroid in feature space; if HDBSCAN finds no
// cluster at all the component is returned whole.
LabelMap split_component(const FlowField& flow, const BinaryMask& component,
                         const HdbscanParams& params, const FeatureScaling& scaling = {});

// Caller guarantees the frame passed quasi-static retrieval.
PseudoLabel generate_pseudo_label(const FlowField& flow, const PseudoLabelConfig& config,
                                  std::string source_frame = {});

}  // namespace motionseg
