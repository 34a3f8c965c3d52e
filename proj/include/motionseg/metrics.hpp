#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "motionseg/types.hpp"

namespace motionseg {

// |a ∩ b| / |a ∪ b|, 1 for two empty masks.
double iou(const BinaryMask& a, const BinaryMask& b);

// Instance IoU for every (pred, gt) pair, rows = pred.
std::vector<std::vector<double>> pairwise_iou(const LabelMap& pred, const LabelMap& gt);

struct DetectionResult {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double ap = 1.0;
  double ar = 1.0;
  double f1 = 1.0;
  bool ap_defined = true;  // false when there are no predictions
  bool ar_defined = true;  // false when there is no ground truth
};

// No predictions -> AP reported as 1 (undefined); no GT -> AR reported as 1
// (undefined); F1 = 0 when AP + AR = 0.
DetectionResult prf_from_counts(int tp, int fp, int fn);

// A matched pair is a true positive iff IoU > iou_thresh (strict).
DetectionResult detection_prf(const LabelMap& pred, const LabelMap& gt, double iou_thresh = 0.5);

enum class AriRegion { FgOnly, All };

// Adjusted Rand index between two labelings. FgOnly restricts to pixels
// with gt > 0 (pred background there is a cluster of its own) and is
// undefined (nullopt) without GT foreground. A zero denominator gives 1.
std::optional<double> ari(const LabelMap& pred, const LabelMap& gt, AriRegion region);

struct ImageMetrics {
  std::string name;
  DetectionResult detection;
  std::optional<double> fg_ari;
  double all_ari = 1.0;
};

struct MetricsReport {
  double f1_50 = 1.0;
  double ap_50 = 1.0;
  double ar_50 = 1.0;
  std::optional<double> fg_ari;  // mean over images where defined
  double all_ari = 1.0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  std::vector<ImageMetrics> per_image;  // sorted by name
};

ImageMetrics evaluate_image(std::string name, const LabelMap& pred, const LabelMap& gt);

// Pools TP/FP/FN over images before computing AP/AR/F1; ARIs are per-image means.
MetricsReport aggregate(std::vector<ImageMetrics> images);

// Every *.pgm in gt_dir must have a same-named file in pred_dir and vice versa.
MetricsReport evaluate_dataset(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir);

nlohmann::ordered_json to_json(const MetricsReport& report);

}  // namespace motionseg
