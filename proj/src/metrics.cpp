#include "motionseg/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "motionseg/assignment.hpp"
#include "motionseg/io.hpp"

namespace motionseg {
namespace {

long long comb2(long long n) { return n * (n - 1) / 2; }

std::set<std::string> pgm_names(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  }
  std::set<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      names.insert(entry.path().filename().string());
    }
  }
  return names;
}

}  // namespace

double iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "iou: masks differ in size");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::vector<double>> pairwise_iou(const LabelMap& pred, const LabelMap& gt) {
  require_same_shape(pred.labels(), gt.labels(), "prediction and ground truth differ in size");
  const int np = pred.instance_count();
  const int ng = gt.instance_count();
  std::vector<std::vector<long long>> inter(static_cast<std::size_t>(np),
                                            std::vector<long long>(static_cast<std::size_t>(ng), 0));
  const auto pa = pred.areas();
  const auto ga = gt.areas();
  for (std::size_t i = 0; i < pred.labels().size(); ++i) {
    if (pred[i] > 0 && gt[i] > 0) {
      ++inter[static_cast<std::size_t>(pred[i] - 1)][static_cast<std::size_t>(gt[i] - 1)];
    }
  }
  std::vector<std::vector<double>> out(static_cast<std::size_t>(np),
                                       std::vector<double>(static_cast<std::size_t>(ng), 0.0));
  for (int p = 0; p < np; ++p) {
    for (int g = 0; g < ng; ++g) {
      const auto in = inter[static_cast<std::size_t>(p)][static_cast<std::size_t>(g)];
      const auto un = static_cast<long long>(pa[static_cast<std::size_t>(p)] +
                                             ga[static_cast<std::size_t>(g)]) - in;
      out[static_cast<std::size_t>(p)][static_cast<std::size_t>(g)] =
          static_cast<double>(in) / static_cast<double>(un);
    }
  }
  return out;
}

DetectionResult prf_from_counts(int tp, int fp, int fn) {
  DetectionResult r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.ap_defined = tp + fp > 0;
  r.ar_defined = tp + fn > 0;
  r.ap = r.ap_defined ? static_cast<double>(tp) / (tp + fp) : 1.0;
  r.ar = r.ar_defined ? static_cast<double>(tp) / (tp + fn) : 1.0;
  r.f1 = r.ap + r.ar > 0.0 ? 2.0 * r.ap * r.ar / (r.ap + r.ar) : 0.0;
  return r;
}

DetectionResult detection_prf(const LabelMap& pred, const LabelMap& gt, double iou_thresh) {
  const auto ious = pairwise_iou(pred, gt);
  const int np = pred.instance_count();
  const int ng = gt.instance_count();
  int tp = 0;
  if (np > 0 && ng > 0) {
    // Pairs above threshold cost < 1, the rest >= 1, so the optimum first
    // maximizes the true-positive count and then the summed IoU.
    CostMatrix costs(np, ng);
    for (int p = 0; p < np; ++p) {
      for (int g = 0; g < ng; ++g) {
        const double v = ious[static_cast<std::size_t>(p)][static_cast<std::size_t>(g)];
        costs(p, g) = (1.0 - v) + (v > iou_thresh ? 0.0 : 1.0);
      }
    }
    const auto match = hungarian(costs);
    for (const auto& [p, g] : match.pairs) {
      if (ious[static_cast<std::size_t>(p)][static_cast<std::size_t>(g)] > iou_thresh) ++tp;
    }
  }
  return prf_from_counts(tp, np - tp, ng - tp);
}

std::optional<double> ari(const LabelMap& pred, const LabelMap& gt, AriRegion region) {
  require_same_shape(pred.labels(), gt.labels(), "prediction and ground truth differ in size");
  std::map<std::pair<int, int>, long long> joint;
  std::map<int, long long> pred_sizes;
  std::map<int, long long> gt_sizes;
  long long n = 0;
  for (std::size_t i = 0; i < gt.labels().size(); ++i) {
    if (region == AriRegion::FgOnly && gt[i] == 0) continue;
    ++joint[{pred[i], gt[i]}];
    ++pred_sizes[pred[i]];
    ++gt_sizes[gt[i]];
    ++n;
  }
  if (n == 0) {
    if (region == AriRegion::FgOnly) return std::nullopt;
    return 1.0;
  }
  long long index = 0;
  for (const auto& [key, c] : joint) index += comb2(c);
  long long sum_pred = 0;
  for (const auto& [key, c] : pred_sizes) sum_pred += comb2(c);
  long long sum_gt = 0;
  for (const auto& [key, c] : gt_sizes) sum_gt += comb2(c);
  const double total_pairs = static_cast<double>(comb2(n));
  if (total_pairs == 0.0) return 1.0;
  const double expected = static_cast<double>(sum_pred) * static_cast<double>(sum_gt) / total_pairs;
  const double max_index = 0.5 * static_cast<double>(sum_pred + sum_gt);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (static_cast<double>(index) - expected) / denom;
}

ImageMetrics evaluate_image(std::string name, const LabelMap& pred, const LabelMap& gt) {
  ImageMetrics m;
  m.name = std::move(name);
  m.detection = detection_prf(pred, gt);
  m.fg_ari = ari(pred, gt, AriRegion::FgOnly);
  m.all_ari = *ari(pred, gt, AriRegion::All);
  return m;
}

MetricsReport aggregate(std::vector<ImageMetrics> images) {
  std::sort(images.begin(), images.end(),
            [](const ImageMetrics& a, const ImageMetrics& b) { return a.name < b.name; });
  MetricsReport report;
  double fg_sum = 0.0;
  int fg_defined = 0;
  double all_sum = 0.0;
  for (const auto& img : images) {
    report.tp += img.detection.tp;
    report.fp += img.detection.fp;
    report.fn += img.detection.fn;
    if (img.fg_ari) {
      fg_sum += *img.fg_ari;
      ++fg_defined;
    }
    all_sum += img.all_ari;
  }
  const auto pooled = prf_from_counts(report.tp, report.fp, report.fn);
  report.ap_50 = pooled.ap;
  report.ar_50 = pooled.ar;
  report.f1_50 = pooled.f1;
  if (fg_defined > 0) report.fg_ari = fg_sum / fg_defined;
  report.all_ari = images.empty() ? 1.0 : all_sum / static_cast<double>(images.size());
  report.per_image = std::move(images);
  return report;
}

MetricsReport evaluate_dataset(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir) {
  const auto gt_names = pgm_names(gt_dir);
  const auto pred_names = pgm_names(pred_dir);
  for (const auto& name : gt_names) {
    if (!pred_names.count(name)) throw Error(ErrorCode::MissingPair, "no prediction for " + name);
  }
  for (const auto& name : pred_names) {
    if (!gt_names.count(name)) throw Error(ErrorCode::MissingPair, "no ground truth for " + name);
  }
  std::vector<ImageMetrics> images;
  for (const auto& name : gt_names) {
    const auto pred = read_label_map(pred_dir / name);
    const auto gt = read_label_map(gt_dir / name);
    if (!pred.labels().same_shape(gt.labels())) {
      throw Error(ErrorCode::DimensionMismatch, name + ": prediction and ground truth differ in size");
    }
    images.push_back(evaluate_image(name, pred, gt));
  }
  return aggregate(std::move(images));
}

nlohmann::ordered_json to_json(const MetricsReport& report) {
  auto optional_number = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json out;
  out["f1_50"] = report.f1_50;
  out["ap_50"] = report.ap_50;
  out["ar_50"] = report.ar_50;
  out["fg_ari"] = optional_number(report.fg_ari);
  out["all_ari"] = report.all_ari;
  out["tp"] = report.tp;
  out["fp"] = report.fp;
  out["fn"] = report.fn;
  out["images"] = report.per_image.size();
  auto rows = nlohmann::ordered_json::array();
  for (const auto& img : report.per_image) {
    nlohmann::ordered_json row;
    row["name"] = img.name;
    row["tp"] = img.detection.tp;
    row["fp"] = img.detection.fp;
    row["fn"] = img.detection.fn;
    row["ap_50"] = img.detection.ap;
    row["ar_50"] = img.detection.ar;
    row["f1_50"] = img.detection.f1;
    row["fg_ari"] = optional_number(img.fg_ari);
    row["all_ari"] = img.all_ari;
    rows.push_back(std::move(row));
  }
  out["per_image"] = std::move(rows);
  return out;
}

}  // namespace motionseg
