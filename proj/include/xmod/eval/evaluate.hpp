#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "xmod/data/manifest.hpp"
#include "xmod/metrics/metrics.hpp"
#include "xmod/metrics/roc.hpp"
#include "xmod/train/unet_train.hpp"

namespace xmod {

struct PerImageMetrics {
  std::string id;
  double dice = 0.0;
  double iou = 0.0;
};

// Dice/IoU are pooled over all evaluated pixels (micro); the per-image list
// is an appendix. For pooled binary masks iou == dice/(2-dice) holds
// exactly; per-image means do not satisfy that identity and are never used
// for the headline numbers.
struct MetricsReport {
  std::string run_id;
  std::string arrangement;
  double dice = 0.0;
  double iou = 0.0;
  std::optional<double> auc;
  double threshold = 0.5;
  int64_t images = 0;
  int64_t pixels = 0;
  std::vector<PerImageMetrics> per_image;

  json to_json() const {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["run_id"] = run_id;
    j["arrangement"] = arrangement;
    j["dice"] = dice;
    j["iou"] = iou;
    if (auc) j["auc"] = *auc;
    j["threshold"] = threshold;
    j["images"] = images;
    j["pixels"] = pixels;
    j["per_image"] = json::array();
    for (const auto& p : per_image)
      j["per_image"].push_back({{"id", p.id}, {"dice", p.dice}, {"iou", p.iou}});
    return j;
  }

  static MetricsReport from_json(const json& j) {
    MetricsReport r;
    r.run_id = j.at("run_id").get<std::string>();
    r.arrangement = j.at("arrangement").get<std::string>();
    r.dice = j.at("dice").get<double>();
    r.iou = j.at("iou").get<double>();
    if (j.contains("auc")) r.auc = j["auc"].get<double>();
    r.threshold = j.value("threshold", 0.5);
    r.images = j.value("images", int64_t(0));
    r.pixels = j.value("pixels", int64_t(0));
    if (j.contains("per_image"))
      for (const auto& p : j["per_image"])
        r.per_image.push_back({p.at("id").get<std::string>(), p.at("dice").get<double>(),
                               p.at("iou").get<double>()});
    return r;
  }

  void save(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw EvalError("cannot write report " + path.string());
    out << to_json().dump(2) << "\n";
  }

  static MetricsReport load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw EvalError("cannot read report " + path.string());
    json j;
    in >> j;
    return from_json(j);
  }
};

// Runs the frozen net over every liver-visible test slice: pooled Dice/IoU
// at the threshold, per-image appendix, and pixel-level ROC/AUC from the
// raw sigmoid scores.
template <class T = float>
MetricsReport evaluate_segmentation(UNet<T>& net, const DatasetManifest& test_manifest,
                                    double threshold = 0.5, ROCCurve* curve_out = nullptr) {
  net.store().set_requires_grad(false);

  MetricsReport report;
  report.threshold = threshold;
  ConfusionCounts pooled;
  std::vector<float> all_scores;
  std::vector<uint8_t> all_labels;

  for (const auto& e : test_manifest.entries) {
    if (!e.liver_visible) continue;
    auto slice = load_slice(test_manifest, e);
    if (!slice.mask) throw EvalError("test entry " + e.id + " has no mask");

    const int64_t h = slice.height(), w = slice.width();
    Tensor<T> input({1, 1, h, w});
    for (int64_t k = 0; k < h * w; ++k) input[k] = static_cast<T>(slice.pixels[k]);
    auto scores = net.forward(make_leaf<T>(std::move(input), false));

    Tensor<float> pred({h, w});
    for (int64_t k = 0; k < h * w; ++k) {
      const float sv = static_cast<float>(scores->value[k]);
      pred[k] = sv >= threshold ? 1.0f : 0.0f;
      all_scores.push_back(sv);
      all_labels.push_back((*slice.mask)[k] != 0.0f ? 1 : 0);
    }
    auto counts = confusion(pred, *slice.mask);
    pooled += counts;
    report.per_image.push_back({e.id, dice_from_counts(counts), iou_from_counts(counts)});
    ++report.images;
  }
  if (report.images == 0) throw EvalError("test manifest has no liver-visible entries");

  report.pixels = pooled.total();
  report.dice = dice_from_counts(pooled);
  report.iou = iou_from_counts(pooled);

  bool has_pos = false, has_neg = false;
  for (auto l : all_labels) (l ? has_pos : has_neg) = true;
  if (has_pos && has_neg) {
    auto curve = roc_curve(all_scores, all_labels);
    report.auc = curve.auc;
    if (curve_out) *curve_out = std::move(curve);
  }
  return report;
}

template <class T = float>
MetricsReport evaluate_checkpoint(const fs::path& unet_checkpoint,
                                  const DatasetManifest& test_manifest, double threshold = 0.5,
                                  ROCCurve* curve_out = nullptr) {
  auto state = load_unet_checkpoint<T>(unet_checkpoint);
  return evaluate_segmentation(state.net, test_manifest, threshold, curve_out);
}

inline void dump_roc_csv(const ROCCurve& curve, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw EvalError("cannot write " + path.string());
  out << "threshold,fpr,tpr\n";
  for (size_t i = 0; i < curve.tpr.size(); ++i)
    out << curve.thresholds[i] << "," << curve.fpr[i] << "," << curve.tpr[i] << "\n";
}

}  // namespace xmod
