#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "xmod/errors.hpp"

namespace xmod {

// Threshold sweep over unique scores, descending. The curve starts at (0,0)
// (threshold above every score) and ends at (1,1). Ties are grouped, which
// makes the trapezoidal AUC equal to the rank statistic
// P(score+ > score-) + 0.5 * P(tie).
struct ROCCurve {
  std::vector<double> thresholds;
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auc = 0.0;
};

template <class ScoreT, class LabelT>
ROCCurve roc_curve(const std::vector<ScoreT>& scores, const std::vector<LabelT>& labels) {
  if (scores.size() != labels.size())
    throw EvalError("roc_curve: scores and labels differ in length");
  if (scores.empty()) throw EvalError("roc_curve: empty input");
  int64_t n_pos = 0, n_neg = 0;
  for (auto l : labels) {
    if (l == LabelT(1)) ++n_pos;
    else if (l == LabelT(0)) ++n_neg;
    else throw EvalError("roc_curve: labels must be binary {0,1}");
  }
  if (n_pos == 0 || n_neg == 0)
    throw EvalError("roc_curve: need at least one positive and one negative label");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  ROCCurve curve;
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  curve.tpr.push_back(0.0);
  curve.fpr.push_back(0.0);

  double auc = 0.0;
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    const double thr = static_cast<double>(scores[order[i]]);
    int64_t group_tp = 0, group_fp = 0;
    while (i < order.size() && static_cast<double>(scores[order[i]]) == thr) {
      if (labels[order[i]] == LabelT(1)) ++group_tp;
      else ++group_fp;
      ++i;
    }
    const double tpr0 = static_cast<double>(tp) / n_pos;
    const double fpr0 = static_cast<double>(fp) / n_neg;
    tp += group_tp;
    fp += group_fp;
    const double tpr1 = static_cast<double>(tp) / n_pos;
    const double fpr1 = static_cast<double>(fp) / n_neg;
    auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
    curve.thresholds.push_back(thr);
    curve.tpr.push_back(tpr1);
    curve.fpr.push_back(fpr1);
  }
  curve.auc = auc;
  return curve;
}

template <class ScoreT, class LabelT>
double auc_score(const std::vector<ScoreT>& scores, const std::vector<LabelT>& labels) {
  return roc_curve(scores, labels).auc;
}

}  // namespace xmod
