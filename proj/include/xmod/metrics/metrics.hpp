#pragma once

#include <cstdint>

#include "xmod/core/tensor.hpp"
#include "xmod/errors.hpp"

namespace xmod {

struct ConfusionCounts {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  int64_t total() const { return tp + fp + fn + tn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

template <class T>
void require_binary(const Tensor<T>& mask, const char* what) {
  for (int64_t i = 0; i < mask.numel(); ++i)
    if (mask[i] != T(0) && mask[i] != T(1))
      throw EvalError(std::string(what) + ": input mask must be binary {0,1}");
}

template <class T>
ConfusionCounts confusion(const Tensor<T>& pred, const Tensor<T>& gt) {
  check_same_shape(pred, gt, "confusion");
  require_binary(pred, "confusion");
  require_binary(gt, "confusion");
  ConfusionCounts c;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    const bool p = pred[i] != T(0);
    const bool g = gt[i] != T(0);
    if (p && g) ++c.tp;
    else if (p && !g) ++c.fp;
    else if (!p && g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// 2|P∩G| / (|P|+|G|); both-empty -> 1.0 (perfect agreement on absence).
inline double dice_from_counts(const ConfusionCounts& c) {
  const int64_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

// |P∩G| / |P∪G|; both-empty -> 1.0.
inline double iou_from_counts(const ConfusionCounts& c) {
  const int64_t denom = c.tp + c.fp + c.fn;
  return denom == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

template <class T>
double dice(const Tensor<T>& pred, const Tensor<T>& gt) {
  return dice_from_counts(confusion(pred, gt));
}

template <class T>
double iou(const Tensor<T>& pred, const Tensor<T>& gt) {
  return iou_from_counts(confusion(pred, gt));
}

template <class T>
Tensor<T> binarize(const Tensor<T>& scores, T threshold) {
  Tensor<T> out(scores.shape());
  for (int64_t i = 0; i < scores.numel(); ++i) out[i] = scores[i] >= threshold ? T(1) : T(0);
  return out;
}

}  // namespace xmod
