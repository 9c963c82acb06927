#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "xmod/core/tensor.hpp"
#include "xmod/errors.hpp"

namespace xmod {

inline int64_t bit_depth_max(int bit_depth) {
  if (bit_depth != 8 && bit_depth != 12 && bit_depth != 16)
    throw DataError("source_bit_depth must be 8, 12 or 16, got " + std::to_string(bit_depth));
  return (int64_t(1) << bit_depth) - 1;
}

// Linear map v -> 2*v/(2^depth - 1) - 1 into [-1, 1].
template <class T = float>
Tensor<T> normalize_slice(const Tensor<int32_t>& raw, int bit_depth,
                          const std::string& slice_id = "") {
  const int64_t maxv = bit_depth_max(bit_depth);
  Tensor<T> out(raw.shape());
  for (int64_t i = 0; i < raw.numel(); ++i) {
    const int32_t v = raw[i];
    if (v < 0 || v > maxv)
      throw DataError("pixel value " + std::to_string(v) + " outside " +
                      std::to_string(bit_depth) + "-bit range" +
                      (slice_id.empty() ? "" : " in slice " + slice_id));
    out[i] = static_cast<T>(2.0 * static_cast<double>(v) / static_cast<double>(maxv) - 1.0);
  }
  return out;
}

// Inverse linear map followed by rounding; exact round-trip on integers.
template <class T = float>
Tensor<int32_t> denormalize_slice(const Tensor<T>& norm, int bit_depth) {
  const int64_t maxv = bit_depth_max(bit_depth);
  Tensor<int32_t> out(norm.shape());
  for (int64_t i = 0; i < norm.numel(); ++i) {
    double v = (static_cast<double>(norm[i]) + 1.0) / 2.0 * static_cast<double>(maxv);
    int64_t r = std::llround(v);
    if (r < 0) r = 0;
    if (r > maxv) r = maxv;
    out[i] = static_cast<int32_t>(r);
  }
  return out;
}

// Bilinear resampling with pixel-center alignment; identity when sizes match.
template <class T>
Tensor<T> resample_bilinear(const Tensor<T>& img, int64_t target_h, int64_t target_w) {
  if (img.rank() != 2) throw ShapeError("resample_bilinear expects a 2-D image");
  const int64_t h = img.dim(0), w = img.dim(1);
  if (target_h < 1 || target_w < 1) throw ShapeError("target size must be positive");
  if (h == target_h && w == target_w) return img;
  Tensor<T> out({target_h, target_w});
  const double sy = static_cast<double>(h) / target_h;
  const double sx = static_cast<double>(w) / target_w;
  for (int64_t y = 0; y < target_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), static_cast<double>(h - 1));
    const int64_t y0 = static_cast<int64_t>(fy);
    const int64_t y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int64_t x = 0; x < target_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), static_cast<double>(w - 1));
      const int64_t x0 = static_cast<int64_t>(fx);
      const int64_t x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * img[y0 * w + x0] + wx * img[y0 * w + x1]) +
                       wy * ((1 - wx) * img[y1 * w + x0] + wx * img[y1 * w + x1]);
      out[y * target_w + x] = static_cast<T>(v);
    }
  }
  return out;
}

// Nearest-neighbor resampling; value set is preserved, so binary masks stay
// binary.
template <class T>
Tensor<T> resample_nearest(const Tensor<T>& img, int64_t target_h, int64_t target_w) {
  if (img.rank() != 2) throw ShapeError("resample_nearest expects a 2-D image");
  const int64_t h = img.dim(0), w = img.dim(1);
  if (target_h < 1 || target_w < 1) throw ShapeError("target size must be positive");
  if (h == target_h && w == target_w) return img;
  Tensor<T> out({target_h, target_w});
  for (int64_t y = 0; y < target_h; ++y) {
    int64_t sy = std::min<int64_t>(static_cast<int64_t>((y + 0.5) * h / target_h), h - 1);
    for (int64_t x = 0; x < target_w; ++x) {
      int64_t sx = std::min<int64_t>(static_cast<int64_t>((x + 0.5) * w / target_w), w - 1);
      out[y * target_w + x] = img[sy * w + sx];
    }
  }
  return out;
}

}  // namespace xmod
