#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <string>

#include "xmod/core/rng.hpp"
#include "xmod/data/manifest.hpp"

namespace xmod {

// Synthetic abdomen-like slices for desk-scale runs: a large body ellipse
// with a smaller liver blob at a randomized pose. A_style renders the liver
// brighter than the body; B_style applies a different monotone intensity
// mapping plus a smooth multiplicative bias field.
struct PhantomSpec {
  int64_t image_size = 64;
  int64_t n_slices = 20;
  double liver_radius_lo = 0.10;
  double liver_radius_hi = 0.20;
  double noise_sigma = 0.02;
  enum class Contrast { A_style, B_style } modality_contrast = Contrast::A_style;

  void validate() const {
    if (image_size < 16) throw ConfigError("phantom: image_size must be >= 16");
    if (n_slices < 1) throw ConfigError("phantom: n_slices must be >= 1");
    if (!(liver_radius_lo > 0) || liver_radius_hi < liver_radius_lo || liver_radius_hi > 0.35)
      throw ConfigError("phantom: liver radius range must satisfy 0 < lo <= hi <= 0.35");
    if (noise_sigma < 0) throw ConfigError("phantom: noise_sigma must be >= 0");
  }
};

namespace detail {

struct Ellipse {
  double cx, cy, rx, ry;

  bool contains(double x, double y, double margin = 1.0) const {
    const double dx = (x - cx) / (rx * margin);
    const double dy = (y - cy) / (ry * margin);
    return dx * dx + dy * dy <= 1.0;
  }
};

inline bool ellipse_inside(const Ellipse& inner, const Ellipse& outer) {
  for (int i = 0; i < 24; ++i) {
    const double t = 2.0 * std::numbers::pi * i / 24;
    const double x = inner.cx + inner.rx * std::cos(t);
    const double y = inner.cy + inner.ry * std::sin(t);
    if (!outer.contains(x, y, 0.94)) return false;
  }
  return true;
}

}  // namespace detail

struct PhantomResult {
  DatasetManifest manifest;
  int64_t pose_retries = 0;
};

inline PhantomResult generate_phantom_dataset(const PhantomSpec& spec, uint64_t seed,
                                              const fs::path& out_dir) {
  spec.validate();
  const bool a_style = spec.modality_contrast == PhantomSpec::Contrast::A_style;
  const int64_t s = spec.image_size;

  DatasetManifest m;
  m.root = out_dir;
  m.modality = a_style ? Modality::A_CT : Modality::B_MR;
  m.seed = seed;

  PhantomResult result;
  const char* prefix = a_style ? "a" : "b";

  for (int64_t i = 0; i < spec.n_slices; ++i) {
    auto rng = make_rng(seed, std::string("phantom/") + prefix + std::to_string(i));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    detail::Ellipse body, liver;
    bool placed = false;
    while (!placed) {
      body.cx = s * (0.5 + 0.04 * (uni(rng) - 0.5));
      body.cy = s * (0.5 + 0.04 * (uni(rng) - 0.5));
      body.rx = s * (0.36 + 0.05 * uni(rng));
      body.ry = s * (0.30 + 0.05 * uni(rng));
      for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
        const double rl = spec.liver_radius_lo +
                          (spec.liver_radius_hi - spec.liver_radius_lo) * uni(rng);
        liver.rx = s * rl * (0.8 + 0.4 * uni(rng));
        liver.ry = s * rl * (0.8 + 0.4 * uni(rng));
        liver.cx = body.cx + (uni(rng) - 0.5) * body.rx;
        liver.cy = body.cy + (uni(rng) - 0.5) * body.ry;
        placed = detail::ellipse_inside(liver, body);
        if (!placed) ++result.pose_retries;
      }
      // pose exhausted its retries: regenerate the whole slice pose
    }

    const double body_level = 0.38 + 0.06 * uni(rng);
    const double liver_level = 0.72 + 0.06 * uni(rng);
    const double fx = 0.5 + uni(rng), fy = 0.5 + uni(rng), phase = 2 * std::numbers::pi * uni(rng);

    ImageSlice slice;
    slice.id = std::string(prefix) + "_" + (std::to_string(10000 + i).substr(1));
    slice.pixels = Tensor<float>({s, s});
    Tensor<float> mask({s, s});

    for (int64_t y = 0; y < s; ++y)
      for (int64_t x = 0; x < s; ++x) {
        double v = 0.05;
        const bool in_body = body.contains(x + 0.5, y + 0.5);
        const bool in_liver = liver.contains(x + 0.5, y + 0.5);
        if (in_body) v = body_level;
        if (in_liver) v = liver_level;
        if (!a_style) {
          // monotone remap keeps ordering but changes the tone curve
          v = 0.10 + 0.85 * std::sqrt(v);
          const double bias =
              std::sin(2 * std::numbers::pi * (fx * x + fy * y) / static_cast<double>(s) + phase);
          v *= 1.0 + 0.12 * bias;
        }
        v += spec.noise_sigma * gauss(rng);
        v = std::min(std::max(v, 0.0), 1.0);
        slice.pixels[y * s + x] = static_cast<float>(2.0 * v - 1.0);
        mask[y * s + x] = in_liver ? 1.0f : 0.0f;
      }
    slice.mask = std::move(mask);

    auto entry = write_canonical_slice(out_dir, slice, 16, "sub" + std::to_string(i / 8));
    m.entries.push_back(std::move(entry));
  }

  save_manifest(m);
  if (result.pose_retries > 0)
    std::cerr << "phantom: " << result.pose_retries << " liver pose retries\n";
  result.manifest = std::move(m);
  return result;
}

}  // namespace xmod
