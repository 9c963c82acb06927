#pragma once

#include <chrono>

#include "xmod/data/manifest.hpp"
#include "xmod/train/essnet.hpp"

namespace xmod {

struct SynthesisResult {
  DatasetManifest manifest;
  double frames_per_second = 0.0;
};

// Feeds every liver-visible A slice through the trained A->B generator and
// writes a canonical B-modality dataset. The A slice's ground-truth mask is
// attached unchanged to the synthetic image, and entries carry
// synthetic=true.
template <class T = float>
SynthesisResult synthesize(const fs::path& essnet_checkpoint, const DatasetManifest& data_a,
                           const fs::path& out_dir) {
  auto state = load_essnet_checkpoint<T>(essnet_checkpoint);
  state.g1.store().set_requires_grad(false);

  SynthesisResult result;
  result.manifest.root = out_dir;
  result.manifest.modality = Modality::B_MR;
  fs::create_directories(out_dir);

  int64_t count = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& e : data_a.entries) {
    if (!e.liver_visible) continue;
    auto slice = load_slice(data_a, e);
    if (!slice.mask) throw DataError("entry " + e.id + " is liver_visible but has no mask");

    const int64_t h = slice.height(), w = slice.width();
    Tensor<T> input({1, 1, h, w});
    for (int64_t k = 0; k < h * w; ++k) input[k] = static_cast<T>(slice.pixels[k]);
    auto fake_b = state.g1.forward(make_leaf<T>(std::move(input), false));

    ImageSlice synth;
    synth.id = e.id + "_syn";
    synth.pixels = Tensor<float>({h, w});
    for (int64_t k = 0; k < h * w; ++k) synth.pixels[k] = static_cast<float>(fake_b->value[k]);
    synth.mask = slice.mask;

    auto entry = write_canonical_slice(out_dir, synth, 16, e.subject_id, /*synthetic=*/true);
    result.manifest.entries.push_back(std::move(entry));
    ++count;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.frames_per_second = secs > 0 ? static_cast<double>(count) / secs : 0.0;

  save_manifest(result.manifest);
  return result;
}

}  // namespace xmod
