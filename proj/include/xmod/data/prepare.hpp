#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "xmod/data/manifest.hpp"

namespace xmod {

struct PrepOptions {
  int source_bit_depth = 16;
  int64_t target_size = 256;
  // closed intensity interval selecting the liver label in label rasters
  int64_t label_lo = 1;
  int64_t label_hi = 255;
};

struct PrepResult {
  DatasetManifest manifest;
  std::vector<std::string> slice_errors;  // recorded, slice excluded, run continues
};

inline PrepOptions default_prep_options(Modality modality) {
  PrepOptions opt;
  if (modality == Modality::A_CT) {
    opt.source_bit_depth = 16;
    opt.label_lo = 1;
    opt.label_hi = 255;
  } else {
    opt.source_bit_depth = 12;
    // organs are encoded as intensity bands in MR-style label maps
    opt.label_lo = 55;
    opt.label_hi = 70;
  }
  return opt;
}

// Ingests <src>/images/*.png|pgm with per-slice labels <src>/labels/<stem>.*
// into the canonical layout under out_dir. Every readable slice is listed;
// liver_visible is true iff the stored binarized mask has foreground.
inline PrepResult prepare_dataset(const fs::path& source_dir, Modality modality,
                                  const PrepOptions& opt, const fs::path& out_dir) {
  const fs::path images_dir = source_dir / "images";
  const fs::path labels_dir = source_dir / "labels";
  if (!fs::is_directory(images_dir))
    throw DataError("source directory has no images/ subdirectory: " + source_dir.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(images_dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".png" || ext == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw DataError("no .png/.pgm images found under " + images_dir.string());

  PrepResult result;
  result.manifest.root = out_dir;
  result.manifest.modality = modality;
  fs::create_directories(out_dir);

  for (const auto& file : files) {
    const std::string stem = file.stem().string();
    try {
      fs::path label_path;
      for (const char* ext : {".png", ".pgm", ".PNG", ".PGM"}) {
        fs::path candidate = labels_dir / (stem + ext);
        if (fs::exists(candidate)) {
          label_path = candidate;
          break;
        }
      }
      if (label_path.empty()) throw DataError("missing label file for " + stem);

      auto img = read_gray_image(file);
      auto label = read_gray_image(label_path);
      if (img.width != label.width || img.height != label.height)
        throw DataError("label size " + std::to_string(label.width) + "x" +
                        std::to_string(label.height) + " differs from image for " + stem);

      Tensor<int32_t> raw({img.height, img.width});
      for (int64_t i = 0; i < raw.numel(); ++i) raw[i] = img.pixels[static_cast<size_t>(i)];

      ImageSlice slice;
      slice.id = stem;
      slice.pixels = normalize_slice<float>(raw, opt.source_bit_depth, stem);
      Tensor<float> mask({img.height, img.width});
      for (int64_t i = 0; i < mask.numel(); ++i) {
        const int64_t v = label.pixels[static_cast<size_t>(i)];
        mask[i] = (v >= opt.label_lo && v <= opt.label_hi) ? 1.0f : 0.0f;
      }
      slice.mask = std::move(mask);

      slice = resample_slice(slice, opt.target_size);

      const auto sep = stem.find('_');
      const std::string subject = sep == std::string::npos ? stem : stem.substr(0, sep);
      auto entry = write_canonical_slice(out_dir, slice, opt.source_bit_depth, subject);
      result.manifest.entries.push_back(std::move(entry));
    } catch (const DataError& e) {
      result.slice_errors.push_back(stem + ": " + e.what());
    }
  }

  save_manifest(result.manifest);
  if (!result.slice_errors.empty()) {
    std::ofstream log(out_dir / "prep_log.txt");
    for (const auto& line : result.slice_errors) log << line << "\n";
  }
  return result;
}

}  // namespace xmod
