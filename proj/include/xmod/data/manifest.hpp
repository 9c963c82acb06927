#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmod/data/image_io.hpp"
#include "xmod/data/normalize.hpp"
#include "xmod/version.hpp"

namespace xmod {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

enum class Modality { A_CT, B_MR };

inline std::string to_string(Modality m) { return m == Modality::A_CT ? "A_CT" : "B_MR"; }

inline Modality modality_from_string(const std::string& s) {
  if (s == "A_CT" || s == "ct") return Modality::A_CT;
  if (s == "B_MR" || s == "mr") return Modality::B_MR;
  throw DataError("unknown modality: " + s);
}

// One canonicalized slice on disk. Canonical rasters are 16-bit grayscale
// PNGs under images/ with 8-bit {0,255} masks under masks/;
// source_bit_depth records the provenance depth of the ingested data.
struct SliceEntry {
  std::string id;
  std::string image_path;                // relative to manifest root
  std::optional<std::string> mask_path;  // relative, optional
  int64_t width = 0, height = 0;
  int source_bit_depth = 16;
  bool liver_visible = false;
  std::string subject_id;
  bool synthetic = false;
};

struct DatasetManifest {
  fs::path root;
  Modality modality = Modality::A_CT;
  std::vector<SliceEntry> entries;
  std::string created_by = kVersion;
  std::optional<uint64_t> seed;

  int64_t liver_visible_count() const {
    return std::count_if(entries.begin(), entries.end(),
                         [](const SliceEntry& e) { return e.liver_visible; });
  }
};

// In-memory normalized slice: pixels in [-1,1], mask in {0,1}.
struct ImageSlice {
  std::string id;
  Tensor<float> pixels;
  std::optional<Tensor<float>> mask;

  int64_t height() const { return pixels.dim(0); }
  int64_t width() const { return pixels.dim(1); }
};

inline void validate_binary_mask(const Tensor<float>& mask, const std::string& what) {
  for (int64_t i = 0; i < mask.numel(); ++i)
    if (mask[i] != 0.0f && mask[i] != 1.0f)
      throw DataError(what + ": mask contains non-binary value");
}

inline bool mask_nonempty(const Tensor<float>& mask) {
  for (int64_t i = 0; i < mask.numel(); ++i)
    if (mask[i] != 0.0f) return true;
  return false;
}

// Image is resampled bilinearly; the mask goes through nearest-neighbor so
// it stays binary.
inline ImageSlice resample_slice(const ImageSlice& slice, int64_t target_size) {
  if (target_size < 1) throw ShapeError("resample_slice: target size must be positive");
  ImageSlice out;
  out.id = slice.id;
  out.pixels = resample_bilinear(slice.pixels, target_size, target_size);
  if (slice.mask) out.mask = resample_nearest(*slice.mask, target_size, target_size);
  return out;
}

inline json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["modality"] = to_string(m.modality);
  j["created_by"] = m.created_by;
  if (m.seed) j["seed"] = *m.seed;
  j["entries"] = json::array();
  for (const auto& e : m.entries) {
    json je;
    je["id"] = e.id;
    je["image_path"] = e.image_path;
    if (e.mask_path) je["mask_path"] = *e.mask_path;
    je["width"] = e.width;
    je["height"] = e.height;
    je["source_bit_depth"] = e.source_bit_depth;
    je["liver_visible"] = e.liver_visible;
    je["subject_id"] = e.subject_id;
    if (e.synthetic) je["synthetic"] = true;
    j["entries"].push_back(std::move(je));
  }
  return j;
}

inline DatasetManifest manifest_from_json(const json& j, fs::path root) {
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != kSchemaVersion)
    throw DataError("manifest schema_version mismatch (expected " +
                    std::to_string(kSchemaVersion) + ")");
  DatasetManifest m;
  m.root = std::move(root);
  m.modality = modality_from_string(j.at("modality").get<std::string>());
  m.created_by = j.value("created_by", std::string());
  if (j.contains("seed")) m.seed = j["seed"].get<uint64_t>();
  for (const auto& je : j.at("entries")) {
    SliceEntry e;
    e.id = je.at("id").get<std::string>();
    e.image_path = je.at("image_path").get<std::string>();
    if (je.contains("mask_path")) e.mask_path = je["mask_path"].get<std::string>();
    e.width = je.at("width").get<int64_t>();
    e.height = je.at("height").get<int64_t>();
    e.source_bit_depth = je.at("source_bit_depth").get<int>();
    e.liver_visible = je.at("liver_visible").get<bool>();
    e.subject_id = je.value("subject_id", std::string());
    e.synthetic = je.value("synthetic", false);
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline void save_manifest(const DatasetManifest& m) {
  fs::create_directories(m.root);
  std::ofstream out(m.root / "manifest.json");
  if (!out) throw DataError("cannot write manifest under " + m.root.string());
  out << manifest_to_json(m).dump(2) << "\n";
}

inline DatasetManifest load_manifest(const fs::path& root) {
  std::ifstream in(root / "manifest.json");
  if (!in) throw DataError("no manifest.json under " + root.string());
  json j;
  in >> j;
  return manifest_from_json(j, root);
}

// Invariant checks; `deep` also opens every raster.
inline void validate_manifest(const DatasetManifest& m, bool deep = false) {
  std::vector<std::string> ids;
  for (const auto& e : m.entries) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw DataError("manifest has duplicate entry ids");
  for (const auto& e : m.entries) {
    if (e.width < 1 || e.height < 1) throw DataError("entry " + e.id + ": non-positive size");
    bit_depth_max(e.source_bit_depth);
    if (!fs::exists(m.root / e.image_path))
      throw DataError("entry " + e.id + ": missing image file " + e.image_path);
    if (e.mask_path && !fs::exists(m.root / *e.mask_path))
      throw DataError("entry " + e.id + ": missing mask file " + *e.mask_path);
    if (e.liver_visible && !e.mask_path)
      throw DataError("entry " + e.id + ": liver_visible without a mask");
    if (deep) {
      auto img = read_gray_image(m.root / e.image_path);
      if (img.width != e.width || img.height != e.height)
        throw DataError("entry " + e.id + ": image size differs from manifest");
      if (e.mask_path) {
        auto mask = read_gray_image(m.root / *e.mask_path);
        if (mask.width != e.width || mask.height != e.height)
          throw DataError("entry " + e.id + ": mask size differs from image");
        bool any = false;
        for (auto v : mask.pixels) {
          if (v != 0 && v != 255) throw DataError("entry " + e.id + ": mask not {0,255}");
          any |= v != 0;
        }
        if (e.liver_visible && !any)
          throw DataError("entry " + e.id + ": flagged liver_visible but mask is empty");
      }
    }
  }
}

// Canonical rasters are 16-bit; decode and normalize into [-1,1].
inline ImageSlice load_slice(const DatasetManifest& m, const SliceEntry& e) {
  ImageSlice slice;
  slice.id = e.id;
  auto img = read_gray_image(m.root / e.image_path);
  Tensor<int32_t> raw({img.height, img.width});
  for (int64_t i = 0; i < raw.numel(); ++i) raw[i] = img.pixels[static_cast<size_t>(i)];
  slice.pixels = normalize_slice<float>(raw, 16, e.id);
  if (e.mask_path) {
    auto mask = read_gray_image(m.root / *e.mask_path);
    if (mask.width != img.width || mask.height != img.height)
      throw DataError("entry " + e.id + ": mask size differs from image");
    Tensor<float> mk({mask.height, mask.width});
    for (int64_t i = 0; i < mk.numel(); ++i) {
      const uint16_t v = mask.pixels[static_cast<size_t>(i)];
      if (v != 0 && v != 255) throw DataError("entry " + e.id + ": mask not {0,255}");
      mk[i] = v == 0 ? 0.0f : 1.0f;
    }
    slice.mask = std::move(mk);
  }
  return slice;
}

// Writes pixels in [-1,1] as a canonical 16-bit PNG (+ optional 8-bit mask)
// and returns the manifest entry.
inline SliceEntry write_canonical_slice(const fs::path& root, const ImageSlice& slice,
                                        int source_bit_depth, const std::string& subject_id,
                                        bool synthetic = false) {
  fs::create_directories(root / "images");
  SliceEntry e;
  e.id = slice.id;
  e.width = slice.width();
  e.height = slice.height();
  e.source_bit_depth = source_bit_depth;
  e.subject_id = subject_id;
  e.synthetic = synthetic;
  e.image_path = "images/" + slice.id + ".png";
  auto raw = denormalize_slice(slice.pixels, 16);
  std::vector<uint16_t> px(static_cast<size_t>(raw.numel()));
  for (int64_t i = 0; i < raw.numel(); ++i) px[static_cast<size_t>(i)] = static_cast<uint16_t>(raw[i]);
  write_gray16_png(root / e.image_path, slice.width(), slice.height(), px);
  if (slice.mask) {
    fs::create_directories(root / "masks");
    validate_binary_mask(*slice.mask, "entry " + slice.id);
    e.mask_path = "masks/" + slice.id + ".png";
    std::vector<uint8_t> mk(static_cast<size_t>(slice.mask->numel()));
    for (int64_t i = 0; i < slice.mask->numel(); ++i)
      mk[static_cast<size_t>(i)] = (*slice.mask)[i] != 0.0f ? 255 : 0;
    write_gray8_png(root / *e.mask_path, slice.width(), slice.height(), mk);
    e.liver_visible = mask_nonempty(*slice.mask);
  }
  return e;
}

}  // namespace xmod
