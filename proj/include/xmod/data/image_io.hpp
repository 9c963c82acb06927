#pragma once

#include <png.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "xmod/errors.hpp"

namespace xmod {

// Grayscale raster held in a 16-bit container; bit_depth records the file's
// container depth (8 or 16).
struct GrayImage {
  int64_t width = 0;
  int64_t height = 0;
  int bit_depth = 16;
  std::vector<uint16_t> pixels;

  uint16_t& at(int64_t y, int64_t x) { return pixels[static_cast<size_t>(y * width + x)]; }
  uint16_t at(int64_t y, int64_t x) const { return pixels[static_cast<size_t>(y * width + x)]; }
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline GrayImage read_png_gray(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw DataError("cannot open image: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng init failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed to decode PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color_type != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("expected grayscale PNG, got color type " + std::to_string(color_type) +
                    " in " + path.string());
  }
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);

  GrayImage img;
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.bit_depth = depth == 16 ? 16 : 8;
  img.pixels.resize(static_cast<size_t>(img.width * img.height));

  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  std::vector<uint8_t> buf8;
  if (img.bit_depth == 16) {
    for (int64_t y = 0; y < img.height; ++y)
      rows[y] = reinterpret_cast<png_bytep>(img.pixels.data() + y * img.width);
  } else {
    buf8.resize(static_cast<size_t>(img.width * img.height));
    for (int64_t y = 0; y < img.height; ++y) rows[y] = buf8.data() + y * img.width;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (img.bit_depth == 8)
    for (size_t i = 0; i < buf8.size(); ++i) img.pixels[i] = buf8[i];
  return img;
}

inline void write_png_gray(const std::filesystem::path& path, const GrayImage& img) {
  if (img.bit_depth != 8 && img.bit_depth != 16)
    throw DataError("write_png_gray: bit depth must be 8 or 16");
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw DataError("cannot write image: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng init failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               img.bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (img.bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);

  std::vector<uint8_t> buf8;
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  if (img.bit_depth == 16) {
    for (int64_t y = 0; y < img.height; ++y)
      rows[y] = reinterpret_cast<png_bytep>(const_cast<uint16_t*>(img.pixels.data() + y * img.width));
  } else {
    buf8.resize(static_cast<size_t>(img.width * img.height));
    for (size_t i = 0; i < buf8.size(); ++i) {
      if (img.pixels[i] > 255)
        throw DataError("write_png_gray: value exceeds 8-bit range");
      buf8[i] = static_cast<uint8_t>(img.pixels[i]);
    }
    for (int64_t y = 0; y < img.height; ++y) rows[y] = buf8.data() + y * img.width;
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Minimal PGM (P2/P5) reader for ingestion sources.
inline GrayImage read_pgm_gray(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") throw DataError("not a PGM file: " + path.string());
  auto next_token = [&in, &path]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string line;
        std::getline(in, line);
        continue;
      }
      return tok;
    }
    throw DataError("truncated PGM header: " + path.string());
  };
  GrayImage img;
  img.width = std::stoll(next_token());
  img.height = std::stoll(next_token());
  const int64_t maxval = std::stoll(next_token());
  if (maxval < 1 || maxval > 65535) throw DataError("unsupported PGM maxval in " + path.string());
  img.bit_depth = maxval > 255 ? 16 : 8;
  const int64_t n = img.width * img.height;
  img.pixels.resize(static_cast<size_t>(n));
  if (magic == "P2") {
    for (int64_t i = 0; i < n; ++i) {
      int64_t v;
      if (!(in >> v)) throw DataError("truncated PGM data: " + path.string());
      img.pixels[i] = static_cast<uint16_t>(v);
    }
  } else {
    in.get();  // single whitespace after maxval
    if (maxval > 255) {
      std::vector<uint8_t> raw(static_cast<size_t>(n * 2));
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (!in) throw DataError("truncated PGM data: " + path.string());
      for (int64_t i = 0; i < n; ++i)
        img.pixels[i] = static_cast<uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    } else {
      std::vector<uint8_t> raw(static_cast<size_t>(n));
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (!in) throw DataError("truncated PGM data: " + path.string());
      for (int64_t i = 0; i < n; ++i) img.pixels[i] = raw[i];
    }
  }
  return img;
}

}  // namespace detail

inline GrayImage read_gray_image(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return detail::read_png_gray(path);
  if (ext == ".pgm") return detail::read_pgm_gray(path);
  throw DataError("unsupported image format (expected .png or .pgm): " + path.string());
}

inline void write_gray16_png(const std::filesystem::path& path, int64_t width, int64_t height,
                             const std::vector<uint16_t>& pixels) {
  GrayImage img{width, height, 16, pixels};
  detail::write_png_gray(path, img);
}

inline void write_gray8_png(const std::filesystem::path& path, int64_t width, int64_t height,
                            const std::vector<uint8_t>& pixels) {
  GrayImage img;
  img.width = width;
  img.height = height;
  img.bit_depth = 8;
  img.pixels.assign(pixels.begin(), pixels.end());
  detail::write_png_gray(path, img);
}

}  // namespace xmod
