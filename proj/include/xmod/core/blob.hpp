#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "xmod/core/tensor.hpp"

namespace xmod {

// Named-tensor container with a small binary format:
//   magic "XMODTNS1", u32 count, then per tensor:
//   u16 name_len, name, u8 dtype (4=f32, 8=f64), u8 rank, i64 dims, raw LE data.
// Weights round-trip bit-exactly.
template <class T>
class TensorBlob {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);

 public:
  void put(const std::string& name, const Tensor<T>& t) { items_[name] = t; }

  const Tensor<T>& get(const std::string& name) const {
    auto it = items_.find(name);
    if (it == items_.end()) throw DataError("tensor blob: missing entry " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return items_.count(name) > 0; }
  size_t size() const { return items_.size(); }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write("XMODTNS1", 8);
    write_u32(out, static_cast<uint32_t>(items_.size()));
    for (const auto& [name, t] : items_) {
      write_u16(out, static_cast<uint16_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      const uint8_t dtype = sizeof(T);
      out.put(static_cast<char>(dtype));
      out.put(static_cast<char>(t.rank()));
      for (int64_t d : t.shape()) write_i64(out, d);
      out.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(T)));
    }
    if (!out) throw DataError("failed writing " + path.string());
  }

  static TensorBlob load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "XMODTNS1", 8) != 0)
      throw DataError("not a tensor blob: " + path.string());
    TensorBlob blob;
    const uint32_t count = read_u32(in);
    for (uint32_t i = 0; i < count; ++i) {
      const uint16_t name_len = read_u16(in);
      std::string name(name_len, '\0');
      in.read(name.data(), name_len);
      const uint8_t dtype = static_cast<uint8_t>(in.get());
      if (dtype != sizeof(T))
        throw DataError("tensor blob dtype mismatch in " + path.string() + " entry " + name);
      const uint8_t rank = static_cast<uint8_t>(in.get());
      std::vector<int64_t> shape(rank);
      for (auto& d : shape) d = read_i64(in);
      Tensor<T> t(shape);
      in.read(reinterpret_cast<char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(T)));
      if (!in) throw DataError("truncated tensor blob: " + path.string());
      blob.items_.emplace(std::move(name), std::move(t));
    }
    return blob;
  }

 private:
  static void write_u16(std::ostream& out, uint16_t v) {
    out.write(reinterpret_cast<const char*>(&v), 2);
  }
  static void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  static void write_i64(std::ostream& out, int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  }
  static uint16_t read_u16(std::istream& in) {
    uint16_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 2);
    return v;
  }
  static uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  }
  static int64_t read_i64(std::istream& in) {
    int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  }

  std::map<std::string, Tensor<T>> items_;
};

}  // namespace xmod
