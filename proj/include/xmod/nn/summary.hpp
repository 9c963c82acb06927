#pragma once

#include <cstdint>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace xmod {

struct LayerInfo {
  std::string name;
  std::string kind;          // conv / conv_transpose / norm / act / pool / ...
  int64_t out_c = 0, out_h = 0, out_w = 0;
  int64_t params = 0;
};

inline int64_t total_params(const std::vector<LayerInfo>& layers) {
  int64_t t = 0;
  for (const auto& l : layers) t += l.params;
  return t;
}

inline int64_t conv_layer_census(const std::vector<LayerInfo>& layers) {
  int64_t n = 0;
  for (const auto& l : layers)
    if (l.kind == "conv" || l.kind == "conv_transpose") ++n;
  return n;
}

inline std::string format_layer_table(const std::string& title,
                                      const std::vector<LayerInfo>& layers) {
  std::ostringstream os;
  os << title << "\n";
  os << std::left << std::setw(28) << "layer" << std::setw(16) << "kind" << std::setw(20)
     << "output (CxHxW)" << std::right << std::setw(12) << "params" << "\n";
  os << std::string(76, '-') << "\n";
  for (const auto& l : layers) {
    std::ostringstream shape;
    shape << l.out_c << "x" << l.out_h << "x" << l.out_w;
    os << std::left << std::setw(28) << l.name << std::setw(16) << l.kind << std::setw(20)
       << shape.str() << std::right << std::setw(12) << l.params << "\n";
  }
  os << std::string(76, '-') << "\n";
  os << std::left << std::setw(64) << "total trainable parameters" << std::right << std::setw(12)
     << total_params(layers) << "\n";
  return os.str();
}

}  // namespace xmod
