#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "xmod/nn/module.hpp"
#include "xmod/nn/summary.hpp"

namespace xmod {

// Patch discriminator: five k=4 conv blocks, strides 2,2,2,1,1, emitting a
// raw score map. Each output unit scores one 70x70 receptive-field patch at
// the default geometry.
struct DiscriminatorConfig {
  int64_t in_channels = 1;
  int64_t base_width = 64;
  int64_t kernel = 4;
  std::vector<int64_t> strides = {2, 2, 2, 1, 1};
  double leaky_slope = 0.2;

  int64_t n_blocks() const { return static_cast<int64_t>(strides.size()); }

  void validate_buildable() const {
    if (strides.size() != 5)
      throw ConfigError("discriminator: exactly 5 blocks with strides 2,2,2,1,1 are supported");
    if (strides != std::vector<int64_t>{2, 2, 2, 1, 1})
      throw ConfigError("discriminator: strides must be 2,2,2,1,1");
    if (kernel != 4) throw ConfigError("discriminator: kernel must be 4");
    if (base_width < 4) throw ConfigError("discriminator: base_width must be >= 4");
  }
};

// Receptive field by the backward recurrence r_in = r_out * s + (k - s),
// folded from the last block to the first.
inline std::pair<int64_t, int64_t> receptive_field(const DiscriminatorConfig& cfg) {
  int64_t r = 1;
  for (auto it = cfg.strides.rbegin(); it != cfg.strides.rend(); ++it)
    r = r * (*it) + (cfg.kernel - *it);
  return {r, r};
}

inline std::vector<int64_t> discriminator_widths(const DiscriminatorConfig& cfg) {
  const int64_t w = cfg.base_width;
  return {w, 2 * w, 4 * w, 8 * w, 1};
}

// Spatial size chain for a given input; throws once the map collapses.
inline std::vector<int64_t> discriminator_size_chain(const DiscriminatorConfig& cfg, int64_t in) {
  std::vector<int64_t> sizes{in};
  int64_t cur = in;
  for (int64_t s : cfg.strides) {
    const int64_t span = cur + 2 - cfg.kernel;
    cur = span < 0 ? 0 : span / s + 1;
    sizes.push_back(cur);
  }
  return sizes;
}

inline int64_t discriminator_min_input(const DiscriminatorConfig& cfg) {
  for (int64_t in = 1; in < 4096; ++in) {
    auto chain = discriminator_size_chain(cfg, in);
    bool ok = true;
    for (size_t i = 1; i < chain.size(); ++i)
      if (chain[i] < 1) ok = false;
    if (ok) return in;
  }
  return -1;
}

inline std::vector<LayerInfo> describe_discriminator(const DiscriminatorConfig& cfg, int64_t h,
                                                     int64_t w) {
  cfg.validate_buildable();
  auto widths = discriminator_widths(cfg);
  auto hs = discriminator_size_chain(cfg, h);
  auto ws = discriminator_size_chain(cfg, w);
  std::vector<LayerInfo> out;
  int64_t in_c = cfg.in_channels;
  for (size_t i = 0; i < widths.size(); ++i) {
    int64_t out_c = widths[i];
    out.push_back({"block" + std::to_string(i + 1), "conv", out_c, hs[i + 1], ws[i + 1],
                   out_c * in_c * cfg.kernel * cfg.kernel + out_c});
    in_c = out_c;
  }
  return out;
}

inline int64_t discriminator_analytic_params(const DiscriminatorConfig& cfg) {
  auto widths = discriminator_widths(cfg);
  int64_t total = 0, in_c = cfg.in_channels;
  for (int64_t out_c : widths) {
    total += out_c * in_c * cfg.kernel * cfg.kernel + out_c;
    in_c = out_c;
  }
  return total;
}

template <class T>
class PatchDiscriminator {
 public:
  PatchDiscriminator(DiscriminatorConfig cfg, Rng rng) : cfg_(std::move(cfg)) {
    cfg_.validate_buildable();
    auto widths = discriminator_widths(cfg_);
    int64_t in_c = cfg_.in_channels;
    for (size_t i = 0; i < widths.size(); ++i) {
      blocks_.push_back(make_conv(store_, "block" + std::to_string(i + 1), in_c, widths[i],
                                  cfg_.kernel, cfg_.strides[i], 1, rng));
      in_c = widths[i];
    }
  }

  NodePtr<T> forward(const NodePtr<T>& x) const {
    const auto& s = x->value.shape();
    if (s.size() != 4 || s[1] != cfg_.in_channels)
      throw ShapeError("discriminator: expected (N," + std::to_string(cfg_.in_channels) +
                       ",H,W), got " + x->value.shape_str());
    auto chain_h = discriminator_size_chain(cfg_, s[2]);
    auto chain_w = discriminator_size_chain(cfg_, s[3]);
    for (size_t i = 1; i < chain_h.size(); ++i)
      if (chain_h[i] < 1 || chain_w[i] < 1)
        throw ShapeError("discriminator: input " + std::to_string(s[2]) + "x" +
                         std::to_string(s[3]) + " too small; minimum input size is " +
                         std::to_string(discriminator_min_input(cfg_)) + "x" +
                         std::to_string(discriminator_min_input(cfg_)));
    NodePtr<T> h = x;
    for (size_t i = 0; i < blocks_.size(); ++i) {
      h = blocks_[i](h);
      const bool last = i + 1 == blocks_.size();
      // No normalization on the first block; raw scores from the last.
      if (!last && i > 0) h = instance_norm(h);
      if (!last) h = leaky_relu(h, static_cast<T>(cfg_.leaky_slope));
    }
    return h;
  }

  const DiscriminatorConfig& config() const { return cfg_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }

 private:
  DiscriminatorConfig cfg_;
  ParamStore<T> store_;
  std::vector<Conv2dLayer<T>> blocks_;
};

}  // namespace xmod
