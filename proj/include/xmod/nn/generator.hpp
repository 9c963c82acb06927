#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xmod/nn/module.hpp"
#include "xmod/nn/summary.hpp"

namespace xmod {

enum class NormKind { Instance, None };
enum class FinalActivation { Tanh, Logits };

// Encoder / 9 residual blocks / decoder translation trunk. With
// out_channels=1 and a tanh head this is a domain generator; with
// out_channels=2 and raw logits it is the segmentation branch sharing the
// same trunk.
struct GeneratorConfig {
  int64_t in_channels = 1;
  int64_t out_channels = 1;
  int64_t base_width = 64;
  int64_t n_res_blocks = 9;
  NormKind norm = NormKind::Instance;
  FinalActivation final_activation = FinalActivation::Tanh;

  void validate() const {
    if (n_res_blocks < 1) throw ConfigError("generator: n_res_blocks must be >= 1");
    if (base_width < 4) throw ConfigError("generator: base_width must be >= 4");
    if (in_channels < 1 || out_channels < 1)
      throw ConfigError("generator: channel counts must be >= 1");
  }
};

inline GeneratorConfig segmentor_config(GeneratorConfig cfg) {
  cfg.out_channels = 2;
  cfg.final_activation = FinalActivation::Logits;
  return cfg;
}

inline std::vector<LayerInfo> describe_generator(const GeneratorConfig& cfg, int64_t h, int64_t w) {
  cfg.validate();
  std::vector<LayerInfo> out;
  const int64_t wd = cfg.base_width;
  auto conv = [&](const std::string& name, int64_t in_c, int64_t out_c, int64_t k, int64_t oh,
                  int64_t ow) {
    out.push_back({name, "conv", out_c, oh, ow, out_c * in_c * k * k + out_c});
  };
  conv("enc.conv7", cfg.in_channels, wd, 7, h, w);
  conv("enc.down1", wd, 2 * wd, 3, h / 2, w / 2);
  conv("enc.down2", 2 * wd, 4 * wd, 3, h / 4, w / 4);
  for (int64_t i = 0; i < cfg.n_res_blocks; ++i) {
    conv("res" + std::to_string(i + 1) + ".conv1", 4 * wd, 4 * wd, 3, h / 4, w / 4);
    conv("res" + std::to_string(i + 1) + ".conv2", 4 * wd, 4 * wd, 3, h / 4, w / 4);
  }
  out.push_back({"dec.up1", "conv_transpose", 2 * wd, h / 2, w / 2, 4 * wd * 2 * wd * 9 + 2 * wd});
  out.push_back({"dec.up2", "conv_transpose", wd, h, w, 2 * wd * wd * 9 + wd});
  conv("dec.conv7", wd, cfg.out_channels, 7, h, w);
  return out;
}

inline int64_t generator_analytic_params(const GeneratorConfig& cfg) {
  return total_params(describe_generator(cfg, 4, 4));
}

template <class T>
class ResnetGenerator {
 public:
  ResnetGenerator(GeneratorConfig cfg, Rng rng) : cfg_(cfg) {
    cfg_.validate();
    const int64_t w = cfg_.base_width;
    enc7_ = make_conv(store_, "enc.conv7", cfg_.in_channels, w, 7, 1, 0, rng);
    down1_ = make_conv(store_, "enc.down1", w, 2 * w, 3, 2, 1, rng);
    down2_ = make_conv(store_, "enc.down2", 2 * w, 4 * w, 3, 2, 1, rng);
    for (int64_t i = 0; i < cfg_.n_res_blocks; ++i) {
      std::string base = "res" + std::to_string(i + 1);
      res_.push_back({make_conv(store_, base + ".conv1", 4 * w, 4 * w, 3, 1, 0, rng),
                      make_conv(store_, base + ".conv2", 4 * w, 4 * w, 3, 1, 0, rng)});
    }
    up1_ = make_conv_transpose(store_, "dec.up1", 4 * w, 2 * w, 3, 2, 1, 1, rng);
    up2_ = make_conv_transpose(store_, "dec.up2", 2 * w, w, 3, 2, 1, 1, rng);
    out7_ = make_conv(store_, "dec.conv7", w, cfg_.out_channels, 7, 1, 0, rng);
  }

  NodePtr<T> forward(const NodePtr<T>& x) const {
    const auto& s = x->value.shape();
    if (s.size() != 4 || s[1] != cfg_.in_channels)
      throw ShapeError("generator: expected (N," + std::to_string(cfg_.in_channels) +
                       ",H,W), got " + x->value.shape_str());
    if (s[2] % 4 != 0 || s[3] % 4 != 0)
      throw ShapeError("generator: spatial dims must be divisible by 4, got " +
                       x->value.shape_str());
    auto h = norm(enc7_(reflection_pad2d(x, 3)));
    h = relu(h);
    h = relu(norm(down1_(h)));
    h = relu(norm(down2_(h)));
    for (const auto& block : res_) {
      auto y = relu(norm(block.conv1(reflection_pad2d(h, 1))));
      y = norm(block.conv2(reflection_pad2d(y, 1)));
      h = add(h, y);
    }
    h = relu(norm(up1_(h)));
    h = relu(norm(up2_(h)));
    h = out7_(reflection_pad2d(h, 3));
    if (cfg_.final_activation == FinalActivation::Tanh) h = tanh_op(h);
    return h;
  }

  const GeneratorConfig& config() const { return cfg_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }

 private:
  NodePtr<T> norm(const NodePtr<T>& x) const {
    return cfg_.norm == NormKind::Instance ? instance_norm(x) : x;
  }

  struct ResBlock {
    Conv2dLayer<T> conv1, conv2;
  };

  GeneratorConfig cfg_;
  ParamStore<T> store_;
  Conv2dLayer<T> enc7_, down1_, down2_, out7_;
  std::vector<ResBlock> res_;
  ConvTranspose2dLayer<T> up1_, up2_;
};

}  // namespace xmod
