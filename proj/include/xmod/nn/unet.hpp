#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xmod/nn/module.hpp"
#include "xmod/nn/summary.hpp"

namespace xmod {

// Five-level U-Net with same-padding 3x3 conv pairs, 2x2 max pooling,
// nearest upsampling followed by a 2x2 conv, skip concatenation, and a
// single-channel 1x1 sigmoid head. 23 convolutional layers at defaults.
struct UNetConfig {
  int64_t in_channels = 1;
  int64_t out_channels = 1;
  int64_t depth = 5;
  int64_t base_width = 64;
  int64_t convs_per_block = 2;

  void validate() const {
    if (depth < 2) throw ConfigError("unet: depth must be >= 2");
    if (base_width < 4) throw ConfigError("unet: base_width must be >= 4");
    if (convs_per_block != 2) throw ConfigError("unet: convs_per_block must be 2");
  }

  int64_t divisor() const { return int64_t(1) << (depth - 1); }
};

inline std::vector<LayerInfo> describe_unet(const UNetConfig& cfg, int64_t h, int64_t w) {
  cfg.validate();
  std::vector<LayerInfo> out;
  auto conv = [&](const std::string& name, int64_t in_c, int64_t out_c, int64_t k, int64_t oh,
                  int64_t ow) {
    out.push_back({name, "conv", out_c, oh, ow, out_c * in_c * k * k + out_c});
  };
  const int64_t bw = cfg.base_width;
  int64_t in_c = cfg.in_channels;
  int64_t ch = bw, hh = h, ww = w;
  for (int64_t lvl = 0; lvl < cfg.depth; ++lvl) {
    ch = bw << lvl;
    std::string base = "enc" + std::to_string(lvl + 1);
    conv(base + ".conv1", in_c, ch, 3, hh, ww);
    conv(base + ".conv2", ch, ch, 3, hh, ww);
    in_c = ch;
    if (lvl + 1 < cfg.depth) {
      out.push_back({base + ".pool", "pool", ch, hh / 2, ww / 2, 0});
      hh /= 2;
      ww /= 2;
    }
  }
  for (int64_t lvl = cfg.depth - 2; lvl >= 0; --lvl) {
    int64_t up_c = bw << lvl;
    hh *= 2;
    ww *= 2;
    std::string base = "dec" + std::to_string(lvl + 1);
    conv(base + ".up", 2 * up_c, up_c, 2, hh, ww);
    conv(base + ".conv1", 2 * up_c, up_c, 3, hh, ww);
    conv(base + ".conv2", up_c, up_c, 3, hh, ww);
  }
  conv("head.conv1x1", bw, cfg.out_channels, 1, hh, ww);
  return out;
}

inline int64_t unet_analytic_params(const UNetConfig& cfg) {
  int64_t size = cfg.divisor() * 4;
  return total_params(describe_unet(cfg, size, size));
}

template <class T>
class UNet {
 public:
  UNet(UNetConfig cfg, Rng rng) : cfg_(cfg) {
    cfg_.validate();
    const int64_t bw = cfg_.base_width;
    int64_t in_c = cfg_.in_channels;
    for (int64_t lvl = 0; lvl < cfg_.depth; ++lvl) {
      int64_t ch = bw << lvl;
      std::string base = "enc" + std::to_string(lvl + 1);
      enc_.push_back({make_conv(store_, base + ".conv1", in_c, ch, 3, 1, 1, rng, WeightInit::HeNormal),
                      make_conv(store_, base + ".conv2", ch, ch, 3, 1, 1, rng, WeightInit::HeNormal)});
      in_c = ch;
    }
    for (int64_t lvl = cfg_.depth - 2; lvl >= 0; --lvl) {
      int64_t up_c = bw << lvl;
      std::string base = "dec" + std::to_string(lvl + 1);
      // 2x2 same conv; asymmetric zero pad happens in forward.
      dec_.push_back({make_conv(store_, base + ".up", 2 * up_c, up_c, 2, 1, 0, rng, WeightInit::HeNormal),
                      make_conv(store_, base + ".conv1", 2 * up_c, up_c, 3, 1, 1, rng, WeightInit::HeNormal),
                      make_conv(store_, base + ".conv2", up_c, up_c, 3, 1, 1, rng, WeightInit::HeNormal)});
    }
    head_ = make_conv(store_, "head.conv1x1", bw, cfg_.out_channels, 1, 1, 0, rng,
                      WeightInit::HeNormal);
  }

  // Raw pre-sigmoid scores; the numerically stable path for training losses.
  NodePtr<T> forward_logits(const NodePtr<T>& x) const {
    const auto& s = x->value.shape();
    if (s.size() != 4 || s[1] != cfg_.in_channels)
      throw ShapeError("unet: expected (N," + std::to_string(cfg_.in_channels) + ",H,W), got " +
                       x->value.shape_str());
    if (s[2] % cfg_.divisor() != 0 || s[3] % cfg_.divisor() != 0)
      throw ShapeError("unet: spatial dims must be divisible by " + std::to_string(cfg_.divisor()) +
                       ", got " + x->value.shape_str());
    std::vector<NodePtr<T>> skips;
    NodePtr<T> h = x;
    for (int64_t lvl = 0; lvl < cfg_.depth; ++lvl) {
      h = relu(enc_[lvl].conv1(h));
      h = relu(enc_[lvl].conv2(h));
      if (lvl + 1 < cfg_.depth) {
        skips.push_back(h);
        h = max_pool2d(h);
      }
    }
    for (size_t i = 0; i < dec_.size(); ++i) {
      h = upsample_nearest2(h);
      h = relu(dec_[i].up(zero_pad2d(h, 0, 1, 0, 1)));
      h = concat_channels(skips[skips.size() - 1 - i], h);
      h = relu(dec_[i].conv1(h));
      h = relu(dec_[i].conv2(h));
    }
    return head_(h);
  }

  NodePtr<T> forward(const NodePtr<T>& x) const { return sigmoid_op(forward_logits(x)); }

  const UNetConfig& config() const { return cfg_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }

 private:
  struct EncBlock {
    Conv2dLayer<T> conv1, conv2;
  };
  struct DecBlock {
    Conv2dLayer<T> up, conv1, conv2;
  };

  UNetConfig cfg_;
  ParamStore<T> store_;
  std::vector<EncBlock> enc_;
  std::vector<DecBlock> dec_;
  Conv2dLayer<T> head_;
};

template <class Net>
int64_t count_parameters(const Net& net) {
  return net.store().parameter_count();
}

}  // namespace xmod
