#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "xmod/core/conv.hpp"
#include "xmod/core/ops.hpp"
#include "xmod/core/rng.hpp"

namespace xmod {

template <class T>
struct NamedParam {
  std::string name;
  NodePtr<T> node;
};

// Flat registry of trainable leaves. Registration order is the canonical
// order for init draws, optimizer slots and checkpoint blobs.
template <class T>
class ParamStore {
 public:
  NodePtr<T> add(std::string name, Tensor<T> init) {
    auto n = make_leaf<T>(std::move(init), true);
    params_.push_back({std::move(name), n});
    return n;
  }

  const std::vector<NamedParam<T>>& params() const { return params_; }

  int64_t parameter_count() const {
    int64_t total = 0;
    for (const auto& p : params_) total += p.node->value.numel();
    return total;
  }

  void set_requires_grad(bool on) {
    for (auto& p : params_) p.node->requires_grad = on;
  }

  void zero_grad() {
    for (auto& p : params_) {
      p.node->grad = Tensor<T>(p.node->value.shape());
      p.node->grad_alloced = true;
    }
  }

 private:
  std::vector<NamedParam<T>> params_;
};

template <class T>
void fill_normal(Tensor<T>& t, Rng& rng, T stddev) {
  std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
}

// Weight init conventions: adversarial nets draw N(0, 0.02); the U-Net uses
// He-normal scaled by fan-in. Biases start at zero.
template <class T>
Tensor<T> init_conv_weight_gan(std::vector<int64_t> shape, Rng& rng) {
  Tensor<T> t(std::move(shape));
  fill_normal(t, rng, T(0.02));
  return t;
}

template <class T>
Tensor<T> init_conv_weight_he(std::vector<int64_t> shape, Rng& rng) {
  int64_t fan_in = shape[1] * shape[2] * shape[3];
  Tensor<T> t(shape);
  fill_normal(t, rng, static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in))));
  return t;
}

template <class T>
struct Conv2dLayer {
  NodePtr<T> w, b;
  int64_t stride = 1, pad = 0;

  NodePtr<T> operator()(const NodePtr<T>& x) const { return conv2d(x, w, b, stride, pad); }
};

template <class T>
struct ConvTranspose2dLayer {
  NodePtr<T> w, b;
  int64_t stride = 2, pad = 1, out_pad = 1;

  NodePtr<T> operator()(const NodePtr<T>& x) const {
    return conv_transpose2d(x, w, b, stride, pad, out_pad);
  }
};

enum class WeightInit { GanNormal, HeNormal };

template <class T>
Conv2dLayer<T> make_conv(ParamStore<T>& store, const std::string& name, int64_t in_c, int64_t out_c,
                         int64_t k, int64_t stride, int64_t pad, Rng& rng,
                         WeightInit init = WeightInit::GanNormal) {
  Tensor<T> w = init == WeightInit::GanNormal
                    ? init_conv_weight_gan<T>({out_c, in_c, k, k}, rng)
                    : init_conv_weight_he<T>({out_c, in_c, k, k}, rng);
  Conv2dLayer<T> layer;
  layer.w = store.add(name + ".w", std::move(w));
  layer.b = store.add(name + ".b", Tensor<T>({out_c}));
  layer.stride = stride;
  layer.pad = pad;
  return layer;
}

template <class T>
ConvTranspose2dLayer<T> make_conv_transpose(ParamStore<T>& store, const std::string& name,
                                            int64_t in_c, int64_t out_c, int64_t k, int64_t stride,
                                            int64_t pad, int64_t out_pad, Rng& rng) {
  ConvTranspose2dLayer<T> layer;
  layer.w = store.add(name + ".w", init_conv_weight_gan<T>({in_c, out_c, k, k}, rng));
  layer.b = store.add(name + ".b", Tensor<T>({out_c}));
  layer.stride = stride;
  layer.pad = pad;
  layer.out_pad = out_pad;
  return layer;
}

}  // namespace xmod
