#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "xmod/nn/module.hpp"

namespace xmod {

// Adaptive-moment optimizer. Slot order mirrors the store's registration
// order so checkpoints restore exactly. The store is passed to step() so
// owning state objects stay freely movable.
template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(const ParamStore<T>& store, T lr, T beta1, T beta2, T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : store.params()) {
      m_.emplace_back(p.node->value.shape());
      v_.emplace_back(p.node->value.shape());
    }
  }

  void step(const ParamStore<T>& store) {
    const auto& params = store.params();
    if (params.size() != m_.size())
      throw ShapeError("adam: store does not match optimizer slots");
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& node = *params[i].node;
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      const bool has_grad = node.grad_alloced;
      for (int64_t j = 0; j < node.value.numel(); ++j) {
        const T g = has_grad ? node.grad[j] : T(0);
        m[j] = beta1_ * m[j] + (T(1) - beta1_) * g;
        v[j] = beta2_ * v[j] + (T(1) - beta2_) * g * g;
        const T mhat = m[j] / bc1;
        const T vhat = v[j] / bc2;
        node.value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }
  std::vector<Tensor<T>>& slots_m() { return m_; }
  std::vector<Tensor<T>>& slots_v() { return v_; }
  const std::vector<Tensor<T>>& slots_m() const { return m_; }
  const std::vector<Tensor<T>>& slots_v() const { return v_; }
  T lr() const { return lr_; }

 private:
  T lr_ = T(1e-4), beta1_ = T(0.9), beta2_ = T(0.999), eps_ = T(1e-8);
  int64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace xmod
