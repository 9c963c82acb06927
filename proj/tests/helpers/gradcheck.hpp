#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "xmod/core/autodiff.hpp"
#include "xmod/core/rng.hpp"

namespace xmod_test {

template <class T>
xmod::Tensor<T> rand_tensor(std::vector<int64_t> shape, xmod::Rng& rng, T lo = T(-1), T hi = T(1)) {
  xmod::Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

// Central finite differences against the analytic backward pass.
// `build` must construct the scalar loss graph from the given leaves.
struct GradCheckResult {
  double max_err = 0.0;
  bool ok = true;
};

inline GradCheckResult check_gradients(
    const std::function<xmod::NodePtr<double>(const std::vector<xmod::NodePtr<double>>&)>& build,
    std::vector<xmod::NodePtr<double>> inputs, double tol, double eps = 1e-5) {
  auto loss = build(inputs);
  xmod::backward(loss);

  std::vector<xmod::Tensor<double>> analytic;
  for (auto& in : inputs)
    analytic.push_back(in->grad_alloced ? in->grad : xmod::Tensor<double>(in->value.shape()));

  GradCheckResult res;
  for (size_t i = 0; i < inputs.size(); ++i) {
    auto& leaf = inputs[i];
    for (int64_t j = 0; j < leaf->value.numel(); ++j) {
      const double orig = leaf->value[j];
      leaf->value[j] = orig + eps;
      const double fp = build(inputs)->value[0];
      leaf->value[j] = orig - eps;
      const double fm = build(inputs)->value[0];
      leaf->value[j] = orig;
      const double fd = (fp - fm) / (2.0 * eps);
      const double a = analytic[i][j];
      const double err = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      res.max_err = std::max(res.max_err, err);
      if (err > tol) res.ok = false;
    }
  }
  return res;
}

}  // namespace xmod_test
