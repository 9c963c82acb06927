#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "xmod/core/autodiff.hpp"

namespace xmod {

namespace detail {

template <class T>
inline void accum_into(Node<T>& parent, const Tensor<T>& delta) {
  if (!parent.requires_grad) return;
  ensure_grad(parent);
  T* g = parent.grad.data();
  const T* d = delta.data();
  for (int64_t i = 0; i < delta.numel(); ++i) g[i] += d[i];
}

template <class T>
inline T stable_softplus(T x) {
  // log(1 + e^x) without overflow on either tail
  T m = x > T(0) ? x : T(0);
  return m + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
inline T sigmoid_v(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

template <class T, class FwdFn, class DFn>
NodePtr<T> unary_op(const NodePtr<T>& a, FwdFn f, DFn df, const char* name) {
  Tensor<T> out(a->value.shape());
  const T* in = a->value.data();
  T* o = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) o[i] = f(in[i]);
  NodePtr<T> pa = a;
  return make_node<T>(
      std::move(out), {a},
      [pa, df](Node<T>& self) {
        if (!pa->requires_grad) return;
        ensure_grad(*pa);
        const T* x = pa->value.data();
        const T* y = self.value.data();
        const T* g = self.grad.data();
        T* gx = pa->grad.data();
        for (int64_t i = 0; i < self.value.numel(); ++i) gx[i] += g[i] * df(x[i], y[i]);
      },
      name);
}

template <class T>
NodePtr<T> add(const NodePtr<T>& a, const NodePtr<T>& b) {
  check_same_shape(a->value, b->value, "add");
  Tensor<T> out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  NodePtr<T> pa = a, pb = b;
  return make_node<T>(
      std::move(out), {a, b},
      [pa, pb](Node<T>& self) {
        detail::accum_into(*pa, self.grad);
        detail::accum_into(*pb, self.grad);
      },
      "add");
}

template <class T>
NodePtr<T> sub(const NodePtr<T>& a, const NodePtr<T>& b) {
  check_same_shape(a->value, b->value, "sub");
  Tensor<T> out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
  NodePtr<T> pa = a, pb = b;
  return make_node<T>(
      std::move(out), {a, b},
      [pa, pb](Node<T>& self) {
        detail::accum_into(*pa, self.grad);
        if (pb->requires_grad) {
          ensure_grad(*pb);
          for (int64_t i = 0; i < self.grad.numel(); ++i) pb->grad[i] -= self.grad[i];
        }
      },
      "sub");
}

template <class T>
NodePtr<T> mul(const NodePtr<T>& a, const NodePtr<T>& b) {
  check_same_shape(a->value, b->value, "mul");
  Tensor<T> out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  NodePtr<T> pa = a, pb = b;
  return make_node<T>(
      std::move(out), {a, b},
      [pa, pb](Node<T>& self) {
        if (pa->requires_grad) {
          ensure_grad(*pa);
          for (int64_t i = 0; i < self.grad.numel(); ++i) pa->grad[i] += self.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
          ensure_grad(*pb);
          for (int64_t i = 0; i < self.grad.numel(); ++i) pb->grad[i] += self.grad[i] * pa->value[i];
        }
      },
      "mul");
}

template <class T>
NodePtr<T> scale(const NodePtr<T>& a, T c) {
  return unary_op<T>(
      a, [c](T x) { return c * x; }, [c](T, T) { return c; }, "scale");
}

template <class T>
NodePtr<T> neg(const NodePtr<T>& a) {
  return scale<T>(a, T(-1));
}

template <class T>
NodePtr<T> add_scalar(const NodePtr<T>& a, T c) {
  return unary_op<T>(
      a, [c](T x) { return x + c; }, [](T, T) { return T(1); }, "add_scalar");
}

template <class T>
NodePtr<T> abs_op(const NodePtr<T>& a) {
  return unary_op<T>(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x >= T(0) ? T(1) : T(-1); }, "abs");
}

template <class T>
NodePtr<T> square(const NodePtr<T>& a) {
  return unary_op<T>(
      a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; }, "square");
}

template <class T>
NodePtr<T> tanh_op(const NodePtr<T>& a) {
  return unary_op<T>(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; }, "tanh");
}

template <class T>
NodePtr<T> sigmoid_op(const NodePtr<T>& a) {
  return unary_op<T>(
      a, [](T x) { return detail::sigmoid_v(x); },
      [](T, T y) { return y * (T(1) - y); }, "sigmoid");
}

template <class T>
NodePtr<T> relu(const NodePtr<T>& a) {
  return unary_op<T>(
      a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); }, "relu");
}

template <class T>
NodePtr<T> leaky_relu(const NodePtr<T>& a, T slope) {
  return unary_op<T>(
      a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; }, "leaky_relu");
}

template <class T>
NodePtr<T> softplus_op(const NodePtr<T>& a) {
  return unary_op<T>(
      a, [](T x) { return detail::stable_softplus(x); },
      [](T x, T) { return detail::sigmoid_v(x); }, "softplus");
}

template <class T>
NodePtr<T> sum_all(const NodePtr<T>& a) {
  T s = T(0);
  for (int64_t i = 0; i < a->value.numel(); ++i) s += a->value[i];
  NodePtr<T> pa = a;
  return make_node<T>(
      Tensor<T>::scalar(s), {a},
      [pa](Node<T>& self) {
        if (!pa->requires_grad) return;
        ensure_grad(*pa);
        T g = self.grad[0];
        for (int64_t i = 0; i < pa->grad.numel(); ++i) pa->grad[i] += g;
      },
      "sum_all");
}

template <class T>
NodePtr<T> mean_all(const NodePtr<T>& a) {
  const T inv = T(1) / static_cast<T>(a->value.numel());
  return scale<T>(sum_all(a), inv);
}

template <class T>
NodePtr<T> concat_channels(const NodePtr<T>& a, const NodePtr<T>& b) {
  const auto& sa = a->value.shape();
  const auto& sb = b->value.shape();
  if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3])
    throw ShapeError("concat_channels: incompatible " + a->value.shape_str() + " vs " + b->value.shape_str());
  int64_t n = sa[0], ca = sa[1], cb = sb[1], h = sa[2], w = sa[3];
  Tensor<T> out({n, ca + cb, h, w});
  const int64_t plane = h * w;
  for (int64_t i = 0; i < n; ++i) {
    std::copy_n(a->value.data() + i * ca * plane, ca * plane, out.data() + i * (ca + cb) * plane);
    std::copy_n(b->value.data() + i * cb * plane, cb * plane,
                out.data() + i * (ca + cb) * plane + ca * plane);
  }
  NodePtr<T> pa = a, pb = b;
  return make_node<T>(
      std::move(out), {a, b},
      [pa, pb, n, ca, cb, plane](Node<T>& self) {
        for (int64_t i = 0; i < n; ++i) {
          const T* g = self.grad.data() + i * (ca + cb) * plane;
          if (pa->requires_grad) {
            ensure_grad(*pa);
            T* ga = pa->grad.data() + i * ca * plane;
            for (int64_t j = 0; j < ca * plane; ++j) ga[j] += g[j];
          }
          if (pb->requires_grad) {
            ensure_grad(*pb);
            T* gb = pb->grad.data() + i * cb * plane;
            for (int64_t j = 0; j < cb * plane; ++j) gb[j] += g[ca * plane + j];
          }
        }
      },
      "concat");
}

template <class T>
NodePtr<T> reflection_pad2d(const NodePtr<T>& a, int64_t p) {
  const auto& s = a->value.shape();
  if (s.size() != 4) throw ShapeError("reflection_pad2d expects NCHW");
  int64_t n = s[0], c = s[1], h = s[2], w = s[3];
  if (p >= h || p >= w) throw ShapeError("reflection_pad2d: pad too large for input");
  Tensor<T> out({n, c, h + 2 * p, w + 2 * p});
  auto reflect = [](int64_t i, int64_t size) {
    if (i < 0) return -i;
    if (i >= size) return 2 * size - 2 - i;
    return i;
  };
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j)
      for (int64_t y = 0; y < h + 2 * p; ++y)
        for (int64_t x = 0; x < w + 2 * p; ++x)
          out.at(i, j, y, x) = a->value.at(i, j, reflect(y - p, h), reflect(x - p, w));
  NodePtr<T> pa = a;
  return make_node<T>(
      std::move(out), {a},
      [pa, p, n, c, h, w, reflect](Node<T>& self) {
        if (!pa->requires_grad) return;
        ensure_grad(*pa);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < c; ++j)
            for (int64_t y = 0; y < h + 2 * p; ++y)
              for (int64_t x = 0; x < w + 2 * p; ++x)
                pa->grad.at(i, j, reflect(y - p, h), reflect(x - p, w)) += self.grad.at(i, j, y, x);
      },
      "reflection_pad2d");
}

template <class T>
NodePtr<T> zero_pad2d(const NodePtr<T>& a, int64_t top, int64_t bottom, int64_t left, int64_t right) {
  const auto& s = a->value.shape();
  if (s.size() != 4) throw ShapeError("zero_pad2d expects NCHW");
  int64_t n = s[0], c = s[1], h = s[2], w = s[3];
  Tensor<T> out({n, c, h + top + bottom, w + left + right});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) out.at(i, j, y + top, x + left) = a->value.at(i, j, y, x);
  NodePtr<T> pa = a;
  return make_node<T>(
      std::move(out), {a},
      [pa, top, left, n, c, h, w](Node<T>& self) {
        if (!pa->requires_grad) return;
        ensure_grad(*pa);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < c; ++j)
            for (int64_t y = 0; y < h; ++y)
              for (int64_t x = 0; x < w; ++x)
                pa->grad.at(i, j, y, x) += self.grad.at(i, j, y + top, x + left);
      },
      "zero_pad2d");
}

// Per-sample, per-channel whitening over the spatial plane; no affine terms.
template <class T>
NodePtr<T> instance_norm(const NodePtr<T>& a, T eps = T(1e-5)) {
  const auto& s = a->value.shape();
  if (s.size() != 4) throw ShapeError("instance_norm expects NCHW");
  int64_t n = s[0], c = s[1], plane = s[2] * s[3];
  Tensor<T> out(s);
  Tensor<T> inv_std({n, c});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j) {
      const T* x = a->value.data() + (i * c + j) * plane;
      T* y = out.data() + (i * c + j) * plane;
      T mu = T(0);
      for (int64_t k = 0; k < plane; ++k) mu += x[k];
      mu /= static_cast<T>(plane);
      T var = T(0);
      for (int64_t k = 0; k < plane; ++k) var += (x[k] - mu) * (x[k] - mu);
      var /= static_cast<T>(plane);
      T is = T(1) / std::sqrt(var + eps);
      inv_std[i * c + j] = is;
      for (int64_t k = 0; k < plane; ++k) y[k] = (x[k] - mu) * is;
    }
  NodePtr<T> pa = a;
  return make_node<T>(
      std::move(out), {a},
      [pa, n, c, plane, inv_std](Node<T>& self) {
        if (!pa->requires_grad) return;
        ensure_grad(*pa);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < c; ++j) {
            const T* xhat = self.value.data() + (i * c + j) * plane;
            const T* g = self.grad.data() + (i * c + j) * plane;
            T* gx = pa->grad.data() + (i * c + j) * plane;
            T gmean = T(0), gdotx = T(0);
            for (int64_t k = 0; k < plane; ++k) {
              gmean += g[k];
              gdotx += g[k] * xhat[k];
            }
            gmean /= static_cast<T>(plane);
            gdotx /= static_cast<T>(plane);
            const T is = inv_std[i * c + j];
            for (int64_t k = 0; k < plane; ++k)
              gx[k] += is * (g[k] - gmean - xhat[k] * gdotx);
          }
      },
      "instance_norm");
}

// Mean binary cross-entropy of logits z against constant targets y in [0,1]:
// mean(softplus(z) - z*y). Stable for large |z|.
template <class T>
NodePtr<T> bce_with_logits_mean(const NodePtr<T>& z, Tensor<T> targets) {
  check_same_shape(z->value, targets, "bce_with_logits");
  const int64_t m = z->value.numel();
  T s = T(0);
  for (int64_t i = 0; i < m; ++i)
    s += detail::stable_softplus(z->value[i]) - z->value[i] * targets[i];
  s /= static_cast<T>(m);
  NodePtr<T> pz = z;
  return make_node<T>(
      Tensor<T>::scalar(s), {z},
      [pz, targets = std::move(targets), m](Node<T>& self) {
        if (!pz->requires_grad) return;
        ensure_grad(*pz);
        const T g = self.grad[0] / static_cast<T>(m);
        for (int64_t i = 0; i < m; ++i)
          pz->grad[i] += g * (detail::sigmoid_v(pz->value[i]) - targets[i]);
      },
      "bce_with_logits");
}

// Two-class pixel cross-entropy: -mean log softmax(logits)[gt].
// logits (N,2,H,W), gt (N,H,W) with values exactly 0 or 1.
template <class T>
NodePtr<T> softmax2_cross_entropy(const NodePtr<T>& logits, const Tensor<T>& gt) {
  const auto& s = logits->value.shape();
  if (s.size() != 4 || s[1] != 2)
    throw ShapeError("softmax2_cross_entropy expects (N,2,H,W), got " + logits->value.shape_str());
  if (gt.shape() != std::vector<int64_t>{s[0], s[2], s[3]})
    throw ShapeError("softmax2_cross_entropy: mask shape " + gt.shape_str() + " does not match logits " +
                     logits->value.shape_str());
  const int64_t n = s[0], plane = s[2] * s[3];
  std::vector<int8_t> cls(static_cast<size_t>(n * plane));
  for (int64_t i = 0; i < n * plane; ++i) {
    T v = gt[i];
    if (v == T(0))
      cls[i] = 0;
    else if (v == T(1))
      cls[i] = 1;
    else
      throw ShapeError("segmentation mask must be binary; found non {0,1} value");
  }
  T loss = T(0);
  for (int64_t i = 0; i < n; ++i) {
    const T* z0 = logits->value.data() + (i * 2 + 0) * plane;
    const T* z1 = logits->value.data() + (i * 2 + 1) * plane;
    for (int64_t k = 0; k < plane; ++k) {
      T m = std::max(z0[k], z1[k]);
      T lse = m + std::log(std::exp(z0[k] - m) + std::exp(z1[k] - m));
      T zt = cls[i * plane + k] == 0 ? z0[k] : z1[k];
      loss += lse - zt;
    }
  }
  loss /= static_cast<T>(n * plane);
  NodePtr<T> pl = logits;
  return make_node<T>(
      Tensor<T>::scalar(loss), {logits},
      [pl, cls = std::move(cls), n, plane](Node<T>& self) {
        if (!pl->requires_grad) return;
        ensure_grad(*pl);
        const T g = self.grad[0] / static_cast<T>(n * plane);
        for (int64_t i = 0; i < n; ++i) {
          const T* z0 = pl->value.data() + (i * 2 + 0) * plane;
          const T* z1 = pl->value.data() + (i * 2 + 1) * plane;
          T* g0 = pl->grad.data() + (i * 2 + 0) * plane;
          T* g1 = pl->grad.data() + (i * 2 + 1) * plane;
          for (int64_t k = 0; k < plane; ++k) {
            T m = std::max(z0[k], z1[k]);
            T e0 = std::exp(z0[k] - m), e1 = std::exp(z1[k] - m);
            T p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
            int8_t t = cls[i * plane + k];
            g0[k] += g * (p0 - (t == 0 ? T(1) : T(0)));
            g1[k] += g * (p1 - (t == 1 ? T(1) : T(0)));
          }
        }
      },
      "softmax2_ce");
}

}  // namespace xmod
