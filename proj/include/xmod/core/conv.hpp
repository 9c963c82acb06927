#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "xmod/core/autodiff.hpp"

namespace xmod {

namespace detail {

template <class T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapRM = Eigen::Map<MatRM<T>>;
template <class T>
using CMapRM = Eigen::Map<const MatRM<T>>;

struct ConvGeom {
  int64_t c, h, w;        // image plane (the large side of the im2col relation)
  int64_t kh, kw;
  int64_t stride, pad;
  int64_t gh, gw;          // grid (the small side)
};

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  const int64_t span = in + 2 * pad - k;
  if (span < 0) return 0;  // truncating division would round -1/2 up to 0
  return span / stride + 1;
}

// Gathers k x k patches of `img` (C,h,w) into col (C*kh*kw, gh*gw).
template <class T>
void im2col(const ConvGeom& g, const T* img, T* col) {
  const int64_t cols = g.gh * g.gw;
  for (int64_t c = 0; c < g.c; ++c)
    for (int64_t ki = 0; ki < g.kh; ++ki)
      for (int64_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * cols;
        for (int64_t oy = 0; oy < g.gh; ++oy) {
          int64_t iy = oy * g.stride - g.pad + ki;
          for (int64_t ox = 0; ox < g.gw; ++ox) {
            int64_t ix = ox * g.stride - g.pad + kj;
            row[oy * g.gw + ox] = (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w)
                                      ? img[(c * g.h + iy) * g.w + ix]
                                      : T(0);
          }
        }
      }
}

// Scatter-add of col back into the image plane; inverse relation of im2col.
template <class T>
void col2im(const ConvGeom& g, const T* col, T* img) {
  const int64_t cols = g.gh * g.gw;
  for (int64_t c = 0; c < g.c; ++c)
    for (int64_t ki = 0; ki < g.kh; ++ki)
      for (int64_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * cols;
        for (int64_t oy = 0; oy < g.gh; ++oy) {
          int64_t iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.h) continue;
          for (int64_t ox = 0; ox < g.gw; ++ox) {
            int64_t ix = ox * g.stride - g.pad + kj;
            if (ix < 0 || ix >= g.w) continue;
            img[(c * g.h + iy) * g.w + ix] += row[oy * g.gw + ox];
          }
        }
      }
}

}  // namespace detail

// 2-D convolution, symmetric zero padding. x (N,Cin,H,W), w (Cout,Cin,kh,kw),
// b (Cout). Output (N,Cout,Hout,Wout).
template <class T>
NodePtr<T> conv2d(const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b,
                  int64_t stride, int64_t pad) {
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  if (xs.size() != 4 || ws.size() != 4)
    throw ShapeError("conv2d expects NCHW input and OIHW weight");
  if (xs[1] != ws[1])
    throw ShapeError("conv2d: input channels " + std::to_string(xs[1]) + " != weight channels " +
                     std::to_string(ws[1]));
  const int64_t n = xs[0], cin = xs[1], h = xs[2], wd = xs[3];
  const int64_t cout = ws[0], kh = ws[2], kw = ws[3];
  const int64_t ho = detail::conv_out_dim(h, kh, stride, pad);
  const int64_t wo = detail::conv_out_dim(wd, kw, stride, pad);
  if (ho < 1 || wo < 1)
    throw ShapeError("conv2d: input " + std::to_string(h) + "x" + std::to_string(wd) +
                     " too small for kernel " + std::to_string(kh) + " stride " +
                     std::to_string(stride));
  const detail::ConvGeom geom{cin, h, wd, kh, kw, stride, pad, ho, wo};
  const int64_t k = cin * kh * kw, m = ho * wo;

  Tensor<T> out({n, cout, ho, wo});
  std::vector<T> col(static_cast<size_t>(k * m));
  detail::CMapRM<T> wmat(w->value.data(), cout, k);
  for (int64_t i = 0; i < n; ++i) {
    detail::im2col(geom, x->value.data() + i * cin * h * wd, col.data());
    detail::CMapRM<T> cmat(col.data(), k, m);
    detail::MapRM<T> y(out.data() + i * cout * m, cout, m);
    y.noalias() = wmat * cmat;
    for (int64_t oc = 0; oc < cout; ++oc) y.row(oc).array() += b->value[oc];
  }

  NodePtr<T> px = x, pw = w, pb = b;
  return make_node<T>(
      std::move(out), {x, w, b},
      [px, pw, pb, geom, n, cin, cout, h, wd, k, m](Node<T>& self) {
        std::vector<T> col(static_cast<size_t>(k * m));
        detail::CMapRM<T> wmat(pw->value.data(), cout, k);
        if (pw->requires_grad) ensure_grad(*pw);
        if (pb->requires_grad) ensure_grad(*pb);
        if (px->requires_grad) ensure_grad(*px);
        for (int64_t i = 0; i < n; ++i) {
          detail::CMapRM<T> gy(self.grad.data() + i * cout * m, cout, m);
          if (pw->requires_grad) {
            detail::im2col(geom, px->value.data() + i * cin * h * wd, col.data());
            detail::CMapRM<T> cmat(col.data(), k, m);
            detail::MapRM<T> gw(pw->grad.data(), cout, k);
            gw.noalias() += gy * cmat.transpose();
          }
          if (pb->requires_grad)
            for (int64_t oc = 0; oc < cout; ++oc) pb->grad[oc] += gy.row(oc).sum();
          if (px->requires_grad) {
            detail::MapRM<T> cg(col.data(), k, m);
            cg.noalias() = wmat.transpose() * gy;
            detail::col2im(geom, col.data(), px->grad.data() + i * cin * h * wd);
          }
        }
      },
      "conv2d");
}

// Transposed convolution. x (N,Cin,H,W), w (Cin,Cout,kh,kw), b (Cout).
// Hout = (H-1)*stride - 2*pad + kh + out_pad.
template <class T>
NodePtr<T> conv_transpose2d(const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b,
                            int64_t stride, int64_t pad, int64_t out_pad) {
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  if (xs.size() != 4 || ws.size() != 4)
    throw ShapeError("conv_transpose2d expects NCHW input and IOHW weight");
  if (xs[1] != ws[0])
    throw ShapeError("conv_transpose2d: input channels " + std::to_string(xs[1]) +
                     " != weight in-channels " + std::to_string(ws[0]));
  const int64_t n = xs[0], cin = xs[1], h = xs[2], wd = xs[3];
  const int64_t cout = ws[1], kh = ws[2], kw = ws[3];
  const int64_t ho = (h - 1) * stride - 2 * pad + kh + out_pad;
  const int64_t wo = (wd - 1) * stride - 2 * pad + kw + out_pad;
  if (ho < 1 || wo < 1) throw ShapeError("conv_transpose2d: degenerate output size");
  // im2col geometry is expressed on the output plane; the input acts as grid.
  const detail::ConvGeom geom{cout, ho, wo, kh, kw, stride, pad, h, wd};
  const int64_t k = cout * kh * kw, m = h * wd;

  Tensor<T> out({n, cout, ho, wo});
  std::vector<T> col(static_cast<size_t>(k * m));
  detail::CMapRM<T> wmat(w->value.data(), cin, k);
  for (int64_t i = 0; i < n; ++i) {
    detail::CMapRM<T> xmat(x->value.data() + i * cin * m, cin, m);
    detail::MapRM<T> cmat(col.data(), k, m);
    cmat.noalias() = wmat.transpose() * xmat;
    T* y = out.data() + i * cout * ho * wo;
    detail::col2im(geom, col.data(), y);
    for (int64_t oc = 0; oc < cout; ++oc)
      for (int64_t j = 0; j < ho * wo; ++j) y[oc * ho * wo + j] += b->value[oc];
  }

  NodePtr<T> px = x, pw = w, pb = b;
  return make_node<T>(
      std::move(out), {x, w, b},
      [px, pw, pb, geom, n, cin, cout, ho, wo, k, m](Node<T>& self) {
        std::vector<T> gcol(static_cast<size_t>(k * m));
        if (px->requires_grad) ensure_grad(*px);
        if (pw->requires_grad) ensure_grad(*pw);
        if (pb->requires_grad) ensure_grad(*pb);
        detail::CMapRM<T> wmat(pw->value.data(), cin, k);
        for (int64_t i = 0; i < n; ++i) {
          const T* gy = self.grad.data() + i * cout * ho * wo;
          detail::im2col(geom, gy, gcol.data());
          detail::CMapRM<T> gmat(gcol.data(), k, m);
          if (px->requires_grad) {
            detail::MapRM<T> gx(px->grad.data() + i * cin * m, cin, m);
            gx.noalias() += wmat * gmat;
          }
          if (pw->requires_grad) {
            detail::CMapRM<T> xmat(px->value.data() + i * cin * m, cin, m);
            detail::MapRM<T> gw(pw->grad.data(), cin, k);
            gw.noalias() += xmat * gmat.transpose();
          }
          if (pb->requires_grad)
            for (int64_t oc = 0; oc < cout; ++oc)
              for (int64_t j = 0; j < ho * wo; ++j) pb->grad[oc] += gy[oc * ho * wo + j];
        }
      },
      "conv_transpose2d");
}

// 2x2/stride-2 max pooling. Argmax index is the first maximum in scan order,
// which keeps the backward pass deterministic under ties.
template <class T>
NodePtr<T> max_pool2d(const NodePtr<T>& x) {
  const auto& s = x->value.shape();
  if (s.size() != 4) throw ShapeError("max_pool2d expects NCHW");
  const int64_t n = s[0], c = s[1], h = s[2], w = s[3];
  if (h % 2 != 0 || w % 2 != 0)
    throw ShapeError("max_pool2d: spatial dims must be even, got " + x->value.shape_str());
  const int64_t ho = h / 2, wo = w / 2;
  Tensor<T> out({n, c, ho, wo});
  std::vector<int64_t> argmax(static_cast<size_t>(n * c * ho * wo));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j) {
      const T* plane = x->value.data() + (i * c + j) * h * w;
      for (int64_t oy = 0; oy < ho; ++oy)
        for (int64_t ox = 0; ox < wo; ++ox) {
          int64_t best = (2 * oy) * w + 2 * ox;
          T bv = plane[best];
          for (int64_t dy = 0; dy < 2; ++dy)
            for (int64_t dx = 0; dx < 2; ++dx) {
              int64_t idx = (2 * oy + dy) * w + (2 * ox + dx);
              if (plane[idx] > bv) {
                bv = plane[idx];
                best = idx;
              }
            }
          out.at(i, j, oy, ox) = bv;
          argmax[((i * c + j) * ho + oy) * wo + ox] = best;
        }
    }
  NodePtr<T> px = x;
  return make_node<T>(
      std::move(out), {x},
      [px, argmax = std::move(argmax), n, c, h, w, ho, wo](Node<T>& self) {
        if (!px->requires_grad) return;
        ensure_grad(*px);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < c; ++j) {
            T* gplane = px->grad.data() + (i * c + j) * h * w;
            const T* g = self.grad.data() + (i * c + j) * ho * wo;
            const int64_t* am = argmax.data() + (i * c + j) * ho * wo;
            for (int64_t kk = 0; kk < ho * wo; ++kk) gplane[am[kk]] += g[kk];
          }
      },
      "max_pool2d");
}

template <class T>
NodePtr<T> upsample_nearest2(const NodePtr<T>& x) {
  const auto& s = x->value.shape();
  if (s.size() != 4) throw ShapeError("upsample_nearest2 expects NCHW");
  const int64_t n = s[0], c = s[1], h = s[2], w = s[3];
  Tensor<T> out({n, c, 2 * h, 2 * w});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j)
      for (int64_t y = 0; y < 2 * h; ++y)
        for (int64_t xx = 0; xx < 2 * w; ++xx)
          out.at(i, j, y, xx) = x->value.at(i, j, y / 2, xx / 2);
  NodePtr<T> px = x;
  return make_node<T>(
      std::move(out), {x},
      [px, n, c, h, w](Node<T>& self) {
        if (!px->requires_grad) return;
        ensure_grad(*px);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < c; ++j)
            for (int64_t y = 0; y < 2 * h; ++y)
              for (int64_t xx = 0; xx < 2 * w; ++xx)
                px->grad.at(i, j, y / 2, xx / 2) += self.grad.at(i, j, y, xx);
      },
      "upsample_nearest2");
}

}  // namespace xmod
