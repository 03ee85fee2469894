/*
 * Copyright (c) 2026 The CAIR Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cair/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "cair/parallel.hpp"

namespace cair {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

std::string dims_str(const Shape& s) { return s.str(); }

template <typename T>
void finish(const Tensor<T>& out, const char* op) {
  if (checked_mode()) check_finite(out, op);
}

// Half-sample symmetric reflection: ... x1 x0 | x0 x1 ... x_{n-1} | x_{n-1} ...
int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

template <typename T>
void im2col(const T* x, int64_t channels, int64_t height, int64_t width, int kh, int kw,
            int stride, int pad, int64_t out_h, int64_t out_w, T* col) {
  const int64_t plane = out_h * out_w;
  for (int64_t c = 0; c < channels; ++c) {
    const T* src = x + c * height * width;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        T* dst = col + ((c * kh + ky) * kw + kx) * plane;
        for (int64_t oy = 0; oy < out_h; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          T* row = dst + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(row, row + out_w, T{0});
            continue;
          }
          const T* srow = src + iy * width;
          for (int64_t ox = 0; ox < out_w; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            row[ox] = (ix >= 0 && ix < width) ? srow[ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int64_t channels, int64_t height, int64_t width, int kh, int kw,
                int stride, int pad, int64_t out_h, int64_t out_w, T* dx) {
  const int64_t plane = out_h * out_w;
  for (int64_t c = 0; c < channels; ++c) {
    T* dst = dx + c * height * width;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const T* src = col + ((c * kh + ky) * kw + kx) * plane;
        for (int64_t oy = 0; oy < out_h; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          const T* row = src + oy * out_w;
          T* drow = dst + iy * width;
          for (int64_t ox = 0; ox < out_w; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) drow[ix] += row[ox];
          }
        }
      }
    }
  }
}

// One channel of a depthwise convolution: out (+)= w * x over a kh x kw window.
template <typename T>
void depthwise_plane(const T* x, int64_t height, int64_t width, const T* w, int kh, int kw,
                     int stride, int pad, int64_t out_h, int64_t out_w, T* out) {
  for (int ky = 0; ky < kh; ++ky) {
    for (int kx = 0; kx < kw; ++kx) {
      const T wv = w[ky * kw + kx];
      for (int64_t oy = 0; oy < out_h; ++oy) {
        const int64_t iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= height) continue;
        const T* srow = x + iy * width;
        T* orow = out + oy * out_w;
        // valid ox range: 0 <= ox*stride - pad + kx < width
        int64_t lo = 0;
        while (lo < out_w && lo * stride - pad + kx < 0) ++lo;
        int64_t hi = out_w;
        while (hi > lo && (hi - 1) * stride - pad + kx >= width) --hi;
        if (stride == 1) {
          const T* s = srow - pad + kx;
          for (int64_t ox = lo; ox < hi; ++ox) orow[ox] += wv * s[ox];
        } else {
          for (int64_t ox = lo; ox < hi; ++ox) orow[ox] += wv * srow[ox * stride - pad + kx];
        }
      }
    }
  }
}

template <typename T>
void depthwise_plane_backward(const T* x, int64_t height, int64_t width, const T* w, int kh,
                              int kw, int stride, int pad, int64_t out_h, int64_t out_w,
                              const T* dy, T* dx, T* dw) {
  for (int ky = 0; ky < kh; ++ky) {
    for (int kx = 0; kx < kw; ++kx) {
      const T wv = w[ky * kw + kx];
      T acc{0};
      for (int64_t oy = 0; oy < out_h; ++oy) {
        const int64_t iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= height) continue;
        const T* srow = x + iy * width;
        T* drow = dx ? dx + iy * width : nullptr;
        const T* grow = dy + oy * out_w;
        int64_t lo = 0;
        while (lo < out_w && lo * stride - pad + kx < 0) ++lo;
        int64_t hi = out_w;
        while (hi > lo && (hi - 1) * stride - pad + kx >= width) --hi;
        if (stride == 1) {
          const T* s = srow - pad + kx;
          for (int64_t ox = lo; ox < hi; ++ox) acc += grow[ox] * s[ox];
          if (drow) {
            T* d = drow - pad + kx;
            for (int64_t ox = lo; ox < hi; ++ox) d[ox] += wv * grow[ox];
          }
        } else {
          for (int64_t ox = lo; ox < hi; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            acc += grow[ox] * srow[ix];
            if (drow) drow[ix] += wv * grow[ox];
          }
        }
      }
      if (dw) dw[ky * kw + kx] += acc;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions opt) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require(xs.rank() == 4, "conv2d: input must be rank 4, got " + dims_str(xs));
  require(ws.rank() == 4, "conv2d: weight must be rank 4, got " + dims_str(ws));
  require(opt.stride >= 1 && opt.padding >= 0 && opt.groups >= 1,
          "conv2d: stride and groups must be positive, padding non-negative");
  const int64_t batch = xs.n(), cin = xs.c(), height = xs.h(), width = xs.w();
  const int64_t cout = ws[0], cin_g = ws[1];
  const int kh = static_cast<int>(ws[2]), kw = static_cast<int>(ws[3]);
  const int groups = opt.groups, stride = opt.stride, pad = opt.padding;
  require(cin % groups == 0, "conv2d: input channels " + std::to_string(cin) +
                                 " not divisible by groups " + std::to_string(groups));
  require(cout % groups == 0, "conv2d: output channels " + std::to_string(cout) +
                                  " not divisible by groups " + std::to_string(groups));
  require(cin / groups == cin_g, "conv2d: weight dim 1 is " + std::to_string(cin_g) +
                                     ", expected input channels / groups = " +
                                     std::to_string(cin / groups));
  require(kh <= height + 2 * pad, "conv2d: kernel height " + std::to_string(kh) +
                                      " exceeds padded input height");
  require(kw <= width + 2 * pad, "conv2d: kernel width " + std::to_string(kw) +
                                     " exceeds padded input width");
  if (bias.defined())
    require(bias.shape() == Shape{cout}, "conv2d: bias shape " + dims_str(bias.shape()) +
                                             ", expected [" + std::to_string(cout) + "]");

  const int64_t out_h = (height + 2 * pad - kh) / stride + 1;
  const int64_t out_w = (width + 2 * pad - kw) / stride + 1;
  const int64_t cout_g = cout / groups;
  const int64_t kdim = cin_g * kh * kw;
  const int64_t plane = out_h * out_w;
  const bool pointwise = kh == 1 && kw == 1 && stride == 1 && pad == 0;
  const bool depthwise = cin_g == 1 && cout_g == 1;

  Tensor<T> out = Tensor<T>::empty(Shape{batch, cout, out_h, out_w});
  const T* xd = x.data().data();
  const T* wd = weight.data().data();
  T* yd = out.mutable_data().data();

  parallel_for(batch, [&](int64_t n) {
    Buffer<T> col;
    if (!pointwise && !depthwise) col.resize(static_cast<size_t>(kdim * plane));
    for (int64_t g = 0; g < groups; ++g) {
      const T* xg = xd + (n * cin + g * cin_g) * height * width;
      T* yg = yd + (n * cout + g * cout_g) * plane;
      if (depthwise) {
        std::fill(yg, yg + plane, T{0});
        depthwise_plane(xg, height, width, wd + g * kh * kw, kh, kw, stride, pad, out_h, out_w, yg);
        continue;
      }
      ConstMatMap<T> wmat(wd + g * cout_g * kdim, cout_g, kdim);
      MatMap<T> ymat(yg, cout_g, plane);
      if (pointwise) {
        ymat.noalias() = wmat * ConstMatMap<T>(xg, cin_g, plane);
      } else {
        im2col(xg, cin_g, height, width, kh, kw, stride, pad, out_h, out_w, col.data());
        ymat.noalias() = wmat * ConstMatMap<T>(col.data(), kdim, plane);
      }
    }
    if (bias.defined()) {
      const T* bd = bias.data().data();
      for (int64_t c = 0; c < cout; ++c) {
        T* yc = yd + (n * cout + c) * plane;
        for (int64_t p = 0; p < plane; ++p) yc[p] += bd[c];
      }
    }
  });
  finish(out, "conv2d");

  if (Tape<T>* tape = recording_tape<T>({&x, &weight, &bias})) {
    out.set_requires_grad(true);
    tape->record([x, weight, bias, out, batch, cin, height, width, cout, cin_g, cout_g, kh, kw,
                  groups, stride, pad, out_h, out_w, kdim, plane, pointwise,
                  depthwise]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* xd = x.data().data();
      const T* wd = weight.data().data();
      T* dx = x.requires_grad() ? x.grad_mut().data() : nullptr;
      T* dw = weight.requires_grad() ? weight.grad_mut().data() : nullptr;
      if (bias.defined() && bias.requires_grad()) {
        T* db = bias.grad_mut().data();
        for (int64_t n = 0; n < batch; ++n)
          for (int64_t c = 0; c < cout; ++c) {
            const T* g = dy + (n * cout + c) * plane;
            T acc{0};
            for (int64_t p = 0; p < plane; ++p) acc += g[p];
            db[c] += acc;
          }
      }
      Buffer<T> col;
      Buffer<T> dcol;
      if (!pointwise && !depthwise) {
        col.resize(static_cast<size_t>(kdim * plane));
        dcol.resize(static_cast<size_t>(kdim * plane));
      }
      for (int64_t n = 0; n < batch; ++n) {
        for (int64_t g = 0; g < groups; ++g) {
          const T* xg = xd + (n * cin + g * cin_g) * height * width;
          const T* dyg = dy + (n * cout + g * cout_g) * plane;
          T* dxg = dx ? dx + (n * cin + g * cin_g) * height * width : nullptr;
          if (depthwise) {
            depthwise_plane_backward(xg, height, width, wd + g * kh * kw, kh, kw, stride, pad,
                                     out_h, out_w, dyg, dxg, dw ? dw + g * kh * kw : nullptr);
            continue;
          }
          ConstMatMap<T> dymat(dyg, cout_g, plane);
          ConstMatMap<T> wmat(wd + g * cout_g * kdim, cout_g, kdim);
          if (pointwise) {
            ConstMatMap<T> xmat(xg, cin_g, plane);
            if (dw) MatMap<T>(dw + g * cout_g * kdim, cout_g, kdim).noalias() += dymat * xmat.transpose();
            if (dxg) MatMap<T>(dxg, cin_g, plane).noalias() += wmat.transpose() * dymat;
            continue;
          }
          if (dw) {
            im2col(xg, cin_g, height, width, kh, kw, stride, pad, out_h, out_w, col.data());
            MatMap<T>(dw + g * cout_g * kdim, cout_g, kdim).noalias() +=
                dymat * ConstMatMap<T>(col.data(), kdim, plane).transpose();
          }
          if (dxg) {
            MatMap<T>(dcol.data(), kdim, plane).noalias() = wmat.transpose() * dymat;
            col2im_add(dcol.data(), cin_g, height, width, kh, kw, stride, pad, out_h, out_w, dxg);
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// layer_norm2d

template <typename T>
Tensor<T> layer_norm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       double eps) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "layer_norm2d: input must be rank 4, got " + dims_str(xs));
  const int64_t batch = xs.n(), channels = xs.c(), plane = xs.h() * xs.w();
  require(channels >= 1, "layer_norm2d: needs at least one channel");
  require(eps > 0, "layer_norm2d: eps must be positive");
  require(gamma.shape() == Shape{channels}, "layer_norm2d: gamma shape " +
                                                dims_str(gamma.shape()) + ", expected [" +
                                                std::to_string(channels) + "]");
  require(beta.shape() == Shape{channels}, "layer_norm2d: beta shape " + dims_str(beta.shape()) +
                                               ", expected [" + std::to_string(channels) + "]");

  Tensor<T> out = Tensor<T>::empty(xs);
  auto mean_buf = std::make_shared<std::vector<T>>(static_cast<size_t>(batch * plane));
  auto rstd_buf = std::make_shared<std::vector<T>>(static_cast<size_t>(batch * plane));
  const T* xd = x.data().data();
  const T* gd = gamma.data().data();
  const T* bd = beta.data().data();
  T* yd = out.mutable_data().data();
  const T inv_c = T{1} / static_cast<T>(channels);

  for (int64_t n = 0; n < batch; ++n) {
    T* mu = mean_buf->data() + n * plane;
    T* rstd = rstd_buf->data() + n * plane;
    const T* xn = xd + n * channels * plane;
    std::fill(mu, mu + plane, T{0});
    std::fill(rstd, rstd + plane, T{0});
    for (int64_t c = 0; c < channels; ++c)
      for (int64_t p = 0; p < plane; ++p) mu[p] += xn[c * plane + p];
    for (int64_t p = 0; p < plane; ++p) mu[p] *= inv_c;
    for (int64_t c = 0; c < channels; ++c)
      for (int64_t p = 0; p < plane; ++p) {
        const T d = xn[c * plane + p] - mu[p];
        rstd[p] += d * d;
      }
    for (int64_t p = 0; p < plane; ++p)
      rstd[p] = T{1} / std::sqrt(rstd[p] * inv_c + static_cast<T>(eps));
    T* yn = yd + n * channels * plane;
    for (int64_t c = 0; c < channels; ++c)
      for (int64_t p = 0; p < plane; ++p)
        yn[c * plane + p] = (xn[c * plane + p] - mu[p]) * rstd[p] * gd[c] + bd[c];
  }
  finish(out, "layer_norm2d");

  if (Tape<T>* tape = recording_tape<T>({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    tape->record([x, gamma, beta, out, mean_buf, rstd_buf, batch, channels, plane,
                  inv_c]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* xd = x.data().data();
      const T* gd = gamma.data().data();
      T* dx = x.requires_grad() ? x.grad_mut().data() : nullptr;
      T* dgamma = gamma.requires_grad() ? gamma.grad_mut().data() : nullptr;
      T* dbeta = beta.requires_grad() ? beta.grad_mut().data() : nullptr;
      std::vector<T> m1(static_cast<size_t>(plane)), m2(static_cast<size_t>(plane));
      for (int64_t n = 0; n < batch; ++n) {
        const T* mu = mean_buf->data() + n * plane;
        const T* rstd = rstd_buf->data() + n * plane;
        const T* xn = xd + n * channels * plane;
        const T* gn = dy + n * channels * plane;
        std::fill(m1.begin(), m1.end(), T{0});
        std::fill(m2.begin(), m2.end(), T{0});
        for (int64_t c = 0; c < channels; ++c) {
          T sg{0}, sb{0};
          for (int64_t p = 0; p < plane; ++p) {
            const T xhat = (xn[c * plane + p] - mu[p]) * rstd[p];
            const T g = gn[c * plane + p];
            const T dxhat = g * gd[c];
            m1[static_cast<size_t>(p)] += dxhat;
            m2[static_cast<size_t>(p)] += dxhat * xhat;
            sg += g * xhat;
            sb += g;
          }
          if (dgamma) dgamma[c] += sg;
          if (dbeta) dbeta[c] += sb;
        }
        if (!dx) continue;
        T* dxn = dx + n * channels * plane;
        for (int64_t c = 0; c < channels; ++c)
          for (int64_t p = 0; p < plane; ++p) {
            const T xhat = (xn[c * plane + p] - mu[p]) * rstd[p];
            const T dxhat = gn[c * plane + p] * gd[c];
            dxn[c * plane + p] += rstd[p] * (dxhat - m1[static_cast<size_t>(p)] * inv_c -
                                             xhat * m2[static_cast<size_t>(p)] * inv_c);
          }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spatial gathers: pixel (un)shuffle, rotations, flips, pads, crops.

namespace {

// out[n,c_out,:,:] at position q reads x[n, src_channel, src_index[q]] where the
// mapping is given per (c_out, q) as a flat source offset within the sample.
template <typename T>
Tensor<T> gather_sample(const Tensor<T>& x, Shape out_shape, std::vector<int64_t> table,
                        const char* op) {
  const int64_t batch = x.shape()[0];
  const int64_t in_stride = x.numel() / batch;
  const int64_t out_stride = out_shape.numel() / batch;
  Tensor<T> out = Tensor<T>::empty(out_shape);
  const T* xd = x.data().data();
  T* yd = out.mutable_data().data();
  for (int64_t n = 0; n < batch; ++n)
    for (int64_t q = 0; q < out_stride; ++q) yd[n * out_stride + q] = xd[n * in_stride + table[static_cast<size_t>(q)]];
  finish(out, op);
  if (Tape<T>* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    auto shared = std::make_shared<std::vector<int64_t>>(std::move(table));
    tape->record([x, out, shared, batch, in_stride, out_stride]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad_mut().data();
      for (int64_t n = 0; n < batch; ++n)
        for (int64_t q = 0; q < out_stride; ++q)
          dx[n * in_stride + (*shared)[static_cast<size_t>(q)]] += dy[n * out_stride + q];
    });
  }
  return out;
}

// Builds a per-sample table for a plane mapping applied uniformly to every channel.
template <typename F>
std::vector<int64_t> plane_table(int64_t channels, int64_t in_h, int64_t in_w, int64_t out_h,
                                 int64_t out_w, F&& src) {
  std::vector<int64_t> table(static_cast<size_t>(channels * out_h * out_w));
  for (int64_t c = 0; c < channels; ++c)
    for (int64_t i = 0; i < out_h; ++i)
      for (int64_t j = 0; j < out_w; ++j) {
        auto [si, sj] = src(i, j);
        table[static_cast<size_t>((c * out_h + i) * out_w + j)] = (c * in_h + si) * in_w + sj;
      }
  return table;
}

}  // namespace

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "pixel_shuffle: input must be rank 4");
  require(r >= 1, "pixel_shuffle: factor must be positive");
  const int64_t rr = static_cast<int64_t>(r) * r;
  require(xs.c() % rr == 0, "pixel_shuffle: channels " + std::to_string(xs.c()) +
                                " not divisible by r^2 = " + std::to_string(rr));
  const int64_t c_out = xs.c() / rr, h = xs.h(), w = xs.w();
  std::vector<int64_t> table(static_cast<size_t>(xs.c() * h * w));
  for (int64_t c = 0; c < c_out; ++c)
    for (int64_t oy = 0; oy < h * r; ++oy)
      for (int64_t ox = 0; ox < w * r; ++ox) {
        const int64_t src_c = c * rr + (oy % r) * r + (ox % r);
        table[static_cast<size_t>((c * h * r + oy) * w * r + ox)] =
            (src_c * h + oy / r) * w + ox / r;
      }
  return gather_sample(x, Shape{xs.n(), c_out, h * r, w * r}, std::move(table), "pixel_shuffle");
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "pixel_unshuffle: input must be rank 4");
  require(r >= 1, "pixel_unshuffle: factor must be positive");
  require(xs.h() % r == 0 && xs.w() % r == 0, "pixel_unshuffle: spatial extents " +
                                                  dims_str(xs) + " not divisible by " +
                                                  std::to_string(r));
  const int64_t rr = static_cast<int64_t>(r) * r;
  const int64_t c_in = xs.c(), h = xs.h() / r, w = xs.w() / r;
  std::vector<int64_t> table(static_cast<size_t>(c_in * rr * h * w));
  for (int64_t c = 0; c < c_in; ++c)
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < r; ++j)
        for (int64_t y = 0; y < h; ++y)
          for (int64_t xq = 0; xq < w; ++xq) {
            const int64_t dst_c = c * rr + i * r + j;
            table[static_cast<size_t>((dst_c * h + y) * w + xq)] =
                (c * xs.h() + y * r + i) * xs.w() + xq * r + j;
          }
  return gather_sample(x, Shape{xs.n(), c_in * rr, h, w}, std::move(table), "pixel_unshuffle");
}

template <typename T>
Tensor<T> rot90(const Tensor<T>& x, int k) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "rot90: input must be rank 4");
  k = ((k % 4) + 4) % 4;
  const int64_t h = xs.h(), w = xs.w();
  if (k == 0) return gather_sample(x, xs, plane_table(xs.c(), h, w, h, w, [](int64_t i, int64_t j) { return std::pair{i, j}; }), "rot90");
  if (k == 2)
    return gather_sample(x, xs, plane_table(xs.c(), h, w, h, w, [&](int64_t i, int64_t j) {
                           return std::pair{h - 1 - i, w - 1 - j};
                         }), "rot90");
  const Shape out_shape{xs.n(), xs.c(), w, h};
  if (k == 1)
    return gather_sample(x, out_shape, plane_table(xs.c(), h, w, w, h, [&](int64_t i, int64_t j) {
                           return std::pair{j, w - 1 - i};
                         }), "rot90");
  return gather_sample(x, out_shape, plane_table(xs.c(), h, w, w, h, [&](int64_t i, int64_t j) {
                         return std::pair{h - 1 - j, i};
                       }), "rot90");
}

template <typename T>
Tensor<T> flip_w(const Tensor<T>& x) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "flip_w: input must be rank 4");
  const int64_t h = xs.h(), w = xs.w();
  return gather_sample(x, xs, plane_table(xs.c(), h, w, h, w, [&](int64_t i, int64_t j) {
                         return std::pair{i, w - 1 - j};
                       }), "flip_w");
}

template <typename T>
Tensor<T> pad_reflect(const Tensor<T>& x, int pad_bottom, int pad_right) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "pad_reflect: input must be rank 4");
  require(pad_bottom >= 0 && pad_right >= 0, "pad_reflect: padding must be non-negative");
  const int64_t h = xs.h(), w = xs.w();
  const int64_t oh = h + pad_bottom, ow = w + pad_right;
  return gather_sample(x, Shape{xs.n(), xs.c(), oh, ow},
                       plane_table(xs.c(), h, w, oh, ow, [&](int64_t i, int64_t j) {
                         return std::pair{reflect_index(i, h), reflect_index(j, w)};
                       }), "pad_reflect");
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int64_t top, int64_t left, int64_t height, int64_t width) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "crop: input must be rank 4");
  require(top >= 0 && left >= 0 && height >= 1 && width >= 1 && top + height <= xs.h() &&
              left + width <= xs.w(),
          "crop: window exceeds input " + dims_str(xs));
  return gather_sample(x, Shape{xs.n(), xs.c(), height, width},
                       plane_table(xs.c(), xs.h(), xs.w(), height, width,
                                   [&](int64_t i, int64_t j) { return std::pair{top + i, left + j}; }),
                       "crop");
}

// ---------------------------------------------------------------------------
// Pooling

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, int k, int stride) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "max_pool2d: input must be rank 4");
  require(k >= 1 && stride >= 1, "max_pool2d: window and stride must be positive");
  require(xs.h() >= k && xs.w() >= k, "max_pool2d: window " + std::to_string(k) +
                                          " larger than input " + dims_str(xs));
  const int64_t h = xs.h(), w = xs.w();
  const int64_t oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
  const int64_t planes = xs.n() * xs.c();
  Tensor<T> out = Tensor<T>::empty(Shape{xs.n(), xs.c(), oh, ow});
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(planes * oh * ow));
  const T* xd = x.data().data();
  T* yd = out.mutable_data().data();
  for (int64_t p = 0; p < planes; ++p)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox) {
        int64_t best = p * h * w + (oy * stride) * w + ox * stride;
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const int64_t idx = p * h * w + (oy * stride + ky) * w + ox * stride + kx;
            if (xd[idx] > xd[best]) best = idx;
          }
        const int64_t o = (p * oh + oy) * ow + ox;
        yd[o] = xd[best];
        (*argmax)[static_cast<size_t>(o)] = best;
      }
  finish(out, "max_pool2d");
  if (Tape<T>* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, argmax]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad_mut().data();
      for (size_t o = 0; o < argmax->size(); ++o) dx[(*argmax)[o]] += dy[o];
    });
  }
  return out;
}

namespace {
// Sequential per-plane sum / (H*W); shared by the global and full-window paths
// so both produce identical bits.
template <typename T>
T plane_mean(const T* p, int64_t count) {
  T acc{0};
  for (int64_t i = 0; i < count; ++i) acc += p[i];
  return acc / static_cast<T>(count);
}
}  // namespace

template <typename T>
Tensor<T> avg_pool_global(const Tensor<T>& x) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "avg_pool_global: input must be rank 4");
  const int64_t planes = xs.n() * xs.c(), area = xs.h() * xs.w();
  Tensor<T> out = Tensor<T>::empty(Shape{xs.n(), xs.c(), 1, 1});
  const T* xd = x.data().data();
  T* yd = out.mutable_data().data();
  for (int64_t p = 0; p < planes; ++p) yd[p] = plane_mean(xd + p * area, area);
  if (Tape<T>* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, planes, area]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad_mut().data();
      for (int64_t p = 0; p < planes; ++p) {
        const T g = dy[p] / static_cast<T>(area);
        for (int64_t i = 0; i < area; ++i) dx[p * area + i] += g;
      }
    });
  }
  return out;
}

namespace {
// out[i] = sum of src[k] for k in [i - before, i + after] clipped to [0, n).
// Applied along W then H; prefix sums are accumulated in double.
template <typename T>
void box_sum_2d(const T* src, int64_t h, int64_t w, int64_t before, int64_t after, T* dst) {
  std::vector<double> tmp(static_cast<size_t>(h * w));
  std::vector<double> prefix(static_cast<size_t>(std::max(h, w) + 1));
  for (int64_t i = 0; i < h; ++i) {
    prefix[0] = 0;
    for (int64_t j = 0; j < w; ++j) prefix[static_cast<size_t>(j + 1)] = prefix[static_cast<size_t>(j)] + src[i * w + j];
    for (int64_t j = 0; j < w; ++j) {
      const int64_t lo = std::max<int64_t>(0, j - before), hi = std::min<int64_t>(w - 1, j + after);
      tmp[static_cast<size_t>(i * w + j)] = prefix[static_cast<size_t>(hi + 1)] - prefix[static_cast<size_t>(lo)];
    }
  }
  for (int64_t j = 0; j < w; ++j) {
    prefix[0] = 0;
    for (int64_t i = 0; i < h; ++i) prefix[static_cast<size_t>(i + 1)] = prefix[static_cast<size_t>(i)] + tmp[static_cast<size_t>(i * w + j)];
    for (int64_t i = 0; i < h; ++i) {
      const int64_t lo = std::max<int64_t>(0, i - before), hi = std::min<int64_t>(h - 1, i + after);
      dst[i * w + j] = static_cast<T>(prefix[static_cast<size_t>(hi + 1)] - prefix[static_cast<size_t>(lo)]);
    }
  }
}

int64_t clipped_count(int64_t i, int64_t n, int64_t before, int64_t after) {
  return std::min<int64_t>(n - 1, i + after) - std::max<int64_t>(0, i - before) + 1;
}
}  // namespace

template <typename T>
Tensor<T> avg_pool_local(const Tensor<T>& x, int window) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "avg_pool_local: input must be rank 4");
  require(window >= 1, "avg_pool_local: window must be positive");
  const int64_t h = xs.h(), w = xs.w(), planes = xs.n() * xs.c(), area = h * w;
  Tensor<T> out = Tensor<T>::empty(xs);
  const T* xd = x.data().data();
  T* yd = out.mutable_data().data();
  const bool whole = window >= std::max(h, w);
  const int64_t before = (window - 1) / 2, after = window / 2;
  std::vector<T> counts;
  if (whole) {
    for (int64_t p = 0; p < planes; ++p) std::fill(yd + p * area, yd + (p + 1) * area, plane_mean(xd + p * area, area));
  } else {
    counts.resize(static_cast<size_t>(area));
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j)
        counts[static_cast<size_t>(i * w + j)] =
            static_cast<T>(clipped_count(i, h, before, after) * clipped_count(j, w, before, after));
    for (int64_t p = 0; p < planes; ++p) {
      box_sum_2d(xd + p * area, h, w, before, after, yd + p * area);
      for (int64_t i = 0; i < area; ++i) yd[p * area + i] /= counts[static_cast<size_t>(i)];
    }
  }
  if (Tape<T>* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, whole, counts, h, w, planes, area, before, after]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad_mut().data();
      std::vector<T> scaled(static_cast<size_t>(area)), summed(static_cast<size_t>(area));
      for (int64_t p = 0; p < planes; ++p) {
        if (whole) {
          T acc{0};
          for (int64_t i = 0; i < area; ++i) acc += dy[p * area + i];
          const T g = acc / static_cast<T>(area);
          for (int64_t i = 0; i < area; ++i) dx[p * area + i] += g;
          continue;
        }
        for (int64_t i = 0; i < area; ++i) scaled[static_cast<size_t>(i)] = dy[p * area + i] / counts[static_cast<size_t>(i)];
        // Transposed window: position j collects outputs i with j in window(i).
        box_sum_2d(scaled.data(), h, w, after, before, summed.data());
        for (int64_t i = 0; i < area; ++i) dx[p * area + i] += summed[static_cast<size_t>(i)];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian blur

std::vector<double> gaussian_kernel1d(double sigma, int radius) {
  require(sigma > 0, "gaussian_kernel1d: sigma must be positive");
  require(radius >= 1, "gaussian_kernel1d: radius must be at least 1");
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double total = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i) * i / (2.0 * sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

int default_blur_radius(double sigma) {
  return std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
}

namespace {
// One separable pass along an axis of length `len` with element stride `step`,
// repeated for `lines` lines starting at `line_offset(l)`.
template <typename T>
void blur_pass(const T* src, T* dst, int64_t lines, int64_t len, int64_t line_stride,
               int64_t step, const std::vector<T>& k, int radius, bool transpose) {
  std::vector<int64_t> idx(static_cast<size_t>(len + 2 * radius));
  for (int64_t i = -radius; i < len + radius; ++i) idx[static_cast<size_t>(i + radius)] = reflect_index(i, len);
  for (int64_t l = 0; l < lines; ++l) {
    const T* s = src + l * line_stride;
    T* d = dst + l * line_stride;
    for (int64_t i = 0; i < len; ++i) {
      if (!transpose) {
        T acc{0};
        for (int t = -radius; t <= radius; ++t)
          acc += k[static_cast<size_t>(t + radius)] * s[idx[static_cast<size_t>(i + t + radius)] * step];
        d[i * step] = acc;
      } else {
        const T g = s[i * step];
        for (int t = -radius; t <= radius; ++t)
          d[idx[static_cast<size_t>(i + t + radius)] * step] += k[static_cast<size_t>(t + radius)] * g;
      }
    }
  }
}
}  // namespace

template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& x, double sigma, int radius) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "gaussian_blur: input must be rank 4");
  const std::vector<double> kd = gaussian_kernel1d(sigma, radius);
  const std::vector<T> k(kd.begin(), kd.end());
  const int64_t h = xs.h(), w = xs.w(), planes = xs.n() * xs.c(), area = h * w;
  Tensor<T> out = Tensor<T>::empty(xs);
  Buffer<T> tmp(static_cast<size_t>(area));
  const T* xd = x.data().data();
  T* yd = out.mutable_data().data();
  for (int64_t p = 0; p < planes; ++p) {
    blur_pass(xd + p * area, tmp.data(), h, w, w, 1, k, radius, false);
    blur_pass(tmp.data(), yd + p * area, w, h, 1, w, k, radius, false);
  }
  finish(out, "gaussian_blur");
  if (Tape<T>* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, k, radius, h, w, planes, area]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad_mut().data();
      std::vector<T> tmp(static_cast<size_t>(area));
      for (int64_t p = 0; p < planes; ++p) {
        std::fill(tmp.begin(), tmp.end(), T{0});
        blur_pass(dy + p * area, tmp.data(), w, h, 1, w, k, radius, true);
        blur_pass(tmp.data(), dx + p * area, h, w, w, 1, k, radius, true);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// resize_half_area

template <typename T>
Tensor<T> resize_half_area(const Tensor<T>& x) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "resize_half_area: input must be rank 4");
  require(xs.h() % 2 == 0 && xs.w() % 2 == 0,
          "resize_half_area: extents must be even, got " + dims_str(xs));
  const int64_t h = xs.h(), w = xs.w(), oh = h / 2, ow = w / 2, planes = xs.n() * xs.c();
  Tensor<T> out = Tensor<T>::empty(Shape{xs.n(), xs.c(), oh, ow});
  const T* xd = x.data().data();
  T* yd = out.mutable_data().data();
  for (int64_t p = 0; p < planes; ++p)
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) {
        const T* s = xd + p * h * w + 2 * i * w + 2 * j;
        yd[(p * oh + i) * ow + j] = (s[0] + s[1] + s[w] + s[w + 1]) * T{0.25};
      }
  if (Tape<T>* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, h, w, oh, ow, planes]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad_mut().data();
      for (int64_t p = 0; p < planes; ++p)
        for (int64_t i = 0; i < oh; ++i)
          for (int64_t j = 0; j < ow; ++j) {
            const T g = dy[(p * oh + i) * ow + j] * T{0.25};
            T* d = dx + p * h * w + 2 * i * w + 2 * j;
            d[0] += g;
            d[1] += g;
            d[w] += g;
            d[w + 1] += g;
          }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

enum class BinOp { kAdd, kSub, kMul };

struct BroadcastPlan {
  Shape out;
  std::array<int64_t, 4> stride_a{};
  std::array<int64_t, 4> stride_b{};
  bool same = false;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  BroadcastPlan plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  require(a.rank() == 4 && b.rank() == 4, std::string(op) + ": shapes " + a.str() + " and " +
                                              b.str() + " are incompatible");
  std::array<int64_t, 4> dims{};
  std::array<int64_t, 4> sa{}, sb{};
  int64_t ra = 1, rb = 1;
  for (int d = 3; d >= 0; --d) {
    const int64_t da = a[d], db = b[d];
    require(da == db || da == 1 || db == 1, std::string(op) + ": shapes " + a.str() + " and " +
                                                b.str() + " are incompatible at axis " +
                                                std::to_string(d));
    dims[static_cast<size_t>(d)] = std::max(da, db);
    sa[static_cast<size_t>(d)] = da == 1 ? 0 : ra;
    sb[static_cast<size_t>(d)] = db == 1 ? 0 : rb;
    ra *= da;
    rb *= db;
  }
  plan.out = Shape{dims[0], dims[1], dims[2], dims[3]};
  plan.stride_a = sa;
  plan.stride_b = sb;
  return plan;
}

template <typename F>
void for_each_broadcast(const BroadcastPlan& plan, F&& f) {
  const Shape& s = plan.out;
  int64_t o = 0;
  for (int64_t n = 0; n < s[0]; ++n)
    for (int64_t c = 0; c < s[1]; ++c)
      for (int64_t h = 0; h < s[2]; ++h) {
        const int64_t ia0 = n * plan.stride_a[0] + c * plan.stride_a[1] + h * plan.stride_a[2];
        const int64_t ib0 = n * plan.stride_b[0] + c * plan.stride_b[1] + h * plan.stride_b[2];
        for (int64_t w = 0; w < s[3]; ++w, ++o)
          f(o, ia0 + w * plan.stride_a[3], ib0 + w * plan.stride_b[3]);
      }
}

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinOp op, const char* name) {
  const BroadcastPlan plan = plan_broadcast(a.shape(), b.shape(), name);
  Tensor<T> out = Tensor<T>::empty(plan.out);
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  T* yd = out.mutable_data().data();
  auto apply = [op](T u, T v) {
    switch (op) {
      case BinOp::kAdd: return u + v;
      case BinOp::kSub: return u - v;
      case BinOp::kMul: return u * v;
    }
    return u;
  };
  if (plan.same) {
    const int64_t n = out.numel();
    switch (op) {
      case BinOp::kAdd: for (int64_t i = 0; i < n; ++i) yd[i] = ad[i] + bd[i]; break;
      case BinOp::kSub: for (int64_t i = 0; i < n; ++i) yd[i] = ad[i] - bd[i]; break;
      case BinOp::kMul: for (int64_t i = 0; i < n; ++i) yd[i] = ad[i] * bd[i]; break;
    }
  } else {
    for_each_broadcast(plan, [&](int64_t o, int64_t ia, int64_t ib) { yd[o] = apply(ad[ia], bd[ib]); });
  }
  finish(out, name);
  if (Tape<T>* tape = recording_tape<T>({&a, &b})) {
    out.set_requires_grad(true);
    tape->record([a, b, out, plan, op]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* ad = a.data().data();
      const T* bd = b.data().data();
      T* da = a.requires_grad() ? a.grad_mut().data() : nullptr;
      T* db = b.requires_grad() ? b.grad_mut().data() : nullptr;
      auto step = [&](int64_t o, int64_t ia, int64_t ib) {
        const T g = dy[o];
        switch (op) {
          case BinOp::kAdd:
            if (da) da[ia] += g;
            if (db) db[ib] += g;
            break;
          case BinOp::kSub:
            if (da) da[ia] += g;
            if (db) db[ib] -= g;
            break;
          case BinOp::kMul:
            if (da) da[ia] += g * bd[ib];
            if (db) db[ib] += g * ad[ia];
            break;
        }
      };
      if (plan.same) {
        const int64_t n = out.numel();
        const T sign = op == BinOp::kSub ? T{-1} : T{1};
        if (op == BinOp::kMul) {
          if (da) for (int64_t i = 0; i < n; ++i) da[i] += dy[i] * bd[i];
          if (db) for (int64_t i = 0; i < n; ++i) db[i] += dy[i] * ad[i];
        } else {
          if (da) for (int64_t i = 0; i < n; ++i) da[i] += dy[i];
          if (db) for (int64_t i = 0; i < n; ++i) db[i] += sign * dy[i];
        }
      } else {
        for_each_broadcast(plan, step);
      }
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinOp::kAdd, "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinOp::kSub, "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinOp::kMul, "mul");
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::empty(x.shape());
  const T* xd = x.data().data();
  T* yd = out.mutable_data().data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) yd[i] = T{1} / (T{1} + std::exp(-xd[i]));
  finish(out, "sigmoid");
  if (Tape<T>* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, n]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* yd = out.data().data();
      T* dx = x.grad_mut().data();
      for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * yd[i] * (T{1} - yd[i]);
    });
  }
  return out;
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  require(lo <= hi, "clamp: lo must not exceed hi");
  Tensor<T> out = Tensor<T>::empty(x.shape());
  const T* xd = x.data().data();
  T* yd = out.mutable_data().data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) yd[i] = std::clamp(xd[i], lo, hi);
  finish(out, "clamp");
  if (Tape<T>* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, n, lo, hi]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* xd = x.data().data();
      T* dx = x.grad_mut().data();
      for (int64_t i = 0; i < n; ++i)
        if (xd[i] > lo && xd[i] < hi) dx[i] += dy[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out = Tensor<T>::empty(x.shape());
  const T* xd = x.data().data();
  T* yd = out.mutable_data().data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) yd[i] = xd[i] * factor;
  if (Tape<T>* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, n, factor]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad_mut().data();
      for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "scale_channels: input must be rank 4");
  require(s.shape() == Shape{xs.c()}, "scale_channels: scale shape " + dims_str(s.shape()) +
                                          ", expected [" + std::to_string(xs.c()) + "]");
  const int64_t batch = xs.n(), channels = xs.c(), plane = xs.h() * xs.w();
  Tensor<T> out = Tensor<T>::empty(xs);
  const T* xd = x.data().data();
  const T* sd = s.data().data();
  T* yd = out.mutable_data().data();
  for (int64_t n = 0; n < batch; ++n)
    for (int64_t c = 0; c < channels; ++c) {
      const int64_t off = (n * channels + c) * plane;
      for (int64_t p = 0; p < plane; ++p) yd[off + p] = xd[off + p] * sd[c];
    }
  if (Tape<T>* tape = recording_tape<T>({&x, &s})) {
    out.set_requires_grad(true);
    tape->record([x, s, out, batch, channels, plane]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* xd = x.data().data();
      const T* sd = s.data().data();
      T* dx = x.requires_grad() ? x.grad_mut().data() : nullptr;
      T* ds = s.requires_grad() ? s.grad_mut().data() : nullptr;
      for (int64_t n = 0; n < batch; ++n)
        for (int64_t c = 0; c < channels; ++c) {
          const int64_t off = (n * channels + c) * plane;
          T acc{0};
          for (int64_t p = 0; p < plane; ++p) {
            if (dx) dx[off + p] += dy[off + p] * sd[c];
            acc += dy[off + p] * xd[off + p];
          }
          if (ds) ds[c] += acc;
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concatenation and splitting

namespace {
// Concatenation along `axis` (0 = batch, 1 = channels) of rank-4 tensors.
template <typename T>
Tensor<T> concat_axis(std::span<const Tensor<T>> xs, int axis, const char* name) {
  require(!xs.empty(), std::string(name) + ": needs at least one tensor");
  const Shape& first = xs[0].shape();
  require(first.rank() == 4, std::string(name) + ": inputs must be rank 4");
  int64_t total = 0;
  for (const auto& t : xs) {
    const Shape& s = t.shape();
    require(s.rank() == 4, std::string(name) + ": inputs must be rank 4");
    for (int d = 0; d < 4; ++d)
      if (d != axis)
        require(s[d] == first[d], std::string(name) + ": extent mismatch at axis " +
                                      std::to_string(d) + " (" + first.str() + " vs " +
                                      s.str() + ")");
    total += s[axis];
  }
  std::array<int64_t, 4> dims{first[0], first[1], first[2], first[3]};
  dims[static_cast<size_t>(axis)] = total;
  Tensor<T> out = Tensor<T>::empty(Shape{dims[0], dims[1], dims[2], dims[3]});
  // Outer = product of axes before `axis`, inner = product after and including.
  const int64_t outer = axis == 0 ? 1 : first[0];
  const int64_t unit = first[2] * first[3] * (axis == 0 ? first[1] : 1);
  const int64_t out_block = total * unit;
  T* yd = out.mutable_data().data();
  int64_t offset = 0;
  std::vector<int64_t> offsets;
  for (const auto& t : xs) {
    const int64_t block = t.shape()[axis] * unit;
    const T* src = t.data().data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(src + o * block, src + (o + 1) * block, yd + o * out_block + offset);
    offsets.push_back(offset);
    offset += block;
  }
  bool any = false;
  for (const auto& t : xs) any = any || t.requires_grad();
  Tape<T>* tape = any ? active_tape<T>() : nullptr;
  if (tape) {
    out.set_requires_grad(true);
    std::vector<Tensor<T>> inputs(xs.begin(), xs.end());
    tape->record([inputs, out, offsets, outer, unit, out_block, axis]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      for (size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i].requires_grad()) continue;
        const int64_t block = inputs[i].shape()[axis] * unit;
        T* dx = inputs[i].grad_mut().data();
        for (int64_t o = 0; o < outer; ++o) {
          const T* g = dy + o * out_block + offsets[i];
          for (int64_t q = 0; q < block; ++q) dx[o * block + q] += g[q];
        }
      }
    });
  }
  return out;
}
}  // namespace

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> xs) {
  return concat_axis(xs, 1, "concat_channels");
}

template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> xs) {
  return concat_axis(xs, 0, "concat_batch");
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::span<const int64_t> parts) {
  const Shape& xs = x.shape();
  require(xs.rank() == 4, "split_channels: input must be rank 4");
  int64_t total = 0;
  for (int64_t p : parts) {
    require(p >= 1, "split_channels: part sizes must be positive");
    total += p;
  }
  require(total == xs.c(), "split_channels: parts sum to " + std::to_string(total) +
                               ", input has " + std::to_string(xs.c()) + " channels");
  const int64_t plane = xs.h() * xs.w(), batch = xs.n(), channels = xs.c();
  std::vector<Tensor<T>> result;
  int64_t start = 0;
  Tape<T>* tape = recording_tape<T>({&x});
  for (int64_t p : parts) {
    Tensor<T> piece = Tensor<T>::empty(Shape{batch, p, xs.h(), xs.w()});
    const T* xd = x.data().data();
    T* yd = piece.mutable_data().data();
    for (int64_t n = 0; n < batch; ++n)
      std::copy(xd + (n * channels + start) * plane, xd + (n * channels + start + p) * plane,
                yd + n * p * plane);
    if (tape) {
      piece.set_requires_grad(true);
      tape->record([x, piece, start, p, plane, batch, channels]() mutable {
        if (!piece.has_grad()) return;
        const T* dy = piece.grad().data();
        T* dx = x.grad_mut().data();
        for (int64_t n = 0; n < batch; ++n)
          for (int64_t q = 0; q < p * plane; ++q) dx[(n * channels + start) * plane + q] += dy[n * p * plane + q];
      });
    }
    result.push_back(std::move(piece));
    start += p;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc{0};
  for (T v : x.data()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(acc);
  if (Tape<T>* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0];
      for (T& d : x.grad_mut()) d += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T{1} / static_cast<T>(x.numel()));
}

#define CAIR_INSTANTIATE(T)                                                                      \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dOptions); \
  template Tensor<T> layer_norm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double); \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, int);                                       \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, int);                                     \
  template Tensor<T> max_pool2d(const Tensor<T>&, int, int);                                     \
  template Tensor<T> avg_pool_global(const Tensor<T>&);                                          \
  template Tensor<T> avg_pool_local(const Tensor<T>&, int);                                      \
  template Tensor<T> gaussian_blur(const Tensor<T>&, double, int);                               \
  template Tensor<T> resize_half_area(const Tensor<T>&);                                         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                  \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                              \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                                \
  template Tensor<T> concat_batch(std::span<const Tensor<T>>);                                   \
  template std::vector<Tensor<T>> split_channels(const Tensor<T>&, std::span<const int64_t>);    \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&);                                                     \
  template Tensor<T> rot90(const Tensor<T>&, int);                                               \
  template Tensor<T> flip_w(const Tensor<T>&);                                                   \
  template Tensor<T> pad_reflect(const Tensor<T>&, int, int);                                    \
  template Tensor<T> crop(const Tensor<T>&, int64_t, int64_t, int64_t, int64_t);

CAIR_INSTANTIATE(float)
CAIR_INSTANTIATE(double)
#undef CAIR_INSTANTIATE

}  // namespace cair
