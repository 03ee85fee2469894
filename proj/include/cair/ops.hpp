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

#pragma once

// Differentiable operator set. Every op reads its inputs, allocates a fresh
// output, and, when an input requires grad under an active Tape, records the
// rule that propagates the output gradient back to those inputs.

#include <span>
#include <vector>

#include "cair/tensor.hpp"

namespace cair {

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

/// Zero-padded cross-correlation. `bias` may be undefined.
/// x: [N,Cin,H,W], weight: [Cout,Cin/groups,kh,kw], bias: [Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions opt = {});

/// Normalizes across channels at every (n,h,w), then applies per-channel
/// gamma/beta (both [C]).
template <typename T>
Tensor<T> layer_norm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       double eps = 1e-6);

/// Depth-to-space: [N,C*r*r,H,W] -> [N,C,H*r,W*r].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r);

/// Space-to-depth, the exact inverse of pixel_shuffle.
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r);

/// Max over k x k windows. Ties send the gradient to the first row-major index.
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, int k = 2, int stride = 2);

/// Per-channel spatial mean: [N,C,H,W] -> [N,C,1,1].
template <typename T>
Tensor<T> avg_pool_global(const Tensor<T>& x);

/// Mean over a window x window neighborhood centered at each position and
/// clipped to the image. Windows covering the whole image fall back to the
/// broadcast global mean, so the two agree exactly.
template <typename T>
Tensor<T> avg_pool_local(const Tensor<T>& x, int window);

/// Normalized 1-D Gaussian taps for offsets -radius..radius.
std::vector<double> gaussian_kernel1d(double sigma, int radius);

/// ceil(2 * sigma), at least 1.
int default_blur_radius(double sigma);

/// Separable depthwise Gaussian blur with symmetric (edge-repeating) reflection.
template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& x, double sigma, int radius);

/// 2x2 block average; H and W must be even.
template <typename T>
Tensor<T> resize_half_area(const Tensor<T>& x);

// Elementwise arithmetic. Rank-4 operands broadcast along any axis of extent 1
// (the [N,C,1,1] attention case); otherwise shapes must match exactly.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
/// Gradient passes only where lo < x < hi.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// x[:, c] * s[c] for a rank-1 s of length C.
template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> xs);

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::span<const int64_t> parts);

/// Concatenation along the batch axis.
template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> xs);

/// Sum of all elements as a rank-0 tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// Rotates the H,W plane by k * 90 degrees counter-clockwise.
template <typename T>
Tensor<T> rot90(const Tensor<T>& x, int k);

/// Mirrors along W.
template <typename T>
Tensor<T> flip_w(const Tensor<T>& x);

/// Extends the bottom and right edges by symmetric reflection.
template <typename T>
Tensor<T> pad_reflect(const Tensor<T>& x, int pad_bottom, int pad_right);

/// Spatial window [top, top+height) x [left, left+width).
template <typename T>
Tensor<T> crop(const Tensor<T>& x, int64_t top, int64_t left, int64_t height, int64_t width);

}  // namespace cair
