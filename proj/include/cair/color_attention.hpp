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

#include <string>

#include "cair/naf_blocks.hpp"

namespace cair {

/// Color attention weights. `conv3` (the structural branch) is left undefined
/// for the level-1 module, which only produces a color map.
template <typename T>
struct CaParams {
  int64_t width = 0;
  Conv2d<T> conv1;  // 1x1, 3 -> width
  NafGroupParams<T> ng1;
  NafGroupParams<T> ng2;
  Conv2d<T> conv2;  // 1x1, width -> width
  Conv2d<T> conv3;  // 3x3, 3 -> width
  double blur_sigma = 12.0;
  int blur_radius = 24;

  bool has_structural_branch() const { return conv3.weight.defined(); }

  static CaParams make(ParamStore<T>& store, const std::string& prefix, int64_t width,
                       bool structural, Rng& rng, double blur_sigma = 12.0, int blur_radius = 0);
};

/// sigmoid(conv2(ng2(ng1(maxpool(conv1(blur(img))))))): [N,3,H,W] -> [N,C,H/2,W/2].
template <typename T>
Tensor<T> extract_color_map(const Tensor<T>& img, const CaParams<T>& p, PoolMode pool = {});

/// F_s * M + F_s with F_s = conv3(img_k) and a caller-supplied color map.
template <typename T>
Tensor<T> apply_color_map(const Tensor<T>& img_k, const Tensor<T>& color_map,
                          const CaParams<T>& p);

/// Color-attentive features of img_k using the map extracted from the
/// next-finer pyramid image img_upper (twice the extent of img_k).
template <typename T>
Tensor<T> color_attention(const Tensor<T>& img_k, const Tensor<T>& img_upper,
                          const CaParams<T>& p, PoolMode pool = {});

/// Level-1 module: the color map of the full-resolution input.
template <typename T>
Tensor<T> color_attention_level1(const Tensor<T>& img1, const CaParams<T>& p,
                                 PoolMode pool = {});

}  // namespace cair
