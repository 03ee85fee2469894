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

#include "cair/color_attention.hpp"

#include <algorithm>

namespace cair {

template <typename T>
CaParams<T> CaParams<T>::make(ParamStore<T>& store, const std::string& prefix, int64_t width,
                              bool structural, Rng& rng, double blur_sigma, int blur_radius) {
  require(blur_sigma > 0, "color attention: blur sigma must be positive");
  CaParams p;
  p.width = width;
  p.blur_sigma = blur_sigma;
  p.blur_radius = blur_radius > 0 ? blur_radius : default_blur_radius(blur_sigma);
  p.conv1 = Conv2d<T>::make(store, prefix + ".conv1", 3, width, 1, rng);
  p.ng1 = NafGroupParams<T>::make(store, prefix + ".ng1", width, rng);
  p.ng2 = NafGroupParams<T>::make(store, prefix + ".ng2", width, rng);
  p.conv2 = Conv2d<T>::make(store, prefix + ".conv2", width, width, 1, rng);
  if (structural)
    p.conv3 = Conv2d<T>::make(store, prefix + ".conv3", 3, width, 3, rng,
                              {.stride = 1, .padding = 1, .groups = 1});
  return p;
}

template <typename T>
Tensor<T> extract_color_map(const Tensor<T>& img, const CaParams<T>& p, PoolMode pool) {
  const Shape& s = img.shape();
  require(s.rank() == 4 && s.c() == 3, "extract_color_map: expected [N,3,H,W], got " + s.str());
  require(s.h() % 2 == 0 && s.w() % 2 == 0,
          "extract_color_map: extents must be even, got " + s.str());
  Tensor<T> t = gaussian_blur(img, p.blur_sigma, p.blur_radius);
  t = p.conv1(t);
  t = max_pool2d(t, 2, 2);
  // The map lives at half resolution; halve the TLSC window with it.
  PoolMode inner = pool;
  if (inner.is_local()) inner.window = std::max(1, inner.window / 2);
  t = naf_group(t, p.ng1, inner);
  t = naf_group(t, p.ng2, inner);
  t = p.conv2(t);
  return sigmoid(t);
}

template <typename T>
Tensor<T> apply_color_map(const Tensor<T>& img_k, const Tensor<T>& color_map,
                          const CaParams<T>& p) {
  require(p.has_structural_branch(), "color attention: module has no structural branch");
  Tensor<T> fs = p.conv3(img_k);
  require(color_map.shape() == fs.shape(), "color attention: color map " +
                                               color_map.shape().str() +
                                               " does not match structural features " +
                                               fs.shape().str());
  return add(mul(color_map, fs), fs);
}

template <typename T>
Tensor<T> color_attention(const Tensor<T>& img_k, const Tensor<T>& img_upper,
                          const CaParams<T>& p, PoolMode pool) {
  const Shape& lo = img_k.shape();
  const Shape& hi = img_upper.shape();
  require(lo.rank() == 4 && hi.rank() == 4 && hi.h() == 2 * lo.h() && hi.w() == 2 * lo.w() &&
              hi.n() == lo.n(),
          "color attention: upper image " + hi.str() + " is not twice the extent of " +
              lo.str());
  // img_upper is twice as large, so its TLSC window doubles too.
  PoolMode upper = pool;
  if (upper.is_local()) upper.window *= 2;
  return apply_color_map(img_k, extract_color_map(img_upper, p, upper), p);
}

template <typename T>
Tensor<T> color_attention_level1(const Tensor<T>& img1, const CaParams<T>& p, PoolMode pool) {
  return extract_color_map(img1, p, pool);
}

#define CAIR_INSTANTIATE(T)                                                                   \
  template struct CaParams<T>;                                                                \
  template Tensor<T> extract_color_map(const Tensor<T>&, const CaParams<T>&, PoolMode);       \
  template Tensor<T> apply_color_map(const Tensor<T>&, const Tensor<T>&, const CaParams<T>&); \
  template Tensor<T> color_attention(const Tensor<T>&, const Tensor<T>&, const CaParams<T>&,  \
                                     PoolMode);                                               \
  template Tensor<T> color_attention_level1(const Tensor<T>&, const CaParams<T>&, PoolMode);

CAIR_INSTANTIATE(float)
CAIR_INSTANTIATE(double)
#undef CAIR_INSTANTIATE

}  // namespace cair
