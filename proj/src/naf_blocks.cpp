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

#include "cair/naf_blocks.hpp"

#include <algorithm>
#include <array>

namespace cair {

template <typename T>
NafBlockParams<T> NafBlockParams<T>::make(ParamStore<T>& store, const std::string& prefix,
                                          int64_t channels, Rng& rng) {
  require(channels >= 1, "NAFBlock width must be positive");
  NafBlockParams p;
  p.channels = channels;
  const int64_t wide = 2 * channels;
  p.ln1_gamma = store.add(prefix + ".ln1.gamma", Shape{channels}, T{1});
  p.ln1_beta = store.add(prefix + ".ln1.beta", Shape{channels});
  p.conv_expand1 = Conv2d<T>::make(store, prefix + ".conv_expand1", channels, wide, 1, rng);
  p.dwconv = Conv2d<T>::make(store, prefix + ".dwconv", wide, wide, 3, rng,
                             {.stride = 1, .padding = 1, .groups = static_cast<int>(wide)});
  p.sca_conv = Conv2d<T>::make(store, prefix + ".sca_conv", channels, channels, 1, rng);
  p.conv_proj1 = Conv2d<T>::make(store, prefix + ".conv_proj1", channels, channels, 1, rng);
  p.beta_scale = store.add(prefix + ".beta", Shape{channels});
  p.ln2_gamma = store.add(prefix + ".ln2.gamma", Shape{channels}, T{1});
  p.ln2_beta = store.add(prefix + ".ln2.beta", Shape{channels});
  p.conv_expand2 = Conv2d<T>::make(store, prefix + ".conv_expand2", channels, wide, 1, rng);
  p.conv_proj2 = Conv2d<T>::make(store, prefix + ".conv_proj2", channels, channels, 1, rng);
  p.gamma_scale = store.add(prefix + ".gamma", Shape{channels});
  return p;
}

template <typename T>
NafGroupParams<T> NafGroupParams<T>::make(ParamStore<T>& store, const std::string& prefix,
                                          int64_t channels, Rng& rng) {
  NafGroupParams g;
  g.conv3 = Conv2d<T>::make(store, prefix + ".conv3", channels, channels, 3, rng,
                            {.stride = 1, .padding = 1, .groups = 1});
  g.conv1 = Conv2d<T>::make(store, prefix + ".conv1", channels, channels, 1, rng);
  g.block1 = NafBlockParams<T>::make(store, prefix + ".block1", channels, rng);
  g.block2 = NafBlockParams<T>::make(store, prefix + ".block2", channels, rng);
  return g;
}

template <typename T>
Tensor<T> simple_gate(const Tensor<T>& x) {
  const int64_t channels = x.shape().c();
  require(channels % 2 == 0,
          "simple_gate: channel count " + std::to_string(channels) + " is odd");
  const std::array<int64_t, 2> halves{channels / 2, channels / 2};
  auto parts = split_channels(x, std::span<const int64_t>(halves));
  return mul(parts[0], parts[1]);
}

template <typename T>
Tensor<T> sca(const Tensor<T>& x, const Conv2d<T>& conv, PoolMode pool) {
  const Shape& s = x.shape();
  // A window spanning the feature map is the global statistic; take the
  // global path so both modes produce identical bits.
  if (pool.is_local() && pool.window < std::max(s.h(), s.w()))
    return mul(x, conv(avg_pool_local(x, pool.window)));
  return mul(x, conv(avg_pool_global(x)));
}

template <typename T>
Tensor<T> naf_block(const Tensor<T>& x, const NafBlockParams<T>& p, PoolMode pool) {
  require(x.shape().c() == p.channels, "naf_block: input has " + std::to_string(x.shape().c()) +
                                           " channels, block expects " +
                                           std::to_string(p.channels));
  Tensor<T> t = layer_norm2d(x, p.ln1_gamma, p.ln1_beta);
  t = p.conv_expand1(t);
  t = p.dwconv(t);
  t = simple_gate(t);
  t = sca(t, p.sca_conv, pool);
  t = p.conv_proj1(t);
  Tensor<T> y = add(x, scale_channels(t, p.beta_scale));

  t = layer_norm2d(y, p.ln2_gamma, p.ln2_beta);
  t = p.conv_expand2(t);
  t = simple_gate(t);
  t = p.conv_proj2(t);
  return add(y, scale_channels(t, p.gamma_scale));
}

template <typename T>
Tensor<T> naf_group(const Tensor<T>& x, const NafGroupParams<T>& p, PoolMode pool) {
  Tensor<T> t = p.conv3(x);
  t = p.conv1(t);
  t = naf_block(t, p.block1, pool);
  return naf_block(t, p.block2, pool);
}

#define CAIR_INSTANTIATE(T)                                                            \
  template struct NafBlockParams<T>;                                                   \
  template struct NafGroupParams<T>;                                                   \
  template Tensor<T> simple_gate(const Tensor<T>&);                                    \
  template Tensor<T> sca(const Tensor<T>&, const Conv2d<T>&, PoolMode);                \
  template Tensor<T> naf_block(const Tensor<T>&, const NafBlockParams<T>&, PoolMode);  \
  template Tensor<T> naf_group(const Tensor<T>&, const NafGroupParams<T>&, PoolMode);

CAIR_INSTANTIATE(float)
CAIR_INSTANTIATE(double)
#undef CAIR_INSTANTIATE

}  // namespace cair
