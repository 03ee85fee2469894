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

#include "cair/param_store.hpp"
#include "cair/tensor.hpp"

namespace cair {

/// Pooling used by simplified channel attention. A positive window switches to
/// local statistics (TLSC); the window is measured in pixels of the feature
/// map the block runs on.
struct PoolMode {
  int window = 0;

  static PoolMode global() { return {}; }
  static PoolMode local(int window) { return {window}; }
  bool is_local() const { return window > 0; }
};

/// Activation-free residual block:
///   y   = x + beta  * proj1(sca(gate(dw(expand1(ln1(x))))))
///   out = y + gamma * proj2(gate(expand2(ln2(y))))
template <typename T>
struct NafBlockParams {
  int64_t channels = 0;
  Tensor<T> ln1_gamma, ln1_beta;
  Conv2d<T> conv_expand1;  // 1x1, C -> 2C
  Conv2d<T> dwconv;        // 3x3 depthwise on 2C
  Conv2d<T> sca_conv;      // 1x1, C -> C
  Conv2d<T> conv_proj1;    // 1x1, C -> C
  Tensor<T> beta_scale;
  Tensor<T> ln2_gamma, ln2_beta;
  Conv2d<T> conv_expand2;  // 1x1, C -> 2C
  Conv2d<T> conv_proj2;    // 1x1, C -> C
  Tensor<T> gamma_scale;

  /// LN at identity, residual scales at zero, convs fan-in uniform.
  static NafBlockParams make(ParamStore<T>& store, const std::string& prefix, int64_t channels,
                             Rng& rng);
};

/// 3x3 conv, 1x1 conv, then two NAFBlocks, all at one width.
template <typename T>
struct NafGroupParams {
  Conv2d<T> conv3;
  Conv2d<T> conv1;
  NafBlockParams<T> block1;
  NafBlockParams<T> block2;

  static NafGroupParams make(ParamStore<T>& store, const std::string& prefix, int64_t channels,
                             Rng& rng);
};

/// Splits channels into halves and multiplies them: [N,2C,H,W] -> [N,C,H,W].
template <typename T>
Tensor<T> simple_gate(const Tensor<T>& x);

/// x scaled channel-wise by conv1x1(pool(x)).
template <typename T>
Tensor<T> sca(const Tensor<T>& x, const Conv2d<T>& conv, PoolMode pool = {});

template <typename T>
Tensor<T> naf_block(const Tensor<T>& x, const NafBlockParams<T>& p, PoolMode pool = {});

template <typename T>
Tensor<T> naf_group(const Tensor<T>& x, const NafGroupParams<T>& p, PoolMode pool = {});

}  // namespace cair
