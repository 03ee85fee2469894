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

#include <optional>
#include <string>
#include <vector>

#include "cair/color_attention.hpp"
#include "cair/naf_blocks.hpp"

namespace cair {

/// S: single-scale input with the level-1 color map as a global skip.
/// M: multi-scale input with color attention at every level.
/// Plain: the bare NAFNet U-Net.
enum class Variant { kS, kM, kPlain };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct CairConfig {
  int levels = 4;
  int64_t width = 32;
  std::vector<int> blocks{2, 2, 4, 22, 2, 2, 2};
  Variant variant = Variant::kM;
  /// TLSC window in input pixels, used by inference when set.
  std::optional<int> tlsc_window;
  /// Color attention width; 0 means `width`.
  int64_t ca_width = 0;
  double blur_sigma = 12.0;
  /// 0 means ceil(2 * sigma).
  int blur_radius = 0;

  int64_t color_width() const { return ca_width > 0 ? ca_width : width; }
  int64_t level_width(int level) const { return width << (level - 1); }
  /// Spatial extents must be a multiple of this.
  int64_t size_multiple() const { return int64_t{1} << (levels - 1); }
  /// Throws ContractError naming the first broken invariant.
  void validate() const;
};

template <typename T>
struct CairParams {
  Conv2d<T> intro;                                       // 3x3, 3 -> w
  std::vector<std::vector<NafBlockParams<T>>> encoder;   // per level
  std::vector<Conv2d<T>> down;                           // level k -> k+1: 2x2 stride 2, C -> 2C
  std::vector<Conv2d<T>> up;                             // level k+1 -> k: 1x1 2C -> 4C, shuffle -> C
  std::vector<std::vector<NafBlockParams<T>>> decoder;   // per level 1..l-1
  std::optional<CaParams<T>> ca1;                        // S and M
  std::vector<CaParams<T>> ca;                           // M, levels 2..l
  std::vector<Conv2d<T>> fuse;                           // M, levels 2..l: 1x1 (C_k + ca) -> C_k
  Conv2d<T> color_up;                                    // 1x1 ca -> 4 ca, then shuffle
  Conv2d<T> color_proj;                                  // 1x1 ca -> w
  Conv2d<T> ending;                                      // 3x3, w -> 3
};

/// Inference-time switches for a forward pass.
struct ForwardOptions {
  /// Local SCA statistics over this many input pixels (TLSC).
  std::optional<int> tlsc_window;
  /// Replace every color-attentive feature and the color skip with zeros.
  bool zero_color = false;
};

/// Repeated 2x2 area downscaling: level k has extent H / 2^(k-1).
template <typename T>
std::vector<Tensor<T>> build_pyramid(const Tensor<T>& img, int levels);

template <typename T>
class CairModel {
 public:
  CairModel(CairConfig config, uint64_t seed);

  const CairConfig& config() const { return config_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }
  CairParams<T>& params() { return params_; }
  const CairParams<T>& params() const { return params_; }

  /// [N,3,H,W] -> [N,3,H,W]. Extents that are not a multiple of
  /// 2^(levels-1) are reflect-padded and the output cropped back.
  Tensor<T> forward(const Tensor<T>& img, const ForwardOptions& opts = {}) const;

  /// Runs the architecture of `variant` over these weights. The weights must
  /// include every component that variant needs.
  Tensor<T> forward_as(Variant variant, const Tensor<T>& img, const ForwardOptions& opts) const;

 private:
  CairConfig config_;
  ParamStore<T> store_;
  CairParams<T> params_;
};

/// Exact number of learnable scalars.
template <typename T>
int64_t count_params(const ParamStore<T>& store) {
  return store.count();
}

/// Parameter count of the architecture described by `config`.
int64_t count_params(const CairConfig& config);

}  // namespace cair
