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

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cair/cair_model.hpp"
#include "cair/naf_blocks.hpp"
#include "cair/training.hpp"

namespace cair {

template <typename T>
using ModelFn = std::function<Tensor<T>(const Tensor<T>&)>;

/// Dihedral transform `code` in 0..7: rotate by (code % 4) * 90 degrees
/// counter-clockwise, then flip horizontally when code >= 4.
template <typename T>
Tensor<T> dihedral(const Tensor<T>& x, int code);

template <typename T>
Tensor<T> dihedral_inverse(const Tensor<T>& x, int code);

/// Mean over the 8 dihedral transforms of inverse(fn(transform(img))).
/// Branch outputs are summed pairwise in a fixed order.
template <typename T>
Tensor<T> self_ensemble(const ModelFn<T>& fn, const Tensor<T>& img);

/// Forward view of `model` with every SCA pool replaced by a local window of
/// `window` input pixels. Parameters are shared, not copied; `model` must
/// outlive the view.
template <typename T>
ModelFn<T> tlsc_apply(const CairModel<T>& model, int window);

/// Plain forward view, optionally as another variant over the same weights.
template <typename T>
ModelFn<T> model_view(const CairModel<T>& model, std::optional<int> tlsc_window = {},
                      std::optional<Variant> variant = {});

struct EnsembleConfig {
  int inputs = 2;
  int64_t width = 32;
  int blocks = 3;

  void validate() const;
};

/// Fusion network over k restored images stacked as 3k channels:
///   out = conv_out(blocks(conv_in(x))) + mean of the k images.
/// conv_out starts at zero, so a fresh network returns the mean exactly.
template <typename T>
class EnsembleNet {
 public:
  EnsembleNet(EnsembleConfig config, uint64_t seed);

  const EnsembleConfig& config() const { return config_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }

  Conv2d<T>& conv_in() { return conv_in_; }
  Conv2d<T>& conv_out() { return conv_out_; }

  /// x: [N, 3k, H, W].
  Tensor<T> forward_stacked(const Tensor<T>& x, PoolMode pool = {}) const;
  /// outputs: k tensors [N, 3, H, W] of one shape.
  Tensor<T> forward(std::span<const Tensor<T>> outputs, PoolMode pool = {}) const;

 private:
  EnsembleConfig config_;
  ParamStore<T> store_;
  Conv2d<T> conv_in_;
  std::vector<NafBlockParams<T>> blocks_;
  Conv2d<T> conv_out_;
};

template <typename T>
Tensor<T> ensemble_forward(const Tensor<T>& out_s, const Tensor<T>& out_m, const EnsembleNet<T>& net);

/// Freezes the member models, predicts every training image once, then fits
/// `net` on (stacked predictions, target) pairs with the training recipe.
template <typename T>
TrainLog ensemble_train(std::span<const ModelFn<T>> members, EnsembleNet<T>& net,
                        const std::vector<ImagePair<T>>& data, const TrainConfig& cfg,
                        const std::function<void(const std::string&)>& log_sink = {});

struct InferenceOptions {
  bool tta = false;
  std::optional<int> tlsc_window;
};

/// fn(img), or its self-ensemble when tta is set.
template <typename T>
Tensor<T> restore(const ModelFn<T>& fn, const Tensor<T>& img, bool tta);

/// Fuses member outputs with `net` and clamps the result to [0, 1].
template <typename T>
Tensor<T> ensemble_compose(const Tensor<T>& img, std::span<const ModelFn<T>> members,
                           const EnsembleNet<T>& net, bool tta,
                           std::optional<int> tlsc_window = {});

/// S and M models under TLSC and optional TTA, fused by `net`, clamped to [0, 1].
template <typename T>
Tensor<T> cair_star_pipeline(const Tensor<T>& img, const CairModel<T>& model_s,
                             const CairModel<T>& model_m, const EnsembleNet<T>& net,
                             const InferenceOptions& opts);

}  // namespace cair
