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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cair/param_store.hpp"
#include "cair/random.hpp"
#include "cair/tensor.hpp"
#include "cair/weights_io.hpp"

namespace cair {

struct TrainConfig {
  double lr_init = 1e-3;
  double lr_final = 1e-6;
  int64_t total_iters = 2000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.9;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;
  int batch_size = 8;
  int patch_size = 64;
  double aug_prob = 0.5;
  uint64_t seed = 0;
  int64_t log_interval = 50;
  /// Checkpoint every this many iterations; 0 disables.
  int64_t checkpoint_interval = 0;
  std::string checkpoint_path;

  void validate() const;
};

/// Batch-mean negative PSNR (MAX = 1), each sample's MSE floored at 1e-12.
template <typename T>
Tensor<T> psnr_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// A degraded input and its reference, both [1,C,H,W] with equal H and W.
template <typename T>
struct ImagePair {
  Tensor<T> input;
  Tensor<T> target;
};

/// With probability p a horizontal flip, then with probability p a rotation
/// by k * 90 degrees, k uniform in {1, 2, 3}. Both images get the same transform.
template <typename T>
ImagePair<T> augment(const ImagePair<T>& pair, Rng& rng, double p = 0.5);

/// The same random patch_size x patch_size window of both images.
template <typename T>
ImagePair<T> sample_patch(const ImagePair<T>& pair, int patch_size, Rng& rng);

/// Cosine annealing from lr_init at iter 0 to lr_final at total_iters.
double cosine_lr(int64_t iter, const TrainConfig& cfg);

template <typename T>
struct OptimizerState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  int64_t step = 0;

  static OptimizerState zeros_like(const ParamStore<T>& store);
};

/// Decoupled weight decay then a bias-corrected Adam step, applied to every
/// parameter of `store` from its accumulated gradient.
template <typename T>
void adamw_step(ParamStore<T>& store, OptimizerState<T>& state, double lr, const TrainConfig& cfg);

/// Draws the batch for iteration `iter`: patches, augmentation, stacking.
template <typename T>
ImagePair<T> make_batch(const std::vector<ImagePair<T>>& data, const TrainConfig& cfg, int64_t iter);

struct TrainLog {
  std::vector<double> losses;      // one per iteration run
  std::vector<std::string> lines;  // iter=<n> lr=<v> loss=<v> psnr=<v>
};

template <typename T>
using ForwardFn = std::function<Tensor<T>(const Tensor<T>&)>;

/// Runs iterations state.step .. cfg.total_iters - 1. Every random draw of
/// iteration i comes from Rng::derive(cfg.seed, i), so a run resumed from a
/// checkpoint continues exactly as the uninterrupted one. A non-finite loss
/// writes `<checkpoint_path>.diverged` (when a path is set) and throws
/// NonFiniteError.
template <typename T>
TrainLog train(ParamStore<T>& store, const ForwardFn<T>& forward,
               const std::vector<ImagePair<T>>& data, const TrainConfig& cfg,
               OptimizerState<T>& state,
               const std::function<void(const std::string&)>& log_sink = {});

/// Parameters plus optimizer moments, step and seed in one weights file.
template <typename T>
WeightsFile make_checkpoint(const ParamStore<T>& store, const OptimizerState<T>& state,
                            uint64_t seed);

/// Restores parameters and optimizer state; returns the stored seed.
template <typename T>
uint64_t restore_checkpoint(const WeightsFile& file, ParamStore<T>& store,
                            OptimizerState<T>& state);

std::string format_log_line(int64_t iter, double lr, double loss);

}  // namespace cair
