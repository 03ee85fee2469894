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

#include "cair/training.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "cair/ops.hpp"

namespace cair {

void TrainConfig::validate() const {
  require(lr_init > 0 && lr_final >= 0, "train: learning rates must be positive");
  require(lr_final <= lr_init, "train: lr_final must not exceed lr_init");
  require(total_iters >= 0, "train: total_iters must be non-negative");
  require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1,
          "train: Adam betas must lie in [0,1)");
  require(adam_eps > 0, "train: adam_eps must be positive");
  require(weight_decay >= 0, "train: weight_decay must be non-negative");
  require(batch_size >= 1, "train: batch_size must be positive");
  require(patch_size >= 1, "train: patch_size must be positive");
  require(aug_prob >= 0 && aug_prob <= 1, "train: aug_prob must lie in [0,1]");
  require(log_interval >= 1, "train: log_interval must be positive");
  require(checkpoint_interval >= 0, "train: checkpoint_interval must be non-negative");
}

template <typename T>
Tensor<T> psnr_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require(pred.shape() == target.shape(), "psnr_loss: shapes " + pred.shape().str() + " and " +
                                              target.shape().str() + " differ");
  require(pred.shape().rank() == 4, "psnr_loss: expected rank-4 tensors");
  constexpr double kFloor = 1e-12;
  const int64_t batch = pred.shape().n();
  const int64_t per = pred.numel() / batch;
  const T* pd = pred.data().data();
  const T* td = target.data().data();
  std::vector<double> mse(static_cast<size_t>(batch));
  double loss = 0;
  for (int64_t n = 0; n < batch; ++n) {
    double acc = 0;
    for (int64_t i = n * per; i < (n + 1) * per; ++i) {
      const double d = static_cast<double>(pd[i]) - static_cast<double>(td[i]);
      acc += d * d;
    }
    mse[static_cast<size_t>(n)] = acc / static_cast<double>(per);
    loss += 10.0 * std::log10(std::max(mse[static_cast<size_t>(n)], kFloor));
  }
  loss /= static_cast<double>(batch);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(loss));
  if (Tape<T>* tape = recording_tape<T>({&pred, &target})) {
    out.set_requires_grad(true);
    tape->record([pred, target, out, mse, batch, per]() {
      if (!out.has_grad()) return;
      const double g = static_cast<double>(out.grad()[0]);
      const T* pd = pred.data().data();
      const T* td = target.data().data();
      T* dp = pred.requires_grad() ? pred.grad_mut().data() : nullptr;
      T* dt = target.requires_grad() ? target.grad_mut().data() : nullptr;
      for (int64_t n = 0; n < batch; ++n) {
        const double m = mse[static_cast<size_t>(n)];
        if (m <= kFloor) continue;
        // d/dx 10 log10(m) = 10 / (m ln 10) * dm/dx, dm/dx = 2 (p - t) / per.
        const double c = g * 20.0 / (m * std::numbers::ln10 * static_cast<double>(per) *
                                     static_cast<double>(batch));
        for (int64_t i = n * per; i < (n + 1) * per; ++i) {
          const double d = c * (static_cast<double>(pd[i]) - static_cast<double>(td[i]));
          if (dp) dp[i] += static_cast<T>(d);
          if (dt) dt[i] -= static_cast<T>(d);
        }
      }
    });
  }
  return out;
}

template <typename T>
ImagePair<T> augment(const ImagePair<T>& pair, Rng& rng, double p) {
  require(pair.input.shape().h() == pair.target.shape().h() &&
              pair.input.shape().w() == pair.target.shape().w(),
          "augment: image extents differ");
  ImagePair<T> out = pair;
  if (rng.bernoulli(p)) {
    out.input = flip_w(out.input);
    out.target = flip_w(out.target);
  }
  if (rng.bernoulli(p)) {
    const int k = 1 + static_cast<int>(rng.below(3));
    out.input = rot90(out.input, k);
    out.target = rot90(out.target, k);
  }
  return out;
}

template <typename T>
ImagePair<T> sample_patch(const ImagePair<T>& pair, int patch_size, Rng& rng) {
  const Shape& s = pair.input.shape();
  require(s.h() == pair.target.shape().h() && s.w() == pair.target.shape().w(),
          "sample_patch: image extents differ");
  require(patch_size >= 1 && s.h() >= patch_size && s.w() >= patch_size,
          "sample_patch: image " + s.str() + " is smaller than patch " + std::to_string(patch_size));
  const int64_t top = static_cast<int64_t>(rng.below(static_cast<uint64_t>(s.h() - patch_size + 1)));
  const int64_t left = static_cast<int64_t>(rng.below(static_cast<uint64_t>(s.w() - patch_size + 1)));
  return {crop(pair.input, top, left, patch_size, patch_size),
          crop(pair.target, top, left, patch_size, patch_size)};
}

double cosine_lr(int64_t iter, const TrainConfig& cfg) {
  if (cfg.total_iters <= 0) return cfg.lr_final;
  const double t = static_cast<double>(std::clamp<int64_t>(iter, 0, cfg.total_iters)) /
                   static_cast<double>(cfg.total_iters);
  return cfg.lr_final + 0.5 * (cfg.lr_init - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * t));
}

template <typename T>
OptimizerState<T> OptimizerState<T>::zeros_like(const ParamStore<T>& store) {
  OptimizerState s;
  for (const auto& [name, t] : store.entries()) {
    s.m.push_back(Tensor<T>::zeros(t.shape()));
    s.v.push_back(Tensor<T>::zeros(t.shape()));
  }
  return s;
}

template <typename T>
void adamw_step(ParamStore<T>& store, OptimizerState<T>& state, double lr, const TrainConfig& cfg) {
  require(state.m.size() == store.size() && state.v.size() == store.size(),
          "adamw_step: optimizer state does not match the parameter set");
  state.step += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * cfg.weight_decay;
  for (size_t k = 0; k < store.size(); ++k) {
    Tensor<T> p = store.entries()[k].second;
    require(state.m[k].shape() == p.shape() && state.v[k].shape() == p.shape(),
            "adamw_step: moment shape mismatch for '" + store.entries()[k].first + "'");
    if (!p.has_grad()) continue;
    auto pv = p.mutable_data();
    auto g = p.grad();
    auto m = state.m[k].mutable_data();
    auto v = state.v[k].mutable_data();
    for (size_t i = 0; i < pv.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double step = lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.adam_eps);
      pv[i] = static_cast<T>(static_cast<double>(pv[i]) * decay - step);
    }
  }
}

template <typename T>
ImagePair<T> make_batch(const std::vector<ImagePair<T>>& data, const TrainConfig& cfg, int64_t iter) {
  require(!data.empty(), "train: dataset is empty");
  Rng rng = Rng::derive(cfg.seed, static_cast<uint64_t>(iter));
  std::vector<Tensor<T>> inputs, targets;
  for (int b = 0; b < cfg.batch_size; ++b) {
    const auto& pair = data[static_cast<size_t>(rng.below(data.size()))];
    ImagePair<T> patch = augment(sample_patch(pair, cfg.patch_size, rng), rng, cfg.aug_prob);
    inputs.push_back(patch.input);
    targets.push_back(patch.target);
  }
  return {concat_batch(std::span<const Tensor<T>>(inputs)),
          concat_batch(std::span<const Tensor<T>>(targets))};
}

std::string format_log_line(int64_t iter, double lr, double loss) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "iter=%lld lr=%.6e loss=%.6f psnr=%.4f",
                static_cast<long long>(iter), lr, loss, -loss);
  return buf;
}

template <typename T>
TrainLog train(ParamStore<T>& store, const ForwardFn<T>& forward,
               const std::vector<ImagePair<T>>& data, const TrainConfig& cfg,
               OptimizerState<T>& state, const std::function<void(const std::string&)>& log_sink) {
  cfg.validate();
  require(!data.empty(), "train: dataset is empty");
  if (state.m.empty()) state = OptimizerState<T>::zeros_like(store);
  TrainLog log;
  while (state.step < cfg.total_iters) {
    const int64_t iter = state.step;
    const ImagePair<T> batch = make_batch(data, cfg, iter);
    Tape<T> tape;
    Tensor<T> loss;
    {
      TapeScope<T> scope(tape);
      loss = psnr_loss(forward(batch.input), batch.target);
    }
    const double value = static_cast<double>(loss.item());
    if (!std::isfinite(value)) {
      if (!cfg.checkpoint_path.empty())
        make_checkpoint(store, state, cfg.seed).save(cfg.checkpoint_path + ".diverged");
      throw NonFiniteError("non-finite loss at iteration " + std::to_string(iter));
    }
    store.zero_grad();
    tape.backward(loss);
    const double lr = cosine_lr(iter, cfg);
    adamw_step(store, state, lr, cfg);
    log.losses.push_back(value);
    if (state.step % cfg.log_interval == 0 || state.step == cfg.total_iters) {
      log.lines.push_back(format_log_line(state.step, lr, value));
      if (log_sink) log_sink(log.lines.back());
    }
    if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_path.empty() &&
        state.step % cfg.checkpoint_interval == 0)
      make_checkpoint(store, state, cfg.seed).save(cfg.checkpoint_path);
  }
  store.zero_grad();
  return log;
}

template <typename T>
WeightsFile make_checkpoint(const ParamStore<T>& store, const OptimizerState<T>& state,
                            uint64_t seed) {
  WeightsFile file = to_weights(store);
  if (!state.m.empty()) {
    for (size_t k = 0; k < store.size(); ++k) {
      const std::string& name = store.entries()[k].first;
      file.add(make_entry("adam.m." + name, state.m[k]));
      file.add(make_entry("adam.v." + name, state.v[k]));
    }
  }
  file.add({"train.step", Shape{1}, DType::kF64, {static_cast<double>(state.step)}});
  file.add({"train.seed", Shape{2}, DType::kF64,
            {static_cast<double>(seed >> 32), static_cast<double>(seed & 0xFFFFFFFFu)}});
  return file;
}

template <typename T>
uint64_t restore_checkpoint(const WeightsFile& file, ParamStore<T>& store,
                            OptimizerState<T>& state) {
  load_params(store, file);
  const WeightEntry* step = file.find("train.step");
  const WeightEntry* seed = file.find("train.seed");
  if (step == nullptr || seed == nullptr || seed->values.size() != 2)
    throw ContractError("checkpoint lacks train.step / train.seed entries");
  state = OptimizerState<T>::zeros_like(store);
  state.step = static_cast<int64_t>(step->values[0]);
  for (size_t k = 0; k < store.size(); ++k) {
    const std::string& name = store.entries()[k].first;
    for (auto [prefix, target] : {std::pair{"adam.m.", &state.m[k]}, std::pair{"adam.v.", &state.v[k]}}) {
      const WeightEntry* e = file.find(prefix + name);
      if (e == nullptr) throw ContractError("checkpoint lacks entry '" + (prefix + name) + "'");
      if (e->shape != target->shape())
        throw ContractError("shape mismatch at entry '" + (prefix + name) + "': expected " +
                            target->shape().str() + ", got " + e->shape.str());
      auto d = target->mutable_data();
      for (size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(e->values[i]);
    }
  }
  return (static_cast<uint64_t>(seed->values[0]) << 32) | static_cast<uint64_t>(seed->values[1]);
}

#define CAIR_INSTANTIATE(T)                                                                    \
  template Tensor<T> psnr_loss(const Tensor<T>&, const Tensor<T>&);                            \
  template ImagePair<T> augment(const ImagePair<T>&, Rng&, double);                            \
  template ImagePair<T> sample_patch(const ImagePair<T>&, int, Rng&);                          \
  template struct OptimizerState<T>;                                                           \
  template void adamw_step(ParamStore<T>&, OptimizerState<T>&, double, const TrainConfig&);    \
  template ImagePair<T> make_batch(const std::vector<ImagePair<T>>&, const TrainConfig&,       \
                                   int64_t);                                                   \
  template TrainLog train(ParamStore<T>&, const ForwardFn<T>&,                                 \
                          const std::vector<ImagePair<T>>&, const TrainConfig&,                \
                          OptimizerState<T>&, const std::function<void(const std::string&)>&); \
  template WeightsFile make_checkpoint(const ParamStore<T>&, const OptimizerState<T>&,         \
                                       uint64_t);                                              \
  template uint64_t restore_checkpoint(const WeightsFile&, ParamStore<T>&, OptimizerState<T>&);

CAIR_INSTANTIATE(float)
CAIR_INSTANTIATE(double)
#undef CAIR_INSTANTIATE

}  // namespace cair
