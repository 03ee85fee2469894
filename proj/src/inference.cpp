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

#include "cair/inference.hpp"

#include <array>

#include "cair/ops.hpp"

namespace cair {

template <typename T>
Tensor<T> dihedral(const Tensor<T>& x, int code) {
  require(code >= 0 && code < 8, "dihedral: code must lie in 0..7");
  Tensor<T> y = code % 4 == 0 ? x : rot90(x, code % 4);
  return code >= 4 ? flip_w(y) : y;
}

template <typename T>
Tensor<T> dihedral_inverse(const Tensor<T>& x, int code) {
  require(code >= 0 && code < 8, "dihedral: code must lie in 0..7");
  Tensor<T> y = code >= 4 ? flip_w(x) : x;
  return code % 4 == 0 ? y : rot90(y, 4 - code % 4);
}

template <typename T>
Tensor<T> self_ensemble(const ModelFn<T>& fn, const Tensor<T>& img) {
  NoGradScope<T> no_grad;
  std::array<Tensor<T>, 8> outs;
  for (int code = 0; code < 8; ++code)
    outs[static_cast<size_t>(code)] = dihedral_inverse(fn(dihedral(img, code)), code);
  for (size_t stride = 1; stride < 8; stride *= 2)
    for (size_t i = 0; i < 8; i += 2 * stride) outs[i] = add(outs[i], outs[i + stride]);
  return scale(outs[0], T{0.125});
}

template <typename T>
ModelFn<T> model_view(const CairModel<T>& model, std::optional<int> tlsc_window,
                      std::optional<Variant> variant) {
  const Variant v = variant.value_or(model.config().variant);
  return [&model, tlsc_window, v](const Tensor<T>& x) {
    ForwardOptions opts;
    opts.tlsc_window = tlsc_window;
    return model.forward_as(v, x, opts);
  };
}

template <typename T>
ModelFn<T> tlsc_apply(const CairModel<T>& model, int window) {
  require(window >= 1, "tlsc: window must be positive");
  return model_view(model, window);
}

void EnsembleConfig::validate() const {
  require(inputs >= 1, "ensemble: inputs must be positive");
  require(width >= 1 && width % 2 == 0, "ensemble: width must be a positive even number");
  require(blocks >= 0, "ensemble: blocks must be non-negative");
}

template <typename T>
EnsembleNet<T>::EnsembleNet(EnsembleConfig config, uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const Conv2dOptions same{.stride = 1, .padding = 1, .groups = 1};
  conv_in_ = Conv2d<T>::make(store_, "conv_in", 3 * config_.inputs, config_.width, 3, rng, same);
  for (int b = 0; b < config_.blocks; ++b)
    blocks_.push_back(NafBlockParams<T>::make(store_, "block" + std::to_string(b), config_.width, rng));
  conv_out_ = Conv2d<T>::make(store_, "conv_out", config_.width, 3, 3, rng, same);
  conv_out_.zero();
}

template <typename T>
Tensor<T> EnsembleNet<T>::forward_stacked(const Tensor<T>& x, PoolMode pool) const {
  const Shape& s = x.shape();
  require(s.rank() == 4 && s.c() == 3 * config_.inputs,
          "ensemble: expected " + std::to_string(3 * config_.inputs) + " input channels, got " +
              s.str());
  std::vector<int64_t> parts(static_cast<size_t>(config_.inputs), 3);
  std::vector<Tensor<T>> images = split_channels(x, std::span<const int64_t>(parts));
  Tensor<T> avg = images[0];
  for (size_t i = 1; i < images.size(); ++i) avg = add(avg, images[i]);
  if (images.size() > 1) avg = scale(avg, static_cast<T>(1.0 / static_cast<double>(images.size())));
  Tensor<T> h = conv_in_(x);
  for (const auto& b : blocks_) h = naf_block(h, b, pool);
  return add(conv_out_(h), avg);
}

template <typename T>
Tensor<T> EnsembleNet<T>::forward(std::span<const Tensor<T>> outputs, PoolMode pool) const {
  require(static_cast<int>(outputs.size()) == config_.inputs,
          "ensemble: expected " + std::to_string(config_.inputs) + " images, got " +
              std::to_string(outputs.size()));
  for (const auto& o : outputs)
    require(o.shape() == outputs[0].shape() && o.shape().rank() == 4 && o.shape().c() == 3,
            "ensemble: member outputs must share one [N,3,H,W] shape, got " + o.shape().str());
  return forward_stacked(concat_channels(outputs), pool);
}

template <typename T>
Tensor<T> ensemble_forward(const Tensor<T>& out_s, const Tensor<T>& out_m, const EnsembleNet<T>& net) {
  const std::array<Tensor<T>, 2> outs{out_s, out_m};
  return net.forward(std::span<const Tensor<T>>(outs));
}

template <typename T>
TrainLog ensemble_train(std::span<const ModelFn<T>> members, EnsembleNet<T>& net,
                        const std::vector<ImagePair<T>>& data, const TrainConfig& cfg,
                        const std::function<void(const std::string&)>& log_sink) {
  require(static_cast<int>(members.size()) == net.config().inputs,
          "ensemble_train: member count does not match the network inputs");
  std::vector<ImagePair<T>> stacked;
  {
    NoGradScope<T> no_grad;
    for (const auto& pair : data) {
      std::vector<Tensor<T>> preds;
      for (const auto& fn : members) preds.push_back(fn(pair.input));
      stacked.push_back({concat_channels(std::span<const Tensor<T>>(preds)), pair.target});
    }
  }
  OptimizerState<T> state;
  const EnsembleNet<T>& cnet = net;
  return train(net.store(), ForwardFn<T>([&cnet](const Tensor<T>& x) { return cnet.forward_stacked(x); }),
               stacked, cfg, state, log_sink);
}

template <typename T>
Tensor<T> restore(const ModelFn<T>& fn, const Tensor<T>& img, bool tta) {
  NoGradScope<T> no_grad;
  return tta ? self_ensemble(fn, img) : fn(img);
}

template <typename T>
Tensor<T> ensemble_compose(const Tensor<T>& img, std::span<const ModelFn<T>> members,
                           const EnsembleNet<T>& net, bool tta, std::optional<int> tlsc_window) {
  NoGradScope<T> no_grad;
  std::vector<Tensor<T>> outs;
  for (const auto& fn : members) outs.push_back(restore(fn, img, tta));
  const PoolMode pool = tlsc_window ? PoolMode::local(*tlsc_window) : PoolMode::global();
  return clamp(net.forward(std::span<const Tensor<T>>(outs), pool), T{0}, T{1});
}

template <typename T>
Tensor<T> cair_star_pipeline(const Tensor<T>& img, const CairModel<T>& model_s,
                             const CairModel<T>& model_m, const EnsembleNet<T>& net,
                             const InferenceOptions& opts) {
  const std::array<ModelFn<T>, 2> members{model_view(model_s, opts.tlsc_window),
                                          model_view(model_m, opts.tlsc_window)};
  return ensemble_compose(img, std::span<const ModelFn<T>>(members), net, opts.tta,
                          opts.tlsc_window);
}

#define CAIR_INSTANTIATE(T)                                                                      \
  template Tensor<T> dihedral(const Tensor<T>&, int);                                            \
  template Tensor<T> dihedral_inverse(const Tensor<T>&, int);                                    \
  template Tensor<T> self_ensemble(const ModelFn<T>&, const Tensor<T>&);                         \
  template ModelFn<T> model_view(const CairModel<T>&, std::optional<int>, std::optional<Variant>); \
  template ModelFn<T> tlsc_apply(const CairModel<T>&, int);                                      \
  template class EnsembleNet<T>;                                                                 \
  template Tensor<T> ensemble_forward(const Tensor<T>&, const Tensor<T>&, const EnsembleNet<T>&); \
  template TrainLog ensemble_train(std::span<const ModelFn<T>>, EnsembleNet<T>&,                 \
                                   const std::vector<ImagePair<T>>&, const TrainConfig&,         \
                                   const std::function<void(const std::string&)>&);              \
  template Tensor<T> restore(const ModelFn<T>&, const Tensor<T>&, bool);                         \
  template Tensor<T> ensemble_compose(const Tensor<T>&, std::span<const ModelFn<T>>,             \
                                      const EnsembleNet<T>&, bool, std::optional<int>);          \
  template Tensor<T> cair_star_pipeline(const Tensor<T>&, const CairModel<T>&,                   \
                                        const CairModel<T>&, const EnsembleNet<T>&,              \
                                        const InferenceOptions&);

CAIR_INSTANTIATE(float)
CAIR_INSTANTIATE(double)
#undef CAIR_INSTANTIATE

}  // namespace cair
