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

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cair/ops.hpp"
#include "cair/random.hpp"
#include "cair/tensor.hpp"

namespace cair {

/// Ordered, uniquely named set of learnable tensors.
template <typename T>
class ParamStore {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  Tensor<T> add(const std::string& name, Shape shape, T fill = T{0}) {
    require(!index_.contains(name), "duplicate parameter name '" + name + "'");
    Tensor<T> t(std::move(shape), fill);
    t.set_requires_grad(true);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, t);
    return t;
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  Tensor<T> get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter '" + name + "'");
    return entries_[it->second].second;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  int64_t count() const {
    int64_t n = 0;
    for (const auto& [name, t] : entries_) n += t.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, t] : entries_) t.zero_grad();
  }

  /// Overwrites values from `other`, which must hold the same names and shapes.
  template <typename U>
  void copy_from(const ParamStore<U>& other) {
    for (auto& [name, t] : entries_) {
      require(other.contains(name), "missing parameter '" + name + "'");
      Tensor<U> src = other.get(name);
      require(src.shape() == t.shape(), "parameter '" + name + "': expected " +
                                            t.shape().str() + ", got " + src.shape().str());
      auto dst = t.mutable_data();
      std::transform(src.data().begin(), src.data().end(), dst.begin(),
                     [](U v) { return static_cast<T>(v); });
    }
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

/// Convolution weights plus the options they are applied with.
template <typename T>
struct Conv2d {
  Tensor<T> weight;
  Tensor<T> bias;
  Conv2dOptions opt;

  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, opt); }

  /// Registers `<name>.weight` / `<name>.bias` with fan-in scaled uniform init.
  static Conv2d make(ParamStore<T>& store, const std::string& name, int64_t cin, int64_t cout,
                     int kernel, Rng& rng, Conv2dOptions opt = {}, bool with_bias = true) {
    require(cin >= 1 && cout >= 1 && kernel >= 1, "conv '" + name + "': widths must be positive");
    Conv2d c;
    c.opt = opt;
    const int64_t cin_g = cin / opt.groups;
    c.weight = store.add(name + ".weight", Shape{cout, cin_g, kernel, kernel});
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin_g * kernel * kernel));
    for (T& v : c.weight.mutable_data()) v = static_cast<T>(rng.uniform(-bound, bound));
    if (with_bias) {
      c.bias = store.add(name + ".bias", Shape{cout});
      for (T& v : c.bias.mutable_data()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    return c;
  }

  /// Sets every weight and bias to zero.
  void zero() {
    std::fill(weight.mutable_data().begin(), weight.mutable_data().end(), T{0});
    if (bias.defined()) std::fill(bias.mutable_data().begin(), bias.mutable_data().end(), T{0});
  }
};

}  // namespace cair
