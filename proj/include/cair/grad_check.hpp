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
#include <span>
#include <vector>

#include "cair/tensor.hpp"

namespace cair {

struct GradCheckReport {
  /// Per input: max over elements of |analytic - numeric| / max(1, |analytic|, |numeric|).
  std::vector<double> max_rel_error;

  double worst() const;
  bool passed(double tol) const { return worst() <= tol; }
};

using ScalarFn = std::function<Tensor<double>(std::span<const Tensor<double>>)>;

/// Compares tape gradients of the scalar `fn` against central differences
/// with step `h`. Inputs are perturbed in place and restored.
GradCheckReport grad_check(const ScalarFn& fn, std::vector<Tensor<double>> inputs,
                           double h = 1e-5);

}  // namespace cair
