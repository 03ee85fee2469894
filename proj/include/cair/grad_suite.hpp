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
#include <string>
#include <vector>

#include "cair/grad_check.hpp"
#include "cair/random.hpp"

namespace cair {

/// One randomized instance of a gradient case: inputs and the scalar graph.
struct GradProblem {
  std::vector<Tensor<double>> inputs;
  ScalarFn fn;
};

struct GradCase {
  std::string name;
  std::function<GradProblem(Rng&)> make;
  /// The case is expensive; run it for one seed only.
  bool single_seed = false;
};

struct GradCaseResult {
  std::string name;
  int seeds = 0;
  double worst = 0;
};

/// Every differentiable op on randomized small shapes, the model building
/// blocks, the loss and a tiny CAIR-M graph (l=2, w=4, 16x16).
std::vector<GradCase> grad_cases();

std::vector<GradCaseResult> run_grad_suite(int seeds, uint64_t base_seed = 0,
                                           const std::function<void(const GradCaseResult&)>& on_case = {});

}  // namespace cair
