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

#include "cair/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace cair {

double GradCheckReport::worst() const {
  double w = 0;
  for (double e : max_rel_error) w = std::max(w, e);
  return w;
}

GradCheckReport grad_check(const ScalarFn& fn, std::vector<Tensor<double>> inputs, double h) {
  std::vector<std::vector<double>> analytic;
  {
    for (auto& in : inputs) {
      in.set_requires_grad(true);
      in.zero_grad();
    }
    Tape<double> tape;
    TapeScope<double> scope(tape);
    Tensor<double> loss = fn(inputs);
    require(loss.numel() == 1, "grad_check: function must return a scalar");
    tape.backward(loss);
    for (auto& in : inputs) {
      if (in.has_grad())
        analytic.emplace_back(in.grad().begin(), in.grad().end());
      else
        analytic.emplace_back(static_cast<size_t>(in.numel()), 0.0);
    }
  }

  GradCheckReport report;
  NoGradScope<double> no_grad;
  for (size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i].mutable_data();
    double worst = 0;
    for (size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + h;
      const double up = fn(inputs).item();
      values[j] = saved - h;
      const double down = fn(inputs).item();
      values[j] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[i][j];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    report.max_rel_error.push_back(worst);
  }
  return report;
}

}  // namespace cair
