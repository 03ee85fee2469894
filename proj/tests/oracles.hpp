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

// Brute-force reference metrics shared by the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cmath>

#include "cair/tensor.hpp"

namespace cair::test {

inline double psnr_oracle(const Tensor<double>& x, const Tensor<double>& y, bool byte) {
  double se = 0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    double a = x.data()[static_cast<size_t>(i)], b = y.data()[static_cast<size_t>(i)];
    if (byte) {
      a = std::round(std::min(1.0, std::max(0.0, a)) * 255);
      b = std::round(std::min(1.0, std::max(0.0, b)) * 255);
    }
    se += (a - b) * (a - b);
  }
  const double mse = se / static_cast<double>(x.numel());
  return 10 * std::log10((byte ? 255.0 * 255.0 : 1.0) / mse);
}

// Direct windowed SSIM: 11x11 Gaussian weights at every valid position.
inline double ssim_oracle(const Tensor<double>& x, const Tensor<double>& y) {
  const Shape& s = x.shape();
  double wgt[11][11], z = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      wgt[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      z += wgt[i][j];
    }
  double total = 0;
  int planes = 0;
  for (int64_t n = 0; n < s.n(); ++n)
    for (int64_t c = 0; c < s.c(); ++c, ++planes) {
      double acc = 0;
      int count = 0;
      for (int64_t r = 0; r + 11 <= s.h(); ++r)
        for (int64_t q = 0; q + 11 <= s.w(); ++q, ++count) {
          double ma = 0, mb = 0;
          for (int i = 0; i < 11; ++i)
            for (int j = 0; j < 11; ++j) {
              ma += wgt[i][j] / z * x.at(n, c, r + i, q + j);
              mb += wgt[i][j] / z * y.at(n, c, r + i, q + j);
            }
          double va = 0, vb = 0, cov = 0;
          for (int i = 0; i < 11; ++i)
            for (int j = 0; j < 11; ++j) {
              const double da = x.at(n, c, r + i, q + j) - ma, db = y.at(n, c, r + i, q + j) - mb;
              va += wgt[i][j] / z * da * da;
              vb += wgt[i][j] / z * db * db;
              cov += wgt[i][j] / z * da * db;
            }
          const double c1 = 1e-4, c2 = 9e-4;
          acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
      total += acc / count;
    }
  return total / planes;
}

}  // namespace cair::test
