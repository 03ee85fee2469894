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
#include <string>

#include "cair/tensor.hpp"

namespace cair {

/// Reported for identical images.
inline constexpr double kPsnrSentinel = 120.0;

enum class PsnrDomain {
  kUnit,   // values in [0,1], MAX = 1
  kByte,   // values quantized to 8-bit first, MAX = 255
};

/// 10 log10(MAX^2 / MSE) over all elements, capped at kPsnrSentinel.
template <typename T>
double psnr(const Tensor<T>& x, const Tensor<T>& y, PsnrDomain domain = PsnrDomain::kUnit);

/// Mean local SSIM, 11x11 Gaussian window (sigma 1.5) over valid positions,
/// K1 = 0.01, K2 = 0.03, dynamic range 1; averaged over images and channels.
template <typename T>
double ssim(const Tensor<T>& x, const Tensor<T>& y);

struct MetricReport {
  double psnr_db = 0;
  double psnr255_db = 0;
  double ssim = 0;
  int64_t n_images = 0;

  /// Folds in one image; the fields hold per-image means.
  void add(double psnr_unit, double psnr_byte, double ssim_value);

 private:
  double sum_psnr_ = 0, sum_psnr255_ = 0, sum_ssim_ = 0;
};

}  // namespace cair
