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

#include <string>

#include "cair/tensor.hpp"

namespace cair {

struct LoadOptions {
  /// Convert grayscale, alpha, palette and 16-bit input to 8-bit RGB.
  /// When false such files raise IoError.
  bool convert = true;
};

/// Reads an 8-bit PNG or binary PPM (P6; P5 when converting) into
/// [1,3,H,W] values in [0,1]. The format is chosen by file content.
Tensor<float> load_image(const std::string& path, LoadOptions opts = {});

/// Writes [1,3,H,W] values, clamped to [0,1] and rounded to 8 bits.
void save_png(const std::string& path, const Tensor<float>& img);
void save_ppm(const std::string& path, const Tensor<float>& img);

/// PNG unless the path ends in ".ppm".
void save_image(const std::string& path, const Tensor<float>& img);

}  // namespace cair
