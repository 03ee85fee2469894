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

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cair/tensor.hpp"
#include "cair/training.hpp"

namespace cair {

/// A synthetic photo filter. Stages run in this order on every pixel:
///   channel affine, clamp, per-channel gamma, saturation (lerp toward
///   luma .299/.587/.114), tone curve, radial vignette, clamp.
struct FilterSpec {
  static constexpr int kToneKnots = 8;

  std::string name;
  std::array<double, 9> matrix{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major, out = M * rgb + offset
  std::array<double, 3> offset{0, 0, 0};
  std::array<double, 3> gamma{1, 1, 1};
  double saturation = 1.0;
  double vignette = 0.0;
  /// Outputs at inputs k / 7, k = 0..7; linear in between.
  std::array<double, kToneKnots> tone{0, 1.0 / 7, 2.0 / 7, 3.0 / 7, 4.0 / 7, 5.0 / 7, 6.0 / 7, 1};

  /// Throws ContractError unless gamma > 0, saturation >= 0, vignette in
  /// [0,1] and the tone curve is strictly increasing within [0,1].
  void validate() const;
  double tone_at(double v) const;
};

/// Applies `spec` to [N,3,H,W] values in [0,1].
Tensor<float> apply_filter(const Tensor<float>& img, const FilterSpec& spec);

/// The fixed presets: warm-fade, cool-crush, high-contrast, sepia-drift,
/// teal-orange, washout, vignette-heavy, green-tint.
const std::vector<FilterSpec>& builtin_filters();

/// Looks a preset up by name; throws ContractError when unknown.
const FilterSpec& find_filter(const std::string& name);

/// Deterministic synthetic photo: smooth color fields, shapes and texture.
Tensor<float> synthetic_image(int64_t height, int64_t width, uint64_t seed);

struct IndexEntry {
  std::string original;  // paths relative to the index file's directory
  std::string filtered;
  std::string filter_name;
  std::string split;  // train, val or test
};

struct DatasetIndex {
  std::vector<IndexEntry> entries;

  /// Lines "original<TAB>filtered<TAB>filter_name<TAB>split".
  void save(const std::string& path) const;
  static DatasetIndex load(const std::string& path);
};

struct CorpusOptions {
  double val_fraction = 0.0;
  double test_fraction = 0.2;
  uint64_t seed = 0;
};

/// Writes `<stem>.png` and `<stem>__<filter>.png` for every source and filter
/// into `out_dir`, plus `index.tsv`. Splits are assigned per source image.
DatasetIndex generate_corpus(const std::vector<std::pair<std::string, Tensor<float>>>& sources,
                             const std::vector<FilterSpec>& filters, const std::string& out_dir,
                             const CorpusOptions& opts);

/// Loads the (filtered, original) images of one split; paths resolve
/// against `root`.
std::vector<ImagePair<float>> load_pairs(const DatasetIndex& index, const std::string& root,
                                         const std::string& split);

}  // namespace cair
