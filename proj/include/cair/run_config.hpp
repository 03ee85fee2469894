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

#include "cair/cair_model.hpp"
#include "cair/inference.hpp"
#include "cair/training.hpp"

namespace cair {

enum class Network { kCair, kEnsemble };

struct DataConfig {
  std::string index;  // index.tsv; paths in it resolve against its directory
  std::string train_split = "train";
  std::string eval_split = "test";
};

struct InferConfig {
  bool tta = false;
  int tlsc_window = 0;  // 0 disables TLSC
};

/// Text configuration:
///
///   [model]  network, variant, levels, width, blocks, ca_width, blur_sigma,
///            blur_radius, ensemble_inputs, ensemble_width, ensemble_blocks
///   [train]  TrainConfig fields
///   [data]   index, train_split, eval_split
///   [infer]  tta, tlsc_window
///
/// One `key = value` per line, '#' starts a comment. Unknown sections and
/// keys are errors. Missing keys keep their defaults.
struct RunConfig {
  Network network = Network::kCair;
  CairConfig model;
  EnsembleConfig ensemble;
  TrainConfig train;
  DataConfig data;
  InferConfig infer;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  /// Canonical form: every section and key in a fixed order.
  std::string serialize() const;
};

}  // namespace cair
