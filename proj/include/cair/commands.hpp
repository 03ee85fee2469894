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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cair/filtersim.hpp"
#include "cair/grad_suite.hpp"
#include "cair/metrics.hpp"
#include "cair/run_config.hpp"

namespace cair {

using LogSink = std::function<void(const std::string&)>;

/// A trained model on disk: weights plus the config describing its architecture.
struct ModelRef {
  std::string weights;
  std::string config;
};

std::unique_ptr<CairModel<float>> load_model(const RunConfig& cfg, const std::string& weights);
std::unique_ptr<EnsembleNet<float>> load_ensemble(const RunConfig& cfg, const std::string& weights);

struct TrainCommand {
  RunConfig config;
  std::string output;  // final weights
  std::string resume;  // checkpoint to continue from; empty starts fresh
  std::optional<uint64_t> seed;
};

/// Trains a CAIR model on the [data] train split and writes its weights.
TrainLog cmd_train(const TrainCommand& cmd, const LogSink& log = {});

struct RestoreSpec {
  RunConfig config;
  std::string weights;
  /// For network = ensemble: the member models, in input order.
  std::vector<ModelRef> members;
  bool tta = false;
  std::optional<int> tlsc_window;
  std::optional<Variant> variant;
};

/// Runs one restoration (model or fused ensemble) on [1,3,H,W] values.
class Restorer {
 public:
  explicit Restorer(const RestoreSpec& spec);
  Tensor<float> operator()(const Tensor<float>& img) const;

 private:
  RestoreSpec spec_;
  std::unique_ptr<CairModel<float>> model_;
  std::vector<std::unique_ptr<CairModel<float>>> members_;
  std::unique_ptr<EnsembleNet<float>> net_;
};

/// Restores a file or every image of a directory into `<stem>_restored.png`.
std::vector<std::string> cmd_infer(const RestoreSpec& spec, const std::string& input,
                                   const std::string& output_dir);

struct EvalCommand {
  /// When unset, scores the filtered inputs themselves (the baseline).
  std::optional<RestoreSpec> restore;
  std::string index;
  std::string split = "test";
  std::string output_dir;  // metrics.txt and metrics.json; empty writes nothing
};

MetricReport cmd_eval(const EvalCommand& cmd);

struct EnsembleTrainCommand {
  RunConfig config;  // network = ensemble, with [train] and [data]
  std::vector<ModelRef> members;
  std::string output;
  std::optional<uint64_t> seed;
};

TrainLog cmd_ensemble_train(const EnsembleTrainCommand& cmd, const LogSink& log = {});

std::vector<GradCaseResult> cmd_gradcheck(int seeds, uint64_t seed, const LogSink& log = {});

struct GenDataCommand {
  std::string sources_dir;  // PNG/PPM sources; used when synthetic == 0
  int synthetic = 0;        // number of generated sources
  int size = 96;
  std::string out_dir;
  uint64_t seed = 0;
  double test_fraction = 0.2;
  double val_fraction = 0.0;
};

DatasetIndex cmd_gen_data(const GenDataCommand& cmd);

int64_t cmd_params(const RunConfig& cfg);

}  // namespace cair
