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

// cair: train, run and evaluate filter-removal models.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cair/commands.hpp"

namespace {

using namespace cair;

void print_line(const std::string& s) {
  std::cout << s << '\n' << std::flush;
}

std::optional<Variant> variant_arg(const std::string& v) {
  if (v.empty()) return std::nullopt;
  return parse_variant(v);
}

std::vector<ModelRef> member_refs(const std::vector<std::string>& weights,
                                  const std::vector<std::string>& configs) {
  require(weights.size() == configs.size(),
          "each --member-weights needs a matching --member-config");
  std::vector<ModelRef> refs;
  for (size_t i = 0; i < weights.size(); ++i) refs.push_back({weights[i], configs[i]});
  return refs;
}

int fail(const char* kind, const std::string& what) {
  std::string msg = what;
  for (char& c : msg)
    if (c == '\n') c = ' ';
  std::cerr << "error: " << kind << ": " << msg << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAIR filter-removal engine (set CAIR_THREADS to cap worker threads)"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<uint64_t> seed;
  app.add_option("--seed", seed, "Override the RNG seed of the command");

  // train
  std::string train_config, train_output = "cair.weights", train_resume;
  auto* train = app.add_subcommand("train", "Train a CAIR model from a run config");
  train->add_option("--config", train_config, "Run config file")->required()->check(CLI::ExistingFile);
  train->add_option("--output", train_output, "Where to write the trained weights");
  train->add_option("--resume", train_resume, "Checkpoint to continue from")->check(CLI::ExistingFile);

  // infer / eval share the restoration flags
  std::string weights, config, input, output_dir = ".", variant, index, split = "test";
  std::vector<std::string> member_weights, member_configs;
  bool tta = false, baseline = false;
  int tlsc = 0;
  auto add_restore_flags = [&](CLI::App* cmd, bool weights_required) {
    auto* w = cmd->add_option("--weights", weights, "Model or ensemble weights file");
    if (weights_required) w->required();
    w->check(CLI::ExistingFile);
    cmd->add_option("--config", config, "Run config describing the weights")->check(CLI::ExistingFile);
    cmd->add_flag("--tta", tta, "Average over the 8 dihedral transforms");
    cmd->add_option("--tlsc", tlsc, "Local statistics window in pixels (0 = global pooling)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--variant", variant, "Run the weights as S, M or plain");
    cmd->add_option("--member-weights", member_weights, "Ensemble member weights, in order");
    cmd->add_option("--member-config", member_configs, "Ensemble member configs, in order");
  };

  auto* infer = app.add_subcommand("infer", "Restore an image or a directory of images");
  add_restore_flags(infer, true);
  infer->add_option("--input", input, "Image file or directory")->required();
  infer->add_option("--output-dir", output_dir, "Directory for <stem>_restored.png files");

  auto* eval = app.add_subcommand("eval", "Score a model on one split of a dataset index");
  add_restore_flags(eval, false);
  eval->add_option("--index", index, "Dataset index file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split, "Split to score");
  eval->add_option("--output-dir", output_dir, "Directory for metrics.txt and metrics.json");
  eval->add_flag("--baseline", baseline, "Score the filtered inputs without a model");

  // ensemble-train
  std::string ens_config, ens_output = "ensemble.weights";
  auto* ens = app.add_subcommand("ensemble-train", "Train the fusion network over trained members");
  ens->add_option("--config", ens_config, "Run config with network = ensemble")->required()->check(CLI::ExistingFile);
  ens->add_option("--member-weights", member_weights, "Member weights, in order")->required();
  ens->add_option("--member-config", member_configs, "Member configs, in order")->required();
  ens->add_option("--output", ens_output, "Where to write the fusion weights");

  // gradcheck
  int grad_seeds = 20;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  grad->add_option("--seeds", grad_seeds, "Random instances per op")->check(CLI::PositiveNumber);

  // gen-data
  GenDataCommand gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a filtered/original corpus and its index");
  gen_cmd->add_option("--sources", gen.sources_dir, "Directory of source images")->check(CLI::ExistingDirectory);
  gen_cmd->add_option("--synthetic", gen.synthetic, "Generate this many synthetic sources instead");
  gen_cmd->add_option("--size", gen.size, "Synthetic source extent in pixels");
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--test-fraction", gen.test_fraction, "Share of sources held out for test");
  gen_cmd->add_option("--val-fraction", gen.val_fraction, "Share of sources held out for validation");

  // params
  std::string params_config;
  auto* params = app.add_subcommand("params", "Count learnable parameters of a config");
  params->add_option("--config", params_config, "Run config file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  auto restore_spec = [&]() {
    RestoreSpec spec;
    require(!config.empty(), "--config is required with --weights");
    spec.config = RunConfig::load(config);
    spec.weights = weights;
    spec.members = member_refs(member_weights, member_configs);
    spec.tta = tta;
    if (tlsc > 0) spec.tlsc_window = tlsc;
    spec.variant = variant_arg(variant);
    return spec;
  };

  try {
    if (*train) {
      TrainCommand cmd{RunConfig::load(train_config), train_output, train_resume, seed};
      cmd_train(cmd, print_line);
      print_line("weights=" + train_output);
    } else if (*infer) {
      for (const auto& path : cmd_infer(restore_spec(), input, output_dir)) print_line("wrote=" + path);
    } else if (*eval) {
      EvalCommand cmd;
      require(baseline != !weights.empty(), "eval needs either --weights or --baseline");
      if (!baseline) cmd.restore = restore_spec();
      cmd.index = index;
      cmd.split = split;
      cmd.output_dir = output_dir;
      const MetricReport r = cmd_eval(cmd);
      char buf[160];
      std::snprintf(buf, sizeof(buf), "n=%lld psnr=%.4f psnr255=%.4f ssim=%.6f",
                    static_cast<long long>(r.n_images), r.psnr_db, r.psnr255_db, r.ssim);
      print_line(buf);
    } else if (*ens) {
      EnsembleTrainCommand cmd{RunConfig::load(ens_config), member_refs(member_weights, member_configs),
                               ens_output, seed};
      cmd_ensemble_train(cmd, print_line);
      print_line("weights=" + ens_output);
    } else if (*grad) {
      bool ok = true;
      for (const auto& r : cmd_gradcheck(grad_seeds, seed.value_or(0), print_line)) ok = ok && r.worst <= 1e-6;
      if (!ok) return fail("gradcheck", "at least one case exceeds 1e-6");
    } else if (*gen_cmd) {
      if (seed) gen.seed = *seed;
      const DatasetIndex idx = cmd_gen_data(gen);
      print_line("pairs=" + std::to_string(idx.entries.size()) + " index=" + gen.out_dir + "/index.tsv");
    } else if (*params) {
      print_line(std::to_string(cmd_params(RunConfig::load(params_config))));
    }
  } catch (const IoError& e) {
    return fail("io", e.what());
  } catch (const ContractError& e) {
    return fail("contract", e.what());
  } catch (const NonFiniteError& e) {
    return fail("non-finite", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
