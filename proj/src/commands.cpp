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

#include "cair/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cair/image_io.hpp"
#include "cair/ops.hpp"
#include "json.hpp"

namespace cair {

namespace fs = std::filesystem;

namespace {

std::string index_root(const std::string& index) {
  const fs::path parent = fs::path(index).parent_path();
  return parent.empty() ? "." : parent.string();
}

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm";
}

std::vector<fs::path> list_images(const std::string& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

std::unique_ptr<CairModel<float>> load_model(const RunConfig& cfg, const std::string& weights) {
  require(cfg.network == Network::kCair, "config describes an ensemble network, not a CAIR model");
  auto model = std::make_unique<CairModel<float>>(cfg.model, cfg.train.seed);
  load_params(model->store(), WeightsFile::load(weights));
  return model;
}

std::unique_ptr<EnsembleNet<float>> load_ensemble(const RunConfig& cfg, const std::string& weights) {
  require(cfg.network == Network::kEnsemble, "config does not describe an ensemble network");
  auto net = std::make_unique<EnsembleNet<float>>(cfg.ensemble, cfg.train.seed);
  load_params(net->store(), WeightsFile::load(weights));
  return net;
}

TrainLog cmd_train(const TrainCommand& cmd, const LogSink& log) {
  RunConfig cfg = cmd.config;
  require(cfg.network == Network::kCair, "train: config describes an ensemble; use ensemble-train");
  require(!cfg.data.index.empty(), "train: [data] index is not set");
  if (cmd.seed) cfg.train.seed = *cmd.seed;
  CairModel<float> model(cfg.model, cfg.train.seed);
  OptimizerState<float> state;
  if (!cmd.resume.empty()) {
    cfg.train.seed = restore_checkpoint(WeightsFile::load(cmd.resume), model.store(), state);
    if (log) log("resumed from " + cmd.resume + " at iter=" + std::to_string(state.step));
  }
  const DatasetIndex index = DatasetIndex::load(cfg.data.index);
  const auto pairs = load_pairs(index, index_root(cfg.data.index), cfg.data.train_split);
  require(!pairs.empty(), "train: split '" + cfg.data.train_split + "' has no pairs");
  const CairModel<float>& m = model;
  TrainLog result = train(model.store(), ForwardFn<float>([&m](const Tensor<float>& x) { return m.forward(x); }),
                          pairs, cfg.train, state, log);
  if (!cmd.output.empty()) to_weights(model.store()).save(cmd.output);
  return result;
}

Restorer::Restorer(const RestoreSpec& spec) : spec_(spec) {
  if (spec_.config.network == Network::kCair) {
    model_ = load_model(spec_.config, spec_.weights);
  } else {
    net_ = load_ensemble(spec_.config, spec_.weights);
    require(static_cast<int>(spec_.members.size()) == spec_.config.ensemble.inputs,
            "ensemble needs " + std::to_string(spec_.config.ensemble.inputs) + " member models, got " +
                std::to_string(spec_.members.size()));
    for (const auto& m : spec_.members) members_.push_back(load_model(RunConfig::load(m.config), m.weights));
  }
  if (!spec_.tlsc_window && spec_.config.infer.tlsc_window > 0) spec_.tlsc_window = spec_.config.infer.tlsc_window;
  spec_.tta = spec_.tta || spec_.config.infer.tta;
}

Tensor<float> Restorer::operator()(const Tensor<float>& img) const {
  if (model_) {
    const ModelFn<float> fn = model_view(*model_, spec_.tlsc_window, spec_.variant);
    return clamp(restore(fn, img, spec_.tta), 0.0f, 1.0f);
  }
  std::vector<ModelFn<float>> fns;
  for (const auto& m : members_) fns.push_back(model_view(*m, spec_.tlsc_window, spec_.variant));
  return ensemble_compose(img, std::span<const ModelFn<float>>(fns), *net_, spec_.tta, spec_.tlsc_window);
}

std::vector<std::string> cmd_infer(const RestoreSpec& spec, const std::string& input,
                                   const std::string& output_dir) {
  const Restorer restorer(spec);
  std::vector<fs::path> inputs;
  if (fs::is_directory(input)) {
    inputs = list_images(input);
  } else {
    if (!fs::exists(input)) throw IoError("cannot open '" + input + "'");
    inputs.push_back(input);
  }
  fs::create_directories(output_dir);
  std::vector<std::string> written;
  for (const auto& path : inputs) {
    const Tensor<float> out = restorer(load_image(path.string()));
    const fs::path dst = fs::path(output_dir) / (path.stem().string() + "_restored.png");
    save_png(dst.string(), out);
    written.push_back(dst.string());
  }
  return written;
}

MetricReport cmd_eval(const EvalCommand& cmd) {
  std::unique_ptr<Restorer> restorer;
  if (cmd.restore) restorer = std::make_unique<Restorer>(*cmd.restore);
  const DatasetIndex index = DatasetIndex::load(cmd.index);
  const fs::path root = index_root(cmd.index);
  MetricReport report;
  std::string lines;
  nlohmann::json per_image = nlohmann::json::array();
  for (const auto& e : index.entries) {
    if (e.split != cmd.split) continue;
    const Tensor<float> filtered = load_image((root / e.filtered).string());
    const Tensor<float> original = load_image((root / e.original).string());
    const Tensor<float> out = restorer ? (*restorer)(filtered) : filtered;
    const double p = psnr(out, original), p255 = psnr(out, original, PsnrDomain::kByte);
    const double s = ssim(out, original);
    report.add(p, p255, s);
    lines += e.filtered + "\tfilter=" + e.filter_name + "\tpsnr=" + fixed(p, 4) + "\tpsnr255=" +
             fixed(p255, 4) + "\tssim=" + fixed(s, 6) + "\n";
    per_image.push_back({{"filtered", e.filtered}, {"filter", e.filter_name}, {"psnr_db", p},
                         {"psnr255_db", p255}, {"ssim", s}});
  }
  require(report.n_images > 0, "eval: split '" + cmd.split + "' has no pairs");
  if (!cmd.output_dir.empty()) {
    fs::create_directories(cmd.output_dir);
    lines += "summary\tn=" + std::to_string(report.n_images) + "\tpsnr=" + fixed(report.psnr_db, 4) +
             "\tpsnr255=" + fixed(report.psnr255_db, 4) + "\tssim=" + fixed(report.ssim, 6) + "\n";
    std::ofstream txt(fs::path(cmd.output_dir) / "metrics.txt", std::ios::trunc);
    txt << lines;
    if (!txt) throw IoError("cannot write metrics.txt in '" + cmd.output_dir + "'");
    nlohmann::json summary{{"split", cmd.split},         {"n_images", report.n_images},
                           {"psnr_db", report.psnr_db},   {"psnr255_db", report.psnr255_db},
                           {"ssim", report.ssim},         {"per_image", per_image}};
    std::ofstream js(fs::path(cmd.output_dir) / "metrics.json", std::ios::trunc);
    js << summary.dump(2) << "\n";
    if (!js) throw IoError("cannot write metrics.json in '" + cmd.output_dir + "'");
  }
  return report;
}

TrainLog cmd_ensemble_train(const EnsembleTrainCommand& cmd, const LogSink& log) {
  RunConfig cfg = cmd.config;
  require(cfg.network == Network::kEnsemble, "ensemble-train: config must set network = ensemble");
  require(!cfg.data.index.empty(), "ensemble-train: [data] index is not set");
  if (cmd.seed) cfg.train.seed = *cmd.seed;
  require(static_cast<int>(cmd.members.size()) == cfg.ensemble.inputs,
          "ensemble-train: expected " + std::to_string(cfg.ensemble.inputs) + " member models");
  std::vector<std::unique_ptr<CairModel<float>>> models;
  std::vector<ModelFn<float>> fns;
  for (const auto& m : cmd.members) {
    models.push_back(load_model(RunConfig::load(m.config), m.weights));
    fns.push_back(model_view(*models.back()));
  }
  EnsembleNet<float> net(cfg.ensemble, cfg.train.seed);
  const DatasetIndex index = DatasetIndex::load(cfg.data.index);
  const auto pairs = load_pairs(index, index_root(cfg.data.index), cfg.data.train_split);
  TrainLog result = ensemble_train(std::span<const ModelFn<float>>(fns), net, pairs, cfg.train, log);
  if (!cmd.output.empty()) to_weights(net.store()).save(cmd.output);
  return result;
}

std::vector<GradCaseResult> cmd_gradcheck(int seeds, uint64_t seed, const LogSink& log) {
  return run_grad_suite(seeds, seed, [&log](const GradCaseResult& r) {
    if (!log) return;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", r.worst);
    log("case=\"" + r.name + "\" seeds=" + std::to_string(r.seeds) + " max_rel_error=" + buf +
        " status=" + (r.worst <= 1e-6 ? "pass" : "fail"));
  });
}

DatasetIndex cmd_gen_data(const GenDataCommand& cmd) {
  require(!cmd.out_dir.empty(), "gen-data: output directory is not set");
  std::vector<std::pair<std::string, Tensor<float>>> sources;
  if (cmd.synthetic > 0) {
    require(cmd.size >= 16, "gen-data: size must be at least 16");
    for (int i = 0; i < cmd.synthetic; ++i) {
      char stem[32];
      std::snprintf(stem, sizeof(stem), "synth_%04d", i);
      sources.emplace_back(stem, synthetic_image(cmd.size, cmd.size,
                                                 Rng::derive(cmd.seed, static_cast<uint64_t>(i)).next_u64()));
    }
  } else {
    require(!cmd.sources_dir.empty(), "gen-data: give a sources directory or a synthetic count");
    for (const auto& p : list_images(cmd.sources_dir)) sources.emplace_back(p.stem().string(), load_image(p.string()));
    require(!sources.empty(), "gen-data: no PNG or PPM images in '" + cmd.sources_dir + "'");
  }
  CorpusOptions opts;
  opts.seed = cmd.seed;
  opts.test_fraction = cmd.test_fraction;
  opts.val_fraction = cmd.val_fraction;
  return generate_corpus(sources, builtin_filters(), cmd.out_dir, opts);
}

int64_t cmd_params(const RunConfig& cfg) {
  if (cfg.network == Network::kEnsemble) return EnsembleNet<float>(cfg.ensemble, 0).store().count();
  return count_params(cfg.model);
}

}  // namespace cair
