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


#include <fstream>
#include <iterator>

#include "cair/commands.hpp"
#include "cair/image_io.hpp"
#include "cair/weights_io.hpp"
#include "helpers.hpp"

using namespace cair;
using test::bit_equal;
using test::random_tensor;
namespace fs = std::filesystem;

namespace {

uint32_t crc32_oracle(const std::vector<uint8_t>& bytes, size_t n) {
  uint32_t crc = 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) {
    crc ^= bytes[i];
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

template <typename I>
void put_le(std::vector<uint8_t>& out, I v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<uint8_t>((static_cast<uint64_t>(v) >> (8 * i)) & 0xFF));
}

std::string what_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* kTinyModel =
    "[model]\nvariant = M\nlevels = 2\nwidth = 4\nblocks = 1,1,1\nblur_sigma = 1\n";

}  // namespace

TEST_CASE("weights container layout matches the byte-level description") {
  WeightsFile file;
  file.add({"ab", Shape{2}, DType::kF32, {1.5, -2.0}});
  file.add({"c", Shape{1, 1}, DType::kF64, {0.1}});
  const auto bytes = file.serialize();

  std::vector<uint8_t> expect{'C', 'A', 'I', 'R', 'W', '1'};
  put_le(expect, 1u, 4);
  put_le(expect, 2u, 8);
  put_le(expect, 2u, 4);
  expect.push_back('a');
  expect.push_back('b');
  expect.push_back(1);
  put_le(expect, 2u, 8);
  expect.push_back(0);
  for (float f : {1.5f, -2.0f}) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    put_le(expect, u, 4);
  }
  put_le(expect, 1u, 4);
  expect.push_back('c');
  expect.push_back(2);
  put_le(expect, 1u, 8);
  put_le(expect, 1u, 8);
  expect.push_back(1);
  double d = 0.1;
  uint64_t u64;
  std::memcpy(&u64, &d, 8);
  put_le(expect, u64, 8);
  put_le(expect, crc32_oracle(expect, expect.size()), 4);
  CHECK(bytes == expect);
}

TEST_CASE("weights round-trip bit-exactly and keep forward outputs") {
  const auto dir = test::scratch_dir("weights");
  CairConfig cfg = RunConfig::parse(kTinyModel).model;
  CairModel<float> a(cfg, 1), b(cfg, 2);
  to_weights(a.store()).save((dir / "a.w").string());
  load_params(b.store(), WeightsFile::load((dir / "a.w").string()));
  for (size_t i = 0; i < a.store().size(); ++i)
    CHECK(bit_equal(a.store().entries()[i].second, b.store().entries()[i].second));
  Rng rng(80);
  auto x = random_tensor<float>(Shape{1, 3, 8, 8}, rng, 0, 1);
  CHECK(bit_equal(a.forward(x), b.forward(x)));

  CairModel<double> da(cfg, 3), db(cfg, 4);
  auto parsed = WeightsFile::parse(to_weights(da.store()).serialize());
  CHECK(parsed.entries().front().dtype == DType::kF64);
  load_params(db.store(), parsed);
  for (size_t i = 0; i < da.store().size(); ++i)
    CHECK(bit_equal(da.store().entries()[i].second, db.store().entries()[i].second));
}

TEST_CASE("corrupt weights are rejected") {
  WeightsFile file;
  file.add({"w", Shape{3}, DType::kF32, {1, 2, 3}});
  const auto good = file.serialize();
  auto flipped = good;
  flipped[30] ^= 0x10;
  CHECK(what_of([&] { WeightsFile::parse(flipped); }).find("corrupt weights") == 0);
  auto cut = std::vector<uint8_t>(good.begin(), good.end() - 7);
  CHECK(what_of([&] { WeightsFile::parse(cut); }).find("corrupt weights") == 0);
  auto magic = good;
  magic[0] = 'X';
  CHECK(what_of([&] { WeightsFile::parse(magic); }).find("corrupt weights") == 0);
  CHECK_THROWS_AS(WeightsFile::parse({}), IoError);
  CHECK_THROWS_AS(file.add({"w", Shape{1}, DType::kF32, {0}}), ContractError);
}

TEST_CASE("architecture mismatch names the first entry and both shapes") {
  CairConfig small = RunConfig::parse(kTinyModel).model;
  CairConfig wide = small;
  wide.width = 6;
  CairModel<float> a(small, 0), b(wide, 0);
  const std::string msg = what_of([&] { load_params(b.store(), to_weights(a.store())); });
  CHECK(msg == "shape mismatch at entry 'intro.weight': expected [6,3,3,3], got [4,3,3,3]");
  WeightsFile empty;
  CHECK(what_of([&] { load_params(a.store(), empty); }) == "weights lack entry 'intro.weight'");
}

TEST_CASE("run config round-trips to canonical form") {
  const std::string text =
      "# tiny\n[model]\nvariant = S\nlevels = 3\nwidth = 8\nblocks = 1, 1, 2, 1, 1\n"
      "[train]\nlr_init = 0.002\nseed = 17\n[data]\nindex = data/index.tsv\n[infer]\ntta = true\ntlsc_window = 48\n";
  const RunConfig cfg = RunConfig::parse(text);
  CHECK(cfg.model.variant == Variant::kS);
  CHECK(cfg.model.blocks == std::vector<int>{1, 1, 2, 1, 1});
  CHECK(cfg.train.lr_init == 0.002);
  CHECK(cfg.train.seed == 17);
  CHECK(cfg.infer.tta);
  CHECK(cfg.infer.tlsc_window == 48);
  const std::string canon = cfg.serialize();
  CHECK(RunConfig::parse(canon).serialize() == canon);
  CHECK(RunConfig::parse(RunConfig{}.serialize()).serialize() == RunConfig{}.serialize());

  CHECK_THROWS_AS(RunConfig::parse("[model]\nwdith = 3\n"), ContractError);
  CHECK_THROWS_AS(RunConfig::parse("[optim]\nlr = 1\n"), ContractError);
  CHECK_THROWS_AS(RunConfig::parse("[train]\nbatch_size = eight\n"), ContractError);
  CHECK_THROWS_AS(RunConfig::parse("width = 3\n"), ContractError);
  CHECK(RunConfig::parse("[model]\nnetwork = ensemble\n").network == Network::kEnsemble);
}

TEST_CASE("params command") {
  const auto dir = test::scratch_dir("params");
  CHECK(cmd_params(RunConfig::parse("[model]\nnetwork = ensemble\n")) == 27299);
  CHECK(cmd_params(RunConfig{}) == count_params(CairConfig{}));
}

TEST_CASE("infer with an identity model reproduces its input") {
  const auto dir = test::scratch_dir("infer");
  RunConfig cfg = RunConfig::parse(kTinyModel);
  CairModel<float> model(cfg.model, 0);
  model.params().ending.zero();
  to_weights(model.store()).save((dir / "id.w").string());
  fs::create_directories(dir / "in");
  Rng rng(81);
  save_png((dir / "in" / "photo.png").string(), random_tensor<float>(Shape{1, 3, 18, 14}, rng, 0, 1));
  RestoreSpec spec;
  spec.config = cfg;
  spec.weights = (dir / "id.w").string();
  for (bool tta : {false, true}) {
    spec.tta = tta;
    const auto written = cmd_infer(spec, (dir / "in").string(), (dir / "out").string());
    REQUIRE(written.size() == 1);
    CHECK(fs::path(written[0]).filename() == "photo_restored.png");
    const auto in = load_image((dir / "in" / "photo.png").string());
    CHECK(psnr(load_image(written[0]), in) >= kPsnrSentinel);
  }
  spec.weights = (dir / "missing.w").string();
  CHECK_THROWS_AS(cmd_infer(spec, (dir / "in").string(), (dir / "out").string()), IoError);
}

TEST_CASE("eval on identical pairs reports the sentinel and is deterministic") {
  const auto dir = test::scratch_dir("eval");
  Rng rng(82);
  DatasetIndex index;
  for (int i = 0; i < 3; ++i) {
    const std::string name = "img" + std::to_string(i) + ".png";
    save_png((dir / name).string(), random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0, 1));
    index.entries.push_back({name, name, "none", "test"});
  }
  index.save((dir / "index.tsv").string());
  EvalCommand cmd;
  cmd.index = (dir / "index.tsv").string();
  cmd.output_dir = (dir / "m1").string();
  auto report = cmd_eval(cmd);
  CHECK(report.n_images == 3);
  CHECK(report.psnr_db == kPsnrSentinel);
  CHECK(report.ssim == 1.0);

  RestoreSpec spec;
  spec.config = RunConfig::parse(kTinyModel);
  CairModel<float> model(spec.config.model, 5);
  to_weights(model.store()).save((dir / "m.w").string());
  spec.weights = (dir / "m.w").string();
  cmd.restore = spec;
  cmd_eval(cmd);
  cmd.output_dir = (dir / "m2").string();
  cmd_eval(cmd);
  const std::string txt = read_text(dir / "m1" / "metrics.txt");
  CHECK(txt == read_text(dir / "m2" / "metrics.txt"));
  CHECK(txt.find("summary\tn=3\t") != std::string::npos);
  CHECK(read_text(dir / "m1" / "metrics.json").find("\"n_images\": 3") != std::string::npos);

  cmd.split = "train";
  CHECK_THROWS_AS(cmd_eval(cmd), ContractError);
}

TEST_CASE("train command is deterministic and resumable") {
  const auto dir = test::scratch_dir("train_cmd");
  GenDataCommand gen;
  gen.synthetic = 3;
  gen.size = 16;
  gen.out_dir = (dir / "data").string();
  gen.seed = 2;
  gen.test_fraction = 0.34;
  CHECK(cmd_gen_data(gen).entries.size() == 24);
  RunConfig cfg = RunConfig::parse(std::string(kTinyModel) +
                                   "[train]\ntotal_iters = 4\nbatch_size = 2\npatch_size = 16\nlog_interval = 1\n");
  cfg.data.index = (dir / "data" / "index.tsv").string();
  TrainCommand a{cfg, (dir / "a.w").string(), "", 3};
  TrainCommand b{cfg, (dir / "b.w").string(), "", 3};
  const auto la = cmd_train(a), lb = cmd_train(b);
  CHECK(la.lines == lb.lines);
  CHECK(read_text(dir / "a.w") == read_text(dir / "b.w"));
  TrainCommand c{cfg, (dir / "c.w").string(), "", 4};
  CHECK(cmd_train(c).lines != la.lines);

  RunConfig ck = cfg;
  ck.train.checkpoint_interval = 3;
  ck.train.checkpoint_path = (dir / "run.ckpt").string();
  cmd_train({ck, "", "", 3});
  TrainCommand resumed{cfg, (dir / "r.w").string(), ck.train.checkpoint_path, {}};
  CHECK(cmd_train(resumed).losses.size() == 1);
  CHECK(read_text(dir / "r.w") == read_text(dir / "a.w"));

  RunConfig ens = RunConfig::parse("[model]\nnetwork = ensemble\nensemble_width = 8\nensemble_blocks = 1\n"
                                   "[train]\ntotal_iters = 2\nbatch_size = 2\npatch_size = 16\n");
  ens.data.index = cfg.data.index;
  write_text(dir / "m.cfg", cfg.serialize());
  EnsembleTrainCommand et{ens, {{a.output, (dir / "m.cfg").string()}, {b.output, (dir / "m.cfg").string()}},
                          (dir / "e.w").string(), 0};
  CHECK(cmd_ensemble_train(et).losses.size() == 2);
  RestoreSpec spec;
  spec.config = ens;
  spec.weights = et.output;
  spec.members = et.members;
  Rng rng(83);
  const auto out = Restorer(spec)(random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0, 1));
  CHECK(out.shape() == Shape{1, 3, 16, 16});
  spec.members.pop_back();
  CHECK_THROWS_AS(Restorer{spec}, ContractError);
}
