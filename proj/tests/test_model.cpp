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


#include "cair/cair_model.hpp"
#include "cair/ops.hpp"
#include "helpers.hpp"

using namespace cair;
using test::bit_equal;
using test::random_tensor;

namespace {

int64_t naf(int64_t c) { return 2 * (2 * c) + 2 * (2 * c * c + 2 * c) + 20 * c + 3 * (c * c + c) + 2 * c; }
int64_t group(int64_t c) { return 9 * c * c + c + c * c + c + 2 * naf(c); }
int64_t color_module(int64_t cw, bool structural) {
  return 4 * cw + 2 * group(cw) + cw * cw + cw + (structural ? 28 * cw : 0);
}

// Closed-form count of the U-Net, the color modules and their fusion.
int64_t closed_form_count(const CairConfig& cfg) {
  const int64_t w = cfg.width, cw = cfg.color_width();
  const int l = cfg.levels;
  const bool ca1 = cfg.variant != Variant::kPlain, ca = cfg.variant == Variant::kM;
  int64_t n = 27 * w + w + 27 * w + 3;
  for (int k = 1; k <= l; ++k) {
    const int64_t c = w << (k - 1);
    n += cfg.blocks[static_cast<size_t>(k - 1)] * naf(c);
    if (k >= 2) {
      n += (c / 2) * c * 4 + c;
      if (ca) n += color_module(cw, true) + (c + cw) * c + c;
    }
    if (k < l) n += 2 * c * 4 * c + cfg.blocks[static_cast<size_t>(2 * l - k - 1)] * naf(c);
  }
  if (ca1) n += color_module(cw, false) + cw * 4 * cw + 4 * cw + cw * w + w;
  return n;
}

CairConfig tiny(Variant v, int levels = 3, int64_t width = 4) {
  CairConfig cfg;
  cfg.levels = levels;
  cfg.width = width;
  cfg.blocks.assign(static_cast<size_t>(2 * levels - 1), 1);
  cfg.variant = v;
  cfg.blur_sigma = 1.0;
  return cfg;
}

}  // namespace

TEST_CASE("build_pyramid") {
  Rng rng(30);
  auto img = random_tensor(Shape{1, 3, 64, 64}, rng, 0, 1);
  auto one = build_pyramid(img, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].same(img));
  auto four = build_pyramid(img, 4);
  REQUIRE(four.size() == 4);
  for (int k = 0; k < 4; ++k) CHECK(four[static_cast<size_t>(k)].shape() == Shape{1, 3, 64 >> k, 64 >> k});
  for (const auto& level : build_pyramid(Tensor<double>(Shape{1, 3, 16, 16}, 0.25), 3))
    for (double v : level.data()) CHECK(v == 0.25);
  CHECK_THROWS_AS(build_pyramid(Tensor<double>(Shape{1, 3, 12, 12}), 4), ContractError);
}

TEST_CASE("zero ending conv makes every variant an exact identity") {
  Rng rng(31);
  for (Variant v : {Variant::kM, Variant::kS, Variant::kPlain}) {
    CairModel<float> model(tiny(v, 3, 8), 7);
    model.params().ending.zero();
    for (auto shape : {Shape{1, 3, 16, 16}, Shape{2, 3, 20, 12}, Shape{1, 3, 13, 9}}) {
      auto x = random_tensor<float>(shape, rng, 0, 1);
      CHECK(bit_equal(model.forward(x), x));
    }
  }
}

TEST_CASE("forward preserves shape, padding odd extents") {
  CairModel<float> model(tiny(Variant::kM, 4, 4), 1);
  Rng rng(32);
  for (auto shape : {Shape{1, 3, 64, 64}, Shape{1, 3, 128, 128}, Shape{1, 3, 30, 45}}) {
    auto y = model.forward(random_tensor<float>(shape, rng, 0, 1));
    CHECK(y.shape() == shape);
    CHECK(all_finite(y));
  }
  CHECK_THROWS_AS(model.forward(Tensor<float>(Shape{1, 4, 16, 16})), ContractError);
}

TEST_CASE("plain variant nests inside M with color zeroed and fusion passing through") {
  CairModel<double> model(tiny(Variant::kM, 3, 4), 11);
  auto& p = model.params();
  for (size_t i = 0; i < p.fuse.size(); ++i) {
    auto& f = p.fuse[i];
    f.zero();
    const int64_t ck = f.weight.shape()[0];
    for (int64_t o = 0; o < ck; ++o) f.weight.at(o, o, 0, 0) = 1;
  }
  Rng rng(33);
  auto x = random_tensor(Shape{1, 3, 16, 16}, rng, 0, 1);
  ForwardOptions zero;
  zero.zero_color = true;
  CHECK(bit_equal(model.forward(x, zero), model.forward_as(Variant::kPlain, x, {})));
  CHECK_FALSE(bit_equal(model.forward(x), model.forward_as(Variant::kPlain, x, {})));
}

TEST_CASE("encoder level widths double per level") {
  for (Variant v : {Variant::kM, Variant::kS, Variant::kPlain}) {
    CairModel<float> model(tiny(v, 4, 6), 0);
    const auto& p = model.params();
    CHECK(p.intro.weight.shape() == Shape{6, 3, 3, 3});
    for (int k = 1; k <= 4; ++k) {
      const int64_t c = int64_t{6} << (k - 1);
      for (const auto& b : p.encoder[static_cast<size_t>(k - 1)]) CHECK(b.channels == c);
      if (k >= 2) CHECK(p.down[static_cast<size_t>(k - 2)].weight.shape() == Shape{c, c / 2, 2, 2});
      if (k < 4)
        for (const auto& b : p.decoder[static_cast<size_t>(k - 1)]) CHECK(b.channels == c);
    }
    CHECK(p.ca.size() == (v == Variant::kM ? 3u : 0u));
    CHECK(p.ca1.has_value() == (v != Variant::kPlain));
  }
}

TEST_CASE("parameter counts match the closed form") {
  CHECK(ParamStore<float>{}.count() == 0);
  for (Variant v : {Variant::kM, Variant::kS, Variant::kPlain})
    for (int levels : {2, 3, 4}) {
      auto cfg = tiny(v, levels, 8);
      cfg.blocks[0] = 2;
      CAPTURE(levels);
      CHECK(count_params(cfg) == closed_form_count(cfg));
    }
  CairConfig def;
  const int64_t n = count_params(def);
  CHECK(n == closed_form_count(def));
  CHECK(n == 11821699);
  // Reported 13.13M; monitored with a wide band.
  CHECK(std::abs(static_cast<double>(n) - 13.13e6) / 13.13e6 <= 0.20);
}

TEST_CASE("config validation") {
  CairConfig cfg;
  cfg.blocks.pop_back();
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  CairConfig zero;
  zero.width = 0;
  CHECK_THROWS_AS(zero.validate(), ContractError);
  CHECK(parse_variant("M") == Variant::kM);
  CHECK(parse_variant(to_string(Variant::kPlain)) == Variant::kPlain);
  CHECK_THROWS_AS(parse_variant("X"), ContractError);
}
