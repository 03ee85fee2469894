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


#include <array>

#include "cair/color_attention.hpp"
#include "cair/ops.hpp"
#include "helpers.hpp"

using namespace cair;
using test::bit_equal;
using test::max_abs_diff;
using test::random_tensor;

namespace {

using T4 = Tensor<double>;

void randomize(Tensor<double> t, Rng& rng, double lo = -0.5, double hi = 0.5) {
  for (double& v : t.mutable_data()) v = rng.uniform(lo, hi);
}

// Scalar reference kernels, written without the op library.
T4 ref_conv1x1(const T4& x, const T4& w, const T4& b) {
  const Shape& s = x.shape();
  const int64_t co = w.shape()[0];
  T4 y(Shape{s.n(), co, s.h(), s.w()});
  for (int64_t n = 0; n < s.n(); ++n)
    for (int64_t o = 0; o < co; ++o)
      for (int64_t h = 0; h < s.h(); ++h)
        for (int64_t x_ = 0; x_ < s.w(); ++x_) {
          double acc = b.data()[o];
          for (int64_t i = 0; i < s.c(); ++i) acc += w.at(o, i, 0, 0) * x.at(n, i, h, x_);
          y.at(n, o, h, x_) = acc;
        }
  return y;
}

T4 ref_dw3x3(const T4& x, const T4& w, const T4& b) {
  const Shape& s = x.shape();
  T4 y(s);
  for (int64_t n = 0; n < s.n(); ++n)
    for (int64_t c = 0; c < s.c(); ++c)
      for (int64_t h = 0; h < s.h(); ++h)
        for (int64_t x_ = 0; x_ < s.w(); ++x_) {
          double acc = b.data()[c];
          for (int u = -1; u <= 1; ++u)
            for (int v = -1; v <= 1; ++v) {
              const int64_t r = h + u, q = x_ + v;
              if (r >= 0 && q >= 0 && r < s.h() && q < s.w()) acc += w.at(c, 0, u + 1, v + 1) * x.at(n, c, r, q);
            }
          y.at(n, c, h, x_) = acc;
        }
  return y;
}

T4 ref_ln(const T4& x, const T4& g, const T4& b) {
  const Shape& s = x.shape();
  T4 y(s);
  for (int64_t n = 0; n < s.n(); ++n)
    for (int64_t h = 0; h < s.h(); ++h)
      for (int64_t x_ = 0; x_ < s.w(); ++x_) {
        double m = 0, v = 0;
        for (int64_t c = 0; c < s.c(); ++c) m += x.at(n, c, h, x_);
        m /= static_cast<double>(s.c());
        for (int64_t c = 0; c < s.c(); ++c) v += (x.at(n, c, h, x_) - m) * (x.at(n, c, h, x_) - m);
        v /= static_cast<double>(s.c());
        for (int64_t c = 0; c < s.c(); ++c)
          y.at(n, c, h, x_) = (x.at(n, c, h, x_) - m) / std::sqrt(v + 1e-6) * g.data()[c] + b.data()[c];
      }
  return y;
}

T4 ref_gate(const T4& x) {
  const Shape& s = x.shape();
  const int64_t c2 = s.c() / 2;
  T4 y(Shape{s.n(), c2, s.h(), s.w()});
  for (int64_t n = 0; n < s.n(); ++n)
    for (int64_t c = 0; c < c2; ++c)
      for (int64_t h = 0; h < s.h(); ++h)
        for (int64_t x_ = 0; x_ < s.w(); ++x_) y.at(n, c, h, x_) = x.at(n, c, h, x_) * x.at(n, c + c2, h, x_);
  return y;
}

T4 ref_sca(const T4& x, const T4& w, const T4& b) {
  const Shape& s = x.shape();
  T4 pooled(Shape{s.n(), s.c(), 1, 1});
  for (int64_t n = 0; n < s.n(); ++n)
    for (int64_t c = 0; c < s.c(); ++c) {
      double m = 0;
      for (int64_t h = 0; h < s.h(); ++h)
        for (int64_t x_ = 0; x_ < s.w(); ++x_) m += x.at(n, c, h, x_);
      pooled.at(n, c, 0, 0) = m / static_cast<double>(s.h() * s.w());
    }
  const T4 att = ref_conv1x1(pooled, w, b);
  T4 y(s);
  for (int64_t n = 0; n < s.n(); ++n)
    for (int64_t c = 0; c < s.c(); ++c)
      for (int64_t h = 0; h < s.h(); ++h)
        for (int64_t x_ = 0; x_ < s.w(); ++x_) y.at(n, c, h, x_) = x.at(n, c, h, x_) * att.at(n, c, 0, 0);
  return y;
}

T4 ref_residual(const T4& x, const T4& t, const T4& s) {
  T4 y(x.shape());
  for (int64_t n = 0; n < x.shape().n(); ++n)
    for (int64_t c = 0; c < x.shape().c(); ++c)
      for (int64_t h = 0; h < x.shape().h(); ++h)
        for (int64_t w = 0; w < x.shape().w(); ++w) y.at(n, c, h, w) = x.at(n, c, h, w) + s.data()[c] * t.at(n, c, h, w);
  return y;
}

T4 ref_naf_block(const T4& x, const NafBlockParams<double>& p) {
  T4 t = ref_ln(x, p.ln1_gamma, p.ln1_beta);
  t = ref_conv1x1(t, p.conv_expand1.weight, p.conv_expand1.bias);
  t = ref_dw3x3(t, p.dwconv.weight, p.dwconv.bias);
  t = ref_gate(t);
  t = ref_sca(t, p.sca_conv.weight, p.sca_conv.bias);
  t = ref_conv1x1(t, p.conv_proj1.weight, p.conv_proj1.bias);
  const T4 y = ref_residual(x, t, p.beta_scale);
  t = ref_ln(y, p.ln2_gamma, p.ln2_beta);
  t = ref_conv1x1(t, p.conv_expand2.weight, p.conv_expand2.bias);
  t = ref_gate(t);
  t = ref_conv1x1(t, p.conv_proj2.weight, p.conv_proj2.bias);
  return ref_residual(y, t, p.gamma_scale);
}

void randomize_all(ParamStore<double>& store, Rng& rng) {
  for (auto& [name, t] : store.entries()) randomize(t, rng);
}

int64_t naf_block_count(int64_t c) {
  const int64_t ln = 2 * c, expand = 2 * c * c + 2 * c, dw = 2 * c * 9 + 2 * c, square = c * c + c;
  return ln + expand + dw + square + square + c + ln + expand + square + c;
}

}  // namespace

TEST_CASE("simple_gate") {
  for (double v : test::values(simple_gate(T4(Shape{1, 4, 2, 2}, 1.0)))) CHECK(v == 1);
  Rng rng(20);
  auto x = random_tensor(Shape{1, 4, 2, 2}, rng);
  const std::array<T4, 2> zero_half{random_tensor(Shape{1, 2, 2, 2}, rng), T4(Shape{1, 2, 2, 2})};
  for (double v : test::values(simple_gate(concat_channels(std::span<const T4>(zero_half))))) CHECK(v == 0);
  CHECK(max_abs_diff(simple_gate(x), ref_gate(x)) == 0);

  const std::array<T4, 2> ones_half{zero_half[0], T4(Shape{1, 2, 2, 2}, 1.0)};
  CHECK(bit_equal(simple_gate(concat_channels(std::span<const T4>(ones_half))), zero_half[0]));
  CHECK_THROWS_AS(simple_gate(T4(Shape{1, 3, 2, 2})), ContractError);
}

TEST_CASE("sca") {
  ParamStore<double> store;
  Rng rng(21);
  auto conv = Conv2d<double>::make(store, "sca", 3, 3, 1, rng);
  auto x = random_tensor(Shape{2, 3, 4, 4}, rng);
  CHECK(max_abs_diff(sca(x, conv), ref_sca(x, conv.weight, conv.bias)) <= 1e-14);

  conv.zero();
  for (double v : test::values(sca(x, conv))) CHECK(v == 0);

  for (int c = 0; c < 3; ++c) conv.weight.at(c, c, 0, 0) = 1;
  for (double v : test::values(sca(T4(Shape{1, 3, 3, 3}, 0.6), conv))) CHECK(v == doctest::Approx(0.36).epsilon(1e-12));
}

TEST_CASE("naf_block identity at init and oracle composition") {
  ParamStore<double> store;
  Rng rng(22);
  auto p = NafBlockParams<double>::make(store, "b", 4, rng);
  for (double v : p.beta_scale.data()) CHECK(v == 0);
  for (double v : p.gamma_scale.data()) CHECK(v == 0);
  for (double v : p.ln1_gamma.data()) CHECK(v == 1);
  for (double v : p.ln1_beta.data()) CHECK(v == 0);

  for (auto shape : {Shape{1, 4, 5, 7}, Shape{2, 4, 8, 8}, Shape{1, 4, 1, 1}}) {
    auto x = random_tensor(shape, rng, -3, 3);
    auto y = naf_block(x, p);
    CHECK(bit_equal(y, x));
  }

  randomize_all(store, rng);
  auto x = random_tensor(Shape{2, 4, 5, 6}, rng);
  auto y = naf_block(x, p);
  CHECK(y.shape() == x.shape());
  CHECK(max_abs_diff(y, ref_naf_block(x, p)) <= 1e-12);

  // A local window at least as large as the map takes the global path.
  CHECK(bit_equal(naf_block(x, p, PoolMode::local(6)), y));
  CHECK(bit_equal(naf_block(x, p, PoolMode::local(64)), y));
  CHECK_FALSE(bit_equal(naf_block(x, p, PoolMode::local(3)), y));
}

TEST_CASE("naf_block stays finite on large inputs") {
  ParamStore<float> store;
  Rng rng(23);
  auto p = NafBlockParams<float>::make(store, "b", 8, rng);
  for (float& v : p.beta_scale.mutable_data()) v = 1;
  for (float& v : p.gamma_scale.mutable_data()) v = 1;
  auto x = random_tensor<float>(Shape{1, 8, 16, 16}, rng, -10, 10);
  CHECK(all_finite(naf_block(x, p)));
}

TEST_CASE("naf_block parameter count") {
  for (int64_t c : {4, 16, 32}) {
    ParamStore<float> store;
    Rng rng(0);
    NafBlockParams<float>::make(store, "b", c, rng);
    CHECK(store.count() == naf_block_count(c));
  }
  CHECK(naf_block_count(32) == 8224);
}

TEST_CASE("naf_group") {
  ParamStore<double> store;
  Rng rng(24);
  auto g = NafGroupParams<double>::make(store, "g", 8, rng);
  auto x = random_tensor(Shape{1, 8, 16, 16}, rng);
  CHECK(naf_group(x, g).shape() == x.shape());

  randomize_all(store, rng);
  auto expect = naf_block(naf_block(g.conv1(g.conv3(x)), g.block1), g.block2);
  CHECK(bit_equal(naf_group(x, g), expect));
  auto t = ref_conv1x1(conv2d(x, g.conv3.weight, g.conv3.bias, {.padding = 1}), g.conv1.weight, g.conv1.bias);
  CHECK(max_abs_diff(naf_group(x, g), ref_naf_block(ref_naf_block(t, g.block1), g.block2)) <= 1e-11);

  ParamStore<double> fresh;
  auto z = NafGroupParams<double>::make(fresh, "z", 8, rng);
  z.conv3.zero();
  z.conv1.zero();
  for (double v : test::values(naf_group(x, z))) CHECK(v == 0);
}

TEST_CASE("color map range, zero conv2 and shapes") {
  ParamStore<double> store;
  Rng rng(25);
  auto p = CaParams<double>::make(store, "ca", 8, true, rng, 2.0);
  auto img = random_tensor(Shape{1, 3, 64, 64}, rng, 0, 1);
  auto map = extract_color_map(img, p);
  CHECK(map.shape() == Shape{1, 8, 32, 32});
  for (double v : map.data()) {
    CHECK(v > 0);
    CHECK(v < 1);
  }
  CHECK(bit_equal(color_attention_level1(img, p), map));

  p.conv2.zero();
  for (double v : test::values(extract_color_map(img, p))) CHECK(v == 0.5);
  for (double v : test::values(color_attention_level1(img, p))) CHECK(v == 0.5);
}

TEST_CASE("color attention on injected maps and hand composition") {
  ParamStore<double> store;
  Rng rng(26);
  auto p = CaParams<double>::make(store, "ca", 4, true, rng, 1.5, 3);
  randomize_all(store, rng);
  auto img = random_tensor(Shape{2, 3, 8, 8}, rng, 0, 1);
  auto fs = p.conv3(img);
  CHECK(bit_equal(apply_color_map(img, T4(fs.shape(), 0.0), p), fs));
  CHECK(bit_equal(apply_color_map(img, T4(fs.shape(), 1.0), p), scale(fs, 2.0)));

  auto upper = random_tensor(Shape{2, 3, 16, 16}, rng, 0, 1);
  auto got = color_attention(img, upper, p);
  CHECK(got.shape() == Shape{2, 4, 8, 8});
  // Hand composition: blur, conv1, maxpool, two groups, conv2, sigmoid, then F*M + F.
  auto t = ref_conv1x1(gaussian_blur(upper, 1.5, 3), p.conv1.weight, p.conv1.bias);
  t = max_pool2d(t);
  for (const auto* g : {&p.ng1, &p.ng2}) {
    t = conv2d(t, g->conv3.weight, g->conv3.bias, {.padding = 1});
    t = ref_naf_block(ref_naf_block(ref_conv1x1(t, g->conv1.weight, g->conv1.bias), g->block1), g->block2);
  }
  t = ref_conv1x1(t, p.conv2.weight, p.conv2.bias);
  T4 expect(fs.shape());
  for (int64_t i = 0; i < expect.numel(); ++i) {
    const double m = 1 / (1 + std::exp(-t.data()[i]));
    expect.mutable_data()[i] = fs.data()[i] * m + fs.data()[i];
  }
  CHECK(max_abs_diff(got, expect) <= 1e-6);

  CHECK_THROWS_AS(color_attention(img, img, p), ContractError);
}

TEST_CASE("color map ignores pixel-scale noise") {
  ParamStore<float> store;
  Rng rng(27);
  auto p = CaParams<float>::make(store, "ca", 16, false, rng, 12.0, 24);
  CHECK(p.blur_radius == 24);
  auto img = random_tensor<float>(Shape{1, 3, 64, 64}, rng, 0.2, 0.8);
  img = gaussian_blur(img, 4.0f, 8);
  Tensor<float> noisy = img.clone();
  for (float& v : noisy.mutable_data()) v += static_cast<float>(rng.bernoulli(0.5) ? 0.01 : -0.01);
  CHECK(max_abs_diff(extract_color_map(img, p), extract_color_map(noisy, p)) <= 0.02);
}
