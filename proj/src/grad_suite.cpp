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

#include "cair/grad_suite.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <numeric>

#include "cair/cair_model.hpp"
#include "cair/color_attention.hpp"
#include "cair/inference.hpp"
#include "cair/naf_blocks.hpp"
#include "cair/ops.hpp"
#include "cair/training.hpp"

namespace cair {

namespace {

using TD = Tensor<double>;
using Inputs = std::span<const TD>;
using OpFn = std::function<TD(Inputs)>;

int64_t pick(Rng& r, int64_t lo, int64_t hi) {
  return lo + static_cast<int64_t>(r.below(static_cast<uint64_t>(hi - lo + 1)));
}

TD rand_t(Rng& r, Shape s, double lo = -1, double hi = 1) {
  TD t(std::move(s));
  for (double& v : t.mutable_data()) v = r.uniform(lo, hi);
  return t;
}

Shape rand_shape(Rng& r, int64_t max_c = 3, int64_t min_hw = 2, int64_t max_hw = 6) {
  return Shape{pick(r, 1, 2), pick(r, 1, max_c), pick(r, min_hw, max_hw), pick(r, min_hw, max_hw)};
}

// sum(op(inputs) * w) with a fixed random w, so every output element matters.
GradProblem weighted(std::vector<TD> inputs, OpFn op, Rng& r) {
  TD y;
  {
    NoGradScope<double> no_grad;
    y = op(inputs);
  }
  TD w = rand_t(r, y.shape());
  return {std::move(inputs), [op, w](Inputs in) { return sum(mul(op(in), w)); }};
}

// Values at least `gap` apart in random order, so argmax/clip decisions do not
// flip under the finite-difference step.
TD spaced(Rng& r, Shape s, double lo, double gap) {
  TD t(std::move(s));
  auto d = t.mutable_data();
  std::vector<size_t> order(d.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[r.below(i)]);
  for (size_t i = 0; i < d.size(); ++i) d[order[i]] = lo + gap * static_cast<double>(i);
  return t;
}

GradProblem conv_case(Rng& r, int kernel, int stride, int pad, bool depthwise, int groups) {
  const int64_t n = pick(r, 1, 2);
  const int64_t cin = depthwise ? pick(r, 1, 3) : groups * pick(r, 1, 2);
  const int64_t cout = depthwise ? cin : groups * pick(r, 1, 2);
  const int g = depthwise ? static_cast<int>(cin) : groups;
  const int64_t h = pick(r, kernel, kernel + 4), w = pick(r, kernel, kernel + 4);
  TD x = rand_t(r, Shape{n, cin, h, w});
  TD wt = rand_t(r, Shape{cout, cin / g, kernel, kernel});
  TD b = rand_t(r, Shape{cout});
  const Conv2dOptions opt{.stride = stride, .padding = pad, .groups = g};
  return weighted({x, wt, b}, [opt](Inputs in) { return conv2d(in[0], in[1], in[2], opt); }, r);
}

void randomize(const ParamStore<double>& store, Rng& r, double amp) {
  for (const auto& [name, t] : store.entries()) {
    Tensor<double> h = t;
    for (double& v : h.mutable_data()) v += r.uniform(-amp, amp);
  }
}

std::vector<TD> with_params(std::vector<TD> head, const ParamStore<double>& store) {
  for (const auto& [name, t] : store.entries()) head.push_back(t);
  return head;
}

}  // namespace

std::vector<GradCase> grad_cases() {
  std::vector<GradCase> c;
  c.push_back({"conv2d 3x3 pad 1", [](Rng& r) { return conv_case(r, 3, 1, 1, false, 1); }});
  c.push_back({"conv2d 2x2 stride 2", [](Rng& r) { return conv_case(r, 2, 2, 0, false, 1); }});
  c.push_back({"conv2d 1x1", [](Rng& r) { return conv_case(r, 1, 1, 0, false, 1); }});
  c.push_back({"conv2d depthwise 3x3", [](Rng& r) { return conv_case(r, 3, 1, 1, true, 1); }});
  c.push_back({"conv2d depthwise stride 2", [](Rng& r) { return conv_case(r, 3, 2, 1, true, 1); }});
  c.push_back({"conv2d grouped", [](Rng& r) { return conv_case(r, 3, 1, 0, false, 2); }});
  c.push_back({"layer_norm2d", [](Rng& r) {
                 // Channel offsets keep the per-pixel variance away from zero, where
                 // the curvature swamps central differences.
                 const Shape s{pick(r, 1, 2), pick(r, 2, 4), pick(r, 2, 5), pick(r, 2, 5)};
                 TD x = rand_t(r, s, -0.3, 0.3), g = rand_t(r, Shape{s.c()}), b = rand_t(r, Shape{s.c()});
                 for (int64_t i = 0; i < x.numel(); ++i)
                   x.mutable_data()[static_cast<size_t>(i)] += 0.8 * static_cast<double>((i / (s.h() * s.w())) % s.c());
                 return weighted({x, g, b}, [](Inputs in) { return layer_norm2d(in[0], in[1], in[2]); }, r);
               }});
  c.push_back({"pixel_shuffle", [](Rng& r) {
                 const int64_t q = pick(r, 1, 2);
                 TD x = rand_t(r, Shape{pick(r, 1, 2), 4 * q, pick(r, 1, 3), pick(r, 1, 3)});
                 return weighted({x}, [](Inputs in) { return pixel_shuffle(in[0], 2); }, r);
               }});
  c.push_back({"pixel_unshuffle", [](Rng& r) {
                 TD x = rand_t(r, Shape{pick(r, 1, 2), pick(r, 1, 2), 2 * pick(r, 1, 3), 2 * pick(r, 1, 3)});
                 return weighted({x}, [](Inputs in) { return pixel_unshuffle(in[0], 2); }, r);
               }});
  c.push_back({"max_pool2d", [](Rng& r) {
                 TD x = spaced(r, Shape{pick(r, 1, 2), pick(r, 1, 3), 2 * pick(r, 1, 3), 2 * pick(r, 1, 3)}, -1, 1e-2);
                 return weighted({x}, [](Inputs in) { return max_pool2d(in[0]); }, r);
               }});
  c.push_back({"avg_pool_global", [](Rng& r) {
                 return weighted({rand_t(r, rand_shape(r))}, [](Inputs in) { return avg_pool_global(in[0]); }, r);
               }});
  c.push_back({"avg_pool_local", [](Rng& r) {
                 const int window = static_cast<int>(pick(r, 2, 4));
                 TD x = rand_t(r, Shape{pick(r, 1, 2), pick(r, 1, 3), pick(r, 5, 8), pick(r, 5, 8)});
                 return weighted({x}, [window](Inputs in) { return avg_pool_local(in[0], window); }, r);
               }});
  c.push_back({"gaussian_blur", [](Rng& r) {
                 const double sigma = r.uniform(0.5, 2.0);
                 const int radius = static_cast<int>(pick(r, 1, 4));
                 return weighted({rand_t(r, rand_shape(r))},
                                 [sigma, radius](Inputs in) { return gaussian_blur(in[0], sigma, radius); }, r);
               }});
  c.push_back({"resize_half_area", [](Rng& r) {
                 TD x = rand_t(r, Shape{pick(r, 1, 2), pick(r, 1, 3), 2 * pick(r, 1, 3), 2 * pick(r, 1, 3)});
                 return weighted({x}, [](Inputs in) { return resize_half_area(in[0]); }, r);
               }});
  c.push_back({"add broadcast", [](Rng& r) {
                 const Shape s = rand_shape(r);
                 return weighted({rand_t(r, s), rand_t(r, Shape{1, s.c(), 1, 1})},
                                 [](Inputs in) { return add(in[0], in[1]); }, r);
               }});
  c.push_back({"sub broadcast", [](Rng& r) {
                 const Shape s = rand_shape(r);
                 return weighted({rand_t(r, Shape{s.n(), 1, s.h(), s.w()}), rand_t(r, s)},
                                 [](Inputs in) { return sub(in[0], in[1]); }, r);
               }});
  c.push_back({"mul", [](Rng& r) {
                 const Shape s = rand_shape(r);
                 return weighted({rand_t(r, s), rand_t(r, s)}, [](Inputs in) { return mul(in[0], in[1]); }, r);
               }});
  c.push_back({"mul broadcast", [](Rng& r) {
                 const Shape s = rand_shape(r);
                 return weighted({rand_t(r, s), rand_t(r, Shape{s.n(), s.c(), 1, 1})},
                                 [](Inputs in) { return mul(in[0], in[1]); }, r);
               }});
  c.push_back({"sigmoid", [](Rng& r) {
                 return weighted({rand_t(r, rand_shape(r), -3, 3)}, [](Inputs in) { return sigmoid(in[0]); }, r);
               }});
  c.push_back({"clamp", [](Rng& r) {
                 TD x = spaced(r, rand_shape(r), -0.6051, 0.0213);
                 return weighted({x}, [](Inputs in) { return clamp(in[0], -0.3, 0.4); }, r);
               }});
  c.push_back({"scale", [](Rng& r) {
                 const double f = r.uniform(-2, 2);
                 return weighted({rand_t(r, rand_shape(r))}, [f](Inputs in) { return scale(in[0], f); }, r);
               }});
  c.push_back({"scale_channels", [](Rng& r) {
                 const Shape s = rand_shape(r);
                 return weighted({rand_t(r, s), rand_t(r, Shape{s.c()})},
                                 [](Inputs in) { return scale_channels(in[0], in[1]); }, r);
               }});
  c.push_back({"concat_channels", [](Rng& r) {
                 const Shape s = rand_shape(r);
                 return weighted({rand_t(r, s), rand_t(r, Shape{s.n(), pick(r, 1, 3), s.h(), s.w()})},
                                 [](Inputs in) { return concat_channels(in); }, r);
               }});
  c.push_back({"split_channels", [](Rng& r) {
                 const Shape s{pick(r, 1, 2), pick(r, 2, 5), pick(r, 2, 5), pick(r, 2, 5)};
                 const int64_t first = pick(r, 1, s.c() - 1);
                 return weighted({rand_t(r, s)},
                                 [first](Inputs in) {
                                   const std::array<int64_t, 2> parts{first, in[0].shape().c() - first};
                                   auto pieces = split_channels(in[0], std::span<const int64_t>(parts));
                                   const std::array<TD, 2> swapped{scale(pieces[1], 2.0), pieces[0]};
                                   return concat_channels(std::span<const TD>(swapped));
                                 },
                                 r);
               }});
  c.push_back({"concat_batch", [](Rng& r) {
                 const Shape s = rand_shape(r);
                 return weighted({rand_t(r, s), rand_t(r, s)}, [](Inputs in) { return concat_batch(in); }, r);
               }});
  c.push_back({"sum", [](Rng& r) {
                 return weighted({rand_t(r, rand_shape(r))}, [](Inputs in) { return sum(in[0]); }, r);
               }});
  c.push_back({"mean", [](Rng& r) {
                 return weighted({rand_t(r, rand_shape(r))}, [](Inputs in) { return mean(in[0]); }, r);
               }});
  c.push_back({"rot90", [](Rng& r) {
                 const int k = static_cast<int>(pick(r, 1, 3));
                 return weighted({rand_t(r, rand_shape(r))}, [k](Inputs in) { return rot90(in[0], k); }, r);
               }});
  c.push_back({"flip_w", [](Rng& r) {
                 return weighted({rand_t(r, rand_shape(r))}, [](Inputs in) { return flip_w(in[0]); }, r);
               }});
  c.push_back({"pad_reflect", [](Rng& r) {
                 const int pb = static_cast<int>(pick(r, 0, 3)), pr = static_cast<int>(pick(r, 0, 3));
                 return weighted({rand_t(r, rand_shape(r))},
                                 [pb, pr](Inputs in) { return pad_reflect(in[0], pb, pr); }, r);
               }});
  c.push_back({"crop", [](Rng& r) {
                 const Shape s = rand_shape(r, 3, 3, 6);
                 const int64_t h = pick(r, 1, s.h()), w = pick(r, 1, s.w());
                 const int64_t top = pick(r, 0, s.h() - h), left = pick(r, 0, s.w() - w);
                 return weighted({rand_t(r, s)},
                                 [=](Inputs in) { return crop(in[0], top, left, h, w); }, r);
               }});
  c.push_back({"dihedral transforms", [](Rng& r) {
                 const int code = static_cast<int>(pick(r, 0, 7));
                 return weighted({rand_t(r, rand_shape(r))},
                                 [code](Inputs in) { return dihedral_inverse(dihedral(in[0], code), (code + 1) % 8); }, r);
               }});
  c.push_back({"simple_gate", [](Rng& r) {
                 const Shape s = rand_shape(r);
                 TD x = rand_t(r, Shape{s.n(), 2 * s.c(), s.h(), s.w()});
                 return weighted({x}, [](Inputs in) { return simple_gate(in[0]); }, r);
               }});
  c.push_back({"sca", [](Rng& r) {
                 const Shape s = rand_shape(r, 3, 4, 7);
                 const PoolMode pool = r.bernoulli(0.5) ? PoolMode::local(static_cast<int>(pick(r, 2, 3)))
                                                        : PoolMode::global();
                 TD x = rand_t(r, s);
                 TD w = rand_t(r, Shape{s.c(), s.c(), 1, 1}), b = rand_t(r, Shape{s.c()});
                 return weighted({x, w, b},
                                 [pool](Inputs in) {
                                   Conv2d<double> conv{in[1], in[2], {}};
                                   return sca(in[0], conv, pool);
                                 },
                                 r);
               }});
  c.push_back({"naf_block", [](Rng& r) {
                 auto store = std::make_shared<ParamStore<double>>();
                 const int64_t ch = 2 * pick(r, 2, 3);
                 auto params = std::make_shared<NafBlockParams<double>>(
                     NafBlockParams<double>::make(*store, "b", ch, r));
                 randomize(*store, r, 0.5);
                 const PoolMode pool = r.bernoulli(0.5) ? PoolMode::local(3) : PoolMode::global();
                 const Shape s{pick(r, 1, 2), ch, pick(r, 3, 6), pick(r, 3, 6)};
                 TD x = rand_t(r, s, -0.3, 0.3);
                 for (int64_t i = 0; i < x.numel(); ++i)
                   x.mutable_data()[static_cast<size_t>(i)] += 0.8 * static_cast<double>((i / (s.h() * s.w())) % ch);
                 return weighted(with_params({x}, *store),
                                 [store, params, pool](Inputs in) { return naf_block(in[0], *params, pool); }, r);
               }});
  c.push_back({"color_attention", [](Rng& r) {
                 auto store = std::make_shared<ParamStore<double>>();
                 auto params = std::make_shared<CaParams<double>>(
                     CaParams<double>::make(*store, "ca", 4, true, r, r.uniform(0.5, 2.0), 2));
                 randomize(*store, r, 0.5);
                 const int64_t h = 2 * pick(r, 2, 3), w = 2 * pick(r, 2, 3);
                 TD upper = rand_t(r, Shape{1, 3, 2 * h, 2 * w}, 0, 1);
                 TD lower = rand_t(r, Shape{1, 3, h, w}, 0, 1);
                 return weighted(with_params({lower, upper}, *store),
                                 [store, params](Inputs in) { return color_attention(in[0], in[1], *params); }, r);
               }});
  c.push_back({"psnr_loss", [](Rng& r) {
                 const Shape s = rand_shape(r);
                 TD pred = rand_t(r, s, 0, 1), target = rand_t(r, s, 0, 1);
                 return GradProblem{{pred, target}, [](Inputs in) { return psnr_loss(in[0], in[1]); }};
               }});
  c.push_back({"ensemble net", [](Rng& r) {
                 auto net = std::make_shared<EnsembleNet<double>>(EnsembleConfig{2, 4, 1}, r.next_u64());
                 randomize(net->store(), r, 0.3);
                 TD x = rand_t(r, Shape{1, 6, 5, 5}, 0, 1);
                 return weighted(with_params({x}, net->store()),
                                 [net](Inputs in) { return net->forward_stacked(in[0]); }, r);
               },
               true});
  c.push_back({"tiny CAIR-M (l=2, w=4, 16x16)", [](Rng& r) {
                 CairConfig cfg;
                 cfg.levels = 2;
                 cfg.width = 4;
                 cfg.blocks = {1, 1, 1};
                 cfg.variant = Variant::kM;
                 auto model = std::make_shared<CairModel<double>>(cfg, r.next_u64());
                 randomize(model->store(), r, 0.3);
                 TD img = rand_t(r, Shape{1, 3, 16, 16}, 0, 1);
                 return weighted(with_params({img}, model->store()),
                                 [model](Inputs in) { return model->forward(in[0]); }, r);
               },
               true});
  return c;
}

std::vector<GradCaseResult> run_grad_suite(int seeds, uint64_t base_seed,
                                           const std::function<void(const GradCaseResult&)>& on_case) {
  std::vector<GradCaseResult> results;
  uint64_t stream = 0;
  for (const GradCase& gc : grad_cases()) {
    GradCaseResult res{gc.name, 0, 0};
    const int runs = gc.single_seed ? 1 : seeds;
    for (int s = 0; s < runs; ++s) {
      Rng rng = Rng::derive(base_seed, stream * 1000 + static_cast<uint64_t>(s));
      GradProblem p = gc.make(rng);
      res.worst = std::max(res.worst, grad_check(p.fn, p.inputs).worst());
      ++res.seeds;
    }
    ++stream;
    if (on_case) on_case(res);
    results.push_back(res);
  }
  return results;
}

}  // namespace cair
