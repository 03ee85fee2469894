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

#include <algorithm>
#include <array>

namespace cair {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kS: return "S";
    case Variant::kM: return "M";
    case Variant::kPlain: return "plain";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "S" || s == "s") return Variant::kS;
  if (s == "M" || s == "m") return Variant::kM;
  if (s == "plain" || s == "nafnet") return Variant::kPlain;
  throw ContractError("unknown variant '" + s + "' (expected S, M or plain)");
}

void CairConfig::validate() const {
  require(levels >= 2, "config: levels must be at least 2, got " + std::to_string(levels));
  require(levels <= 12, "config: levels must be at most 12");
  require(width >= 1, "config: width must be positive");
  require(ca_width >= 0, "config: ca_width must be non-negative");
  require(static_cast<int>(blocks.size()) == 2 * levels - 1,
          "config: expected " + std::to_string(2 * levels - 1) + " block counts, got " +
              std::to_string(blocks.size()));
  for (int b : blocks) require(b >= 0, "config: block counts must be non-negative");
  require(blur_sigma > 0, "config: blur_sigma must be positive");
  require(blur_radius >= 0, "config: blur_radius must be non-negative");
  if (tlsc_window) require(*tlsc_window >= 1, "config: tlsc_window must be positive");
}

template <typename T>
std::vector<Tensor<T>> build_pyramid(const Tensor<T>& img, int levels) {
  require(levels >= 1, "build_pyramid: levels must be positive");
  const Shape& s = img.shape();
  const int64_t multiple = int64_t{1} << (levels - 1);
  require(s.rank() == 4 && s.h() % multiple == 0 && s.w() % multiple == 0,
          "build_pyramid: extents of " + s.str() + " must be multiples of " +
              std::to_string(multiple));
  std::vector<Tensor<T>> pyramid{img};
  for (int k = 1; k < levels; ++k) pyramid.push_back(resize_half_area(pyramid.back()));
  return pyramid;
}

template <typename T>
CairModel<T>::CairModel(CairConfig config, uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const int levels = config_.levels;
  const int64_t cw = config_.color_width();
  const bool with_ca1 = config_.variant != Variant::kPlain;
  const bool with_ca = config_.variant == Variant::kM;
  auto& p = params_;
  auto& st = store_;

  p.intro = Conv2d<T>::make(st, "intro", 3, config_.width, 3, rng, {.stride = 1, .padding = 1, .groups = 1});
  if (with_ca1)
    p.ca1 = CaParams<T>::make(st, "ca1", cw, false, rng, config_.blur_sigma, config_.blur_radius);
  for (int k = 1; k <= levels; ++k) {
    const int64_t c = config_.level_width(k);
    if (k >= 2) {
      p.down.push_back(Conv2d<T>::make(st, "down" + std::to_string(k - 1), c / 2, c, 2, rng,
                                       {.stride = 2, .padding = 0, .groups = 1}));
      if (with_ca) {
        p.ca.push_back(CaParams<T>::make(st, "ca" + std::to_string(k), cw, true, rng,
                                         config_.blur_sigma, config_.blur_radius));
        p.fuse.push_back(Conv2d<T>::make(st, "fuse" + std::to_string(k), c + cw, c, 1, rng));
      }
    }
    std::vector<NafBlockParams<T>> blocks;
    for (int b = 0; b < config_.blocks[static_cast<size_t>(k - 1)]; ++b)
      blocks.push_back(NafBlockParams<T>::make(
          st, "enc" + std::to_string(k) + ".block" + std::to_string(b), c, rng));
    p.encoder.push_back(std::move(blocks));
  }
  // Decoder, coarsest first: level k uses block count index 2l - k.
  p.up.resize(static_cast<size_t>(levels - 1));
  p.decoder.resize(static_cast<size_t>(levels - 1));
  for (int k = levels - 1; k >= 1; --k) {
    const int64_t c = config_.level_width(k);
    p.up[static_cast<size_t>(k - 1)] =
        Conv2d<T>::make(st, "up" + std::to_string(k), 2 * c, 4 * c, 1, rng, {}, false);
    std::vector<NafBlockParams<T>> blocks;
    for (int b = 0; b < config_.blocks[static_cast<size_t>(2 * levels - k - 1)]; ++b)
      blocks.push_back(NafBlockParams<T>::make(
          st, "dec" + std::to_string(k) + ".block" + std::to_string(b), c, rng));
    p.decoder[static_cast<size_t>(k - 1)] = std::move(blocks);
  }
  if (with_ca1) {
    p.color_up = Conv2d<T>::make(st, "color_up", cw, 4 * cw, 1, rng);
    p.color_proj = Conv2d<T>::make(st, "color_proj", cw, config_.width, 1, rng);
  }
  p.ending = Conv2d<T>::make(st, "ending", config_.width, 3, 3, rng, {.stride = 1, .padding = 1, .groups = 1});
}

namespace {

template <typename T>
Tensor<T> run_blocks(Tensor<T> x, const std::vector<NafBlockParams<T>>& blocks, PoolMode pool) {
  for (const auto& b : blocks) x = naf_block(x, b, pool);
  return x;
}

template <typename T>
Tensor<T> zeros_like_shape(const Shape& s) {
  return Tensor<T>(s);
}

}  // namespace

template <typename T>
Tensor<T> CairModel<T>::forward(const Tensor<T>& img, const ForwardOptions& opts) const {
  return forward_as(config_.variant, img, opts);
}

template <typename T>
Tensor<T> CairModel<T>::forward_as(Variant variant, const Tensor<T>& input,
                                   const ForwardOptions& opts) const {
  const Shape& s = input.shape();
  require(s.rank() == 4 && s.c() == 3, "forward: expected [N,3,H,W], got " + s.str());
  const auto& p = params_;
  const bool use_ca1 = variant != Variant::kPlain;
  const bool use_ca = variant == Variant::kM;
  require(!use_ca1 || p.ca1.has_value(), "forward: weights lack the level-1 color attention");
  require(!use_ca || p.ca.size() == static_cast<size_t>(config_.levels - 1),
          "forward: weights lack per-level color attention");

  const int64_t multiple = config_.size_multiple();
  const int64_t pad_h = (multiple - s.h() % multiple) % multiple;
  const int64_t pad_w = (multiple - s.w() % multiple) % multiple;
  Tensor<T> img = input;
  if (pad_h || pad_w) img = pad_reflect(input, static_cast<int>(pad_h), static_cast<int>(pad_w));
  const int64_t height = img.shape().h();

  // TLSC windows scale with each level's resolution.
  auto pool_at = [&](int level) {
    if (!opts.tlsc_window) return PoolMode::global();
    const int64_t feat = height >> (level - 1);
    const int64_t w = std::max<int64_t>(1, static_cast<int64_t>(*opts.tlsc_window) * feat / height);
    return PoolMode::local(static_cast<int>(std::min<int64_t>(w, 1 << 30)));
  };

  const int levels = config_.levels;
  std::vector<Tensor<T>> pyramid =
      use_ca ? build_pyramid(img, levels) : std::vector<Tensor<T>>{img};

  std::vector<Tensor<T>> encoded;
  Tensor<T> x = p.intro(img);
  x = run_blocks(x, p.encoder[0], pool_at(1));
  check_finite(x, "encoder level 1");
  encoded.push_back(x);
  for (int k = 2; k <= levels; ++k) {
    x = p.down[static_cast<size_t>(k - 2)](encoded.back());
    if (use_ca) {
      Tensor<T> color;
      if (opts.zero_color) {
        Shape cs = x.shape();
        color = zeros_like_shape<T>(Shape{cs.n(), config_.color_width(), cs.h(), cs.w()});
      } else {
        color = color_attention(pyramid[static_cast<size_t>(k - 1)],
                                pyramid[static_cast<size_t>(k - 2)],
                                p.ca[static_cast<size_t>(k - 2)], pool_at(k));
      }
      check_finite(color, "color attention level " + std::to_string(k));
      const std::array<Tensor<T>, 2> parts{x, color};
      x = p.fuse[static_cast<size_t>(k - 2)](concat_channels(std::span<const Tensor<T>>(parts)));
    }
    x = run_blocks(x, p.encoder[static_cast<size_t>(k - 1)], pool_at(k));
    check_finite(x, "encoder level " + std::to_string(k));
    encoded.push_back(x);
  }

  Tensor<T> decoded = encoded.back();
  for (int k = levels - 1; k >= 1; --k) {
    Tensor<T> up = pixel_shuffle(p.up[static_cast<size_t>(k - 1)](decoded), 2);
    decoded = run_blocks(add(encoded[static_cast<size_t>(k - 1)], up),
                         p.decoder[static_cast<size_t>(k - 1)], pool_at(k));
    check_finite(decoded, "decoder level " + std::to_string(k));
  }

  if (use_ca1 && !opts.zero_color) {
    Tensor<T> map = color_attention_level1(img, *p.ca1, pool_at(1));
    check_finite(map, "color attention level 1");
    Tensor<T> skip = p.color_proj(pixel_shuffle(p.color_up(map), 2));
    decoded = add(decoded, skip);
  }

  Tensor<T> out = add(img, p.ending(decoded));
  check_finite(out, "output");
  if (pad_h || pad_w) out = crop(out, 0, 0, s.h(), s.w());
  return out;
}

int64_t count_params(const CairConfig& config) {
  return CairModel<float>(config, 0).store().count();
}

#define CAIR_INSTANTIATE(T)                                                         \
  template class CairModel<T>;                                                      \
  template std::vector<Tensor<T>> build_pyramid(const Tensor<T>&, int);

CAIR_INSTANTIATE(float)
CAIR_INSTANTIATE(double)
#undef CAIR_INSTANTIATE

}  // namespace cair
