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

#include "cair/filtersim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cair/image_io.hpp"
#include "cair/parallel.hpp"
#include "cair/random.hpp"

namespace cair {

void FilterSpec::validate() const {
  for (double g : gamma) require(g > 0, "filter '" + name + "': gamma must be positive");
  require(saturation >= 0, "filter '" + name + "': saturation must be non-negative");
  require(vignette >= 0 && vignette <= 1, "filter '" + name + "': vignette must lie in [0,1]");
  for (int k = 0; k < kToneKnots; ++k) {
    const double v = tone[static_cast<size_t>(k)];
    require(v >= 0 && v <= 1, "filter '" + name + "': tone values must lie in [0,1]");
    if (k > 0)
      require(v > tone[static_cast<size_t>(k - 1)],
              "filter '" + name + "': tone curve must be strictly increasing");
  }
}

double FilterSpec::tone_at(double v) const {
  const double x = std::clamp(v, 0.0, 1.0) * (kToneKnots - 1);
  const int k = std::min(static_cast<int>(x), kToneKnots - 2);
  const double t = x - k;
  return tone[static_cast<size_t>(k)] * (1 - t) + tone[static_cast<size_t>(k + 1)] * t;
}

Tensor<float> apply_filter(const Tensor<float>& img, const FilterSpec& spec) {
  spec.validate();
  const Shape& s = img.shape();
  require(s.rank() == 4 && s.c() == 3, "apply_filter: expected [N,3,H,W], got " + s.str());
  const int64_t h = s.h(), w = s.w(), plane = h * w;
  Tensor<float> out = Tensor<float>::empty(s);
  const auto src = img.data();
  auto dst = out.mutable_data();
  const double cy = 0.5 * static_cast<double>(h - 1), cx = 0.5 * static_cast<double>(w - 1);
  const double rmax2 = std::max(cy * cy + cx * cx, 1e-12);
  const auto& m = spec.matrix;
  for (int64_t n = 0; n < s.n(); ++n) {
    const size_t base = static_cast<size_t>(n * 3 * plane);
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        const size_t i = static_cast<size_t>(y * w + x);
        const double in[3] = {src[base + i], src[base + plane + i], src[base + 2 * plane + i]};
        double v[3];
        for (int c = 0; c < 3; ++c) {
          v[c] = m[c * 3] * in[0] + m[c * 3 + 1] * in[1] + m[c * 3 + 2] * in[2] + spec.offset[c];
          v[c] = std::pow(std::clamp(v[c], 0.0, 1.0), spec.gamma[c]);
        }
        const double luma = 0.299 * v[0] + 0.587 * v[1] + 0.114 * v[2];
        const double dy = y - cy, dx = x - cx;
        const double falloff = 1.0 - spec.vignette * (dy * dy + dx * dx) / rmax2;
        for (int c = 0; c < 3; ++c) {
          const double sat = luma + spec.saturation * (v[c] - luma);
          const double toned = spec.tone_at(sat) * falloff;
          dst[base + static_cast<size_t>(c) * static_cast<size_t>(plane) + i] =
              static_cast<float>(std::clamp(toned, 0.0, 1.0));
        }
      }
  }
  return out;
}

const std::vector<FilterSpec>& builtin_filters() {
  static const std::vector<FilterSpec> presets = [] {
    std::vector<FilterSpec> f;
    {
      FilterSpec s;
      s.name = "warm-fade";
      s.matrix = {0.92, 0.06, 0.0, 0.0, 0.86, 0.0, 0.0, 0.04, 0.72};
      s.offset = {0.08, 0.06, 0.04};
      s.gamma = {0.9, 1.0, 1.12};
      s.saturation = 0.8;
      s.vignette = 0.1;
      s.tone = {0.08, 0.21, 0.34, 0.47, 0.59, 0.70, 0.80, 0.90};
      f.push_back(s);
    }
    {
      FilterSpec s;
      s.name = "cool-crush";
      s.matrix = {0.82, 0.0, 0.04, 0.0, 0.94, 0.04, 0.0, 0.06, 1.0};
      s.offset = {0.0, 0.02, 0.07};
      s.gamma = {1.2, 1.1, 1.0};
      s.saturation = 0.9;
      s.vignette = 0.15;
      s.tone = {0.0, 0.04, 0.13, 0.28, 0.47, 0.66, 0.84, 0.97};
      f.push_back(s);
    }
    {
      FilterSpec s;
      s.name = "high-contrast";
      s.saturation = 1.3;
      s.tone = {0.0, 0.05, 0.17, 0.38, 0.62, 0.83, 0.95, 1.0};
      f.push_back(s);
    }
    {
      FilterSpec s;
      s.name = "sepia-drift";
      s.matrix = {0.55, 0.38, 0.08, 0.20, 0.64, 0.07, 0.11, 0.32, 0.46};
      s.offset = {0.03, 0.01, 0.0};
      s.saturation = 0.85;
      s.vignette = 0.12;
      s.tone = {0.03, 0.16, 0.30, 0.44, 0.58, 0.72, 0.85, 0.96};
      f.push_back(s);
    }
    {
      FilterSpec s;
      s.name = "teal-orange";
      s.matrix = {1.08, -0.04, -0.04, -0.02, 0.98, 0.04, -0.06, 0.08, 0.92};
      s.offset = {0.02, 0.0, 0.05};
      s.gamma = {0.95, 1.0, 1.08};
      s.saturation = 1.25;
      s.tone = {0.0, 0.1, 0.24, 0.40, 0.58, 0.75, 0.89, 0.99};
      f.push_back(s);
    }
    {
      FilterSpec s;
      s.name = "washout";
      s.matrix = {0.68, 0.0, 0.0, 0.0, 0.68, 0.0, 0.0, 0.0, 0.68};
      s.offset = {0.22, 0.22, 0.2};
      s.saturation = 0.55;
      s.tone = {0.06, 0.2, 0.33, 0.46, 0.59, 0.72, 0.84, 0.95};
      f.push_back(s);
    }
    {
      FilterSpec s;
      s.name = "vignette-heavy";
      s.matrix = {1.0, 0.0, 0.0, 0.0, 0.96, 0.0, 0.0, 0.0, 0.88};
      s.offset = {0.02, 0.01, 0.0};
      s.gamma = {1.1, 1.1, 1.15};
      s.vignette = 0.6;
      f.push_back(s);
    }
    {
      FilterSpec s;
      s.name = "green-tint";
      s.matrix = {0.88, 0.1, 0.0, 0.04, 1.0, 0.04, 0.0, 0.12, 0.82};
      s.offset = {0.0, 0.05, 0.0};
      s.gamma = {1.0, 0.88, 1.05};
      s.saturation = 1.1;
      s.tone = {0.02, 0.15, 0.29, 0.43, 0.57, 0.71, 0.85, 0.98};
      f.push_back(s);
    }
    for (const auto& s : f) s.validate();
    return f;
  }();
  return presets;
}

const FilterSpec& find_filter(const std::string& name) {
  for (const auto& f : builtin_filters())
    if (f.name == name) return f;
  throw ContractError("unknown filter '" + name + "'");
}

Tensor<float> synthetic_image(int64_t height, int64_t width, uint64_t seed) {
  require(height >= 1 && width >= 1, "synthetic_image: extents must be positive");
  Rng rng(seed);
  const int64_t plane = height * width;
  std::vector<double> img(static_cast<size_t>(3 * plane));
  auto color = [&] {
    return std::array<double, 3>{rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
  };
  // Bilinear blend of four corner colors.
  const auto c00 = color(), c01 = color(), c10 = color(), c11 = color();
  for (int64_t y = 0; y < height; ++y)
    for (int64_t x = 0; x < width; ++x) {
      const double ty = height > 1 ? static_cast<double>(y) / static_cast<double>(height - 1) : 0;
      const double tx = width > 1 ? static_cast<double>(x) / static_cast<double>(width - 1) : 0;
      for (size_t c = 0; c < 3; ++c)
        img[c * static_cast<size_t>(plane) + static_cast<size_t>(y * width + x)] =
            (1 - ty) * ((1 - tx) * c00[c] + tx * c01[c]) + ty * ((1 - tx) * c10[c] + tx * c11[c]);
    }
  // Low-frequency color waves.
  const int waves = 2 + static_cast<int>(rng.below(3));
  for (int k = 0; k < waves; ++k) {
    const double fy = rng.uniform(0.5, 3.0) * 6.283185307179586 / static_cast<double>(height);
    const double fx = rng.uniform(0.5, 3.0) * 6.283185307179586 / static_cast<double>(width);
    const double phase = rng.uniform(0, 6.283185307179586);
    const std::array<double, 3> amp{rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12)};
    for (int64_t y = 0; y < height; ++y)
      for (int64_t x = 0; x < width; ++x) {
        const double v = std::sin(fy * static_cast<double>(y) + fx * static_cast<double>(x) + phase);
        for (size_t c = 0; c < 3; ++c)
          img[c * static_cast<size_t>(plane) + static_cast<size_t>(y * width + x)] += amp[c] * v;
      }
  }
  // Soft-edged discs and boxes.
  const int shapes = 4 + static_cast<int>(rng.below(5));
  const double extent = static_cast<double>(std::min(height, width));
  for (int k = 0; k < shapes; ++k) {
    const bool disc = rng.bernoulli(0.5);
    const double cy = rng.uniform(0, static_cast<double>(height));
    const double cx = rng.uniform(0, static_cast<double>(width));
    const double ry = rng.uniform(0.08, 0.3) * extent;
    const double rx = disc ? ry : rng.uniform(0.08, 0.3) * extent;
    const double alpha = rng.uniform(0.6, 1.0);
    const auto col = color();
    for (int64_t y = 0; y < height; ++y)
      for (int64_t x = 0; x < width; ++x) {
        const double dy = (static_cast<double>(y) - cy) / ry, dx = (static_cast<double>(x) - cx) / rx;
        const double d = disc ? std::sqrt(dy * dy + dx * dx) : std::max(std::abs(dy), std::abs(dx));
        const double a = alpha * std::clamp((1.0 - d) * 4.0, 0.0, 1.0);
        if (a <= 0) continue;
        for (size_t c = 0; c < 3; ++c) {
          double& p = img[c * static_cast<size_t>(plane) + static_cast<size_t>(y * width + x)];
          p = (1 - a) * p + a * col[c];
        }
      }
  }
  // Fine texture.
  for (double& v : img) v = std::clamp(v + 0.02 * rng.normal(), 0.0, 1.0);
  Tensor<float> out = Tensor<float>::empty(Shape{1, 3, height, width});
  std::transform(img.begin(), img.end(), out.mutable_data().begin(),
                 [](double v) { return static_cast<float>(v); });
  return out;
}

void DatasetIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& e : entries)
    out << e.original << '\t' << e.filtered << '\t' << e.filter_name << '\t' << e.split << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

DatasetIndex DatasetIndex::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  DatasetIndex index;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 4)
      throw IoError("'" + path + "' line " + std::to_string(lineno) + ": expected 4 tab-separated fields");
    if (fields[3] != "train" && fields[3] != "val" && fields[3] != "test")
      throw IoError("'" + path + "' line " + std::to_string(lineno) + ": unknown split '" + fields[3] + "'");
    index.entries.push_back({fields[0], fields[1], fields[2], fields[3]});
  }
  return index;
}

DatasetIndex generate_corpus(const std::vector<std::pair<std::string, Tensor<float>>>& sources,
                             const std::vector<FilterSpec>& filters, const std::string& out_dir,
                             const CorpusOptions& opts) {
  require(opts.val_fraction >= 0 && opts.test_fraction >= 0 &&
              opts.val_fraction + opts.test_fraction <= 1,
          "generate_corpus: split fractions must be non-negative and sum to at most 1");
  std::filesystem::create_directories(out_dir);
  const size_t n = sources.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(opts.seed);
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_test = static_cast<size_t>(std::lround(opts.test_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<size_t>(std::lround(opts.val_fraction * static_cast<double>(n)));
  std::vector<std::string> split(n, "train");
  for (size_t i = 0; i < n; ++i) {
    if (i < n_test) split[order[i]] = "test";
    else if (i < n_test + n_val) split[order[i]] = "val";
  }

  const std::filesystem::path dir(out_dir);
  parallel_for(static_cast<int64_t>(n), [&](int64_t i) {
    const auto& [stem, img] = sources[static_cast<size_t>(i)];
    save_png((dir / (stem + ".png")).string(), img);
    for (const auto& f : filters)
      save_png((dir / (stem + "__" + f.name + ".png")).string(), apply_filter(img, f));
  });

  DatasetIndex index;
  for (size_t i = 0; i < n; ++i)
    for (const auto& f : filters)
      index.entries.push_back({sources[i].first + ".png", sources[i].first + "__" + f.name + ".png",
                               f.name, split[i]});
  index.save((dir / "index.tsv").string());
  return index;
}

std::vector<ImagePair<float>> load_pairs(const DatasetIndex& index, const std::string& root,
                                         const std::string& split) {
  const std::filesystem::path dir(root);
  std::vector<ImagePair<float>> pairs;
  for (const auto& e : index.entries) {
    if (e.split != split) continue;
    Tensor<float> filtered = load_image((dir / e.filtered).string());
    Tensor<float> original = load_image((dir / e.original).string());
    require(filtered.shape() == original.shape(),
            "pair '" + e.filtered + "': shape differs from its original");
    pairs.push_back({filtered, original});
  }
  return pairs;
}

}  // namespace cair
