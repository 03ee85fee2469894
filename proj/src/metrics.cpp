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

#include "cair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cair/ops.hpp"

namespace cair {

namespace {

double to_byte(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0); }

constexpr int kSsimRadius = 5;
constexpr double kSsimSigma = 1.5;

// Separable valid-mode Gaussian filter of one plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int64_t h, int64_t w,
                                 const std::vector<double>& k) {
  const int64_t taps = static_cast<int64_t>(k.size());
  const int64_t oh = h - taps + 1, ow = w - taps + 1;
  std::vector<double> rows(static_cast<size_t>(h * ow));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int64_t t = 0; t < taps; ++t)
        acc += k[static_cast<size_t>(t)] * plane[static_cast<size_t>(y * w + x + t)];
      rows[static_cast<size_t>(y * ow + x)] = acc;
    }
  std::vector<double> out(static_cast<size_t>(oh * ow));
  for (int64_t y = 0; y < oh; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int64_t t = 0; t < taps; ++t)
        acc += k[static_cast<size_t>(t)] * rows[static_cast<size_t>((y + t) * ow + x)];
      out[static_cast<size_t>(y * ow + x)] = acc;
    }
  return out;
}

}  // namespace

template <typename T>
double psnr(const Tensor<T>& x, const Tensor<T>& y, PsnrDomain domain) {
  require(x.shape() == y.shape(),
          "psnr: shapes " + x.shape().str() + " and " + y.shape().str() + " differ");
  require(x.numel() > 0, "psnr: empty images");
  const auto xd = x.data();
  const auto yd = y.data();
  double acc = 0;
  for (size_t i = 0; i < xd.size(); ++i) {
    double a = static_cast<double>(xd[i]), b = static_cast<double>(yd[i]);
    if (domain == PsnrDomain::kByte) {
      a = to_byte(a);
      b = to_byte(b);
    }
    acc += (a - b) * (a - b);
  }
  const double mse = acc / static_cast<double>(xd.size());
  if (mse == 0) return kPsnrSentinel;
  const double peak = domain == PsnrDomain::kByte ? 255.0 : 1.0;
  return std::min(kPsnrSentinel, 10.0 * std::log10(peak * peak / mse));
}

template <typename T>
double ssim(const Tensor<T>& x, const Tensor<T>& y) {
  require(x.shape() == y.shape(),
          "ssim: shapes " + x.shape().str() + " and " + y.shape().str() + " differ");
  const Shape& s = x.shape();
  require(s.rank() == 4, "ssim: expected [N,C,H,W]");
  const int64_t h = s.h(), w = s.w();
  const int taps = 2 * kSsimRadius + 1;
  require(h >= taps && w >= taps, "ssim: images must be at least 11x11, got " + s.str());
  const std::vector<double> k = gaussian_kernel1d(kSsimSigma, kSsimRadius);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int64_t plane = h * w;
  double total = 0;
  for (int64_t p = 0; p < s.n() * s.c(); ++p) {
    const auto count = static_cast<size_t>(plane);
    std::vector<double> a(count), b(count), aa(count), bb(count), ab(count);
    for (int64_t i = 0; i < plane; ++i) {
      const auto j = static_cast<size_t>(i);
      a[j] = static_cast<double>(x.data()[static_cast<size_t>(p * plane + i)]);
      b[j] = static_cast<double>(y.data()[static_cast<size_t>(p * plane + i)]);
      aa[j] = a[j] * a[j];
      bb[j] = b[j] * b[j];
      ab[j] = a[j] * b[j];
    }
    const auto mu_a = filter_valid(a, h, w, k), mu_b = filter_valid(b, h, w, k);
    const auto e_aa = filter_valid(aa, h, w, k), e_bb = filter_valid(bb, h, w, k);
    const auto e_ab = filter_valid(ab, h, w, k);
    double acc = 0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
      const double va = e_aa[i] - mu_a[i] * mu_a[i];
      const double vb = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      acc += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    total += acc / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(s.n() * s.c());
}

void MetricReport::add(double psnr_unit, double psnr_byte, double ssim_value) {
  const double n = static_cast<double>(++n_images);
  sum_psnr_ += psnr_unit;
  sum_psnr255_ += psnr_byte;
  sum_ssim_ += ssim_value;
  psnr_db = sum_psnr_ / n;
  psnr255_db = sum_psnr255_ / n;
  ssim = sum_ssim_ / n;
}

#define CAIR_INSTANTIATE(T)                                                         \
  template double psnr(const Tensor<T>&, const Tensor<T>&, PsnrDomain);             \
  template double ssim(const Tensor<T>&, const Tensor<T>&);

CAIR_INSTANTIATE(float)
CAIR_INSTANTIATE(double)
#undef CAIR_INSTANTIATE

}  // namespace cair
