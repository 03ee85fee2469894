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
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cair;
using test::psnr_oracle;
using test::random_tensor;
using test::ssim_oracle;

TEST_CASE("psnr closed forms") {
  Rng rng(60);
  auto x = random_tensor(Shape{1, 3, 8, 8}, rng, 0.2, 0.8);
  CHECK(psnr(x, x) == kPsnrSentinel);
  CHECK(psnr(x, x, PsnrDomain::kByte) == kPsnrSentinel);
  Tensor<double> y = x.clone();
  for (int64_t i = 0; i < y.numel(); ++i) y.mutable_data()[static_cast<size_t>(i)] += i % 2 ? 0.1 : -0.1;
  CHECK(std::abs(psnr(x, y) - 20.0) <= 1e-9);
  CHECK(psnr(Tensor<double>(Shape{1, 1, 2, 2}, 0.5), Tensor<double>(Shape{1, 1, 2, 2}, 0.5 + 1e-9)) ==
        kPsnrSentinel);
  CHECK_THROWS_AS(psnr(x, random_tensor(Shape{1, 3, 8, 9}, rng)), ContractError);
}

TEST_CASE("psnr and ssim match brute-force oracles on 20 random pairs") {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t h = 11 + static_cast<int64_t>(rng.below(10)), w = 11 + static_cast<int64_t>(rng.below(10));
    auto x = random_tensor(Shape{1 + static_cast<int64_t>(rng.below(2)), 3, h, w}, rng, 0, 1);
    Tensor<double> y = x.clone();
    const double amp = rng.uniform(0.01, 0.4);
    for (double& v : y.mutable_data()) v = std::clamp(v + rng.uniform(-amp, amp), 0.0, 1.0);
    CHECK(std::abs(psnr(x, y) - psnr_oracle(x, y, false)) <= 1e-9);
    CHECK(std::abs(psnr(x, y, PsnrDomain::kByte) - psnr_oracle(x, y, true)) <= 1e-9);
    CHECK(std::abs(ssim(x, y) - ssim_oracle(x, y)) <= 1e-6);
    CHECK(psnr(x, y) == psnr(y, x));
    CHECK(std::abs(ssim(x, y) - ssim(y, x)) <= 1e-15);
  }
}

TEST_CASE("ssim identities") {
  Rng rng(62);
  auto x = random_tensor(Shape{2, 3, 16, 12}, rng, 0, 1);
  CHECK(ssim(x, x) == 1.0);
  Tensor<double> binary(Shape{1, 1, 16, 16}), inverse(Shape{1, 1, 16, 16});
  for (int64_t i = 0; i < binary.numel(); ++i) {
    const double b = rng.bernoulli(0.5) ? 1.0 : 0.0;
    binary.mutable_data()[static_cast<size_t>(i)] = b;
    inverse.mutable_data()[static_cast<size_t>(i)] = 1 - b;
  }
  CHECK(ssim(binary, inverse) <= 0);
  CHECK_THROWS_AS(ssim(random_tensor(Shape{1, 3, 10, 20}, rng), random_tensor(Shape{1, 3, 10, 20}, rng)),
                  ContractError);
}

TEST_CASE("psnr falls as noise grows") {
  Rng rng(63);
  auto x = random_tensor(Shape{1, 3, 16, 16}, rng, 0.35, 0.65);
  std::vector<double> sign;
  for (int64_t i = 0; i < x.numel(); ++i) sign.push_back(rng.uniform(-1, 1));
  double prev = kPsnrSentinel + 1;
  for (double amp = 0.01; amp <= 0.3 + 1e-12; amp += 0.01) {
    Tensor<double> y = x.clone();
    for (int64_t i = 0; i < y.numel(); ++i) y.mutable_data()[static_cast<size_t>(i)] += amp * sign[static_cast<size_t>(i)];
    const double p = psnr(x, y);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("metric report holds per-image means") {
  MetricReport r;
  r.add(20, 21, 0.5);
  r.add(30, 29, 0.7);
  r.add(40, 40, 0.9);
  CHECK(r.n_images == 3);
  CHECK(r.psnr_db == doctest::Approx(30));
  CHECK(r.psnr255_db == doctest::Approx(30));
  CHECK(r.ssim == doctest::Approx(0.7));
}
