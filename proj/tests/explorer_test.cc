// Copyright 2026 The CDI Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <limits>

#include "cdi/error.h"
#include "cdi/explorer.h"
#include "doctest.h"
#include "testkit.h"

namespace cdi {
namespace {

double Loss(const ImageBuffer& xhat, const ImageBuffer& y, const Kernel2D& k,
            const ImageBuffer& anchor, double lambda_reg) {
  const ImageBuffer c = Convolve(xhat, k);
  double data = 0, reg = 0;
  for (size_t i = 0; i < c.size(); ++i) {
    data += (c.data()[i] - y.data()[i]) * (c.data()[i] - y.data()[i]);
    reg += (xhat.data()[i] - anchor.data()[i]) * (xhat.data()[i] - anchor.data()[i]);
  }
  return data + lambda_reg * reg;
}

TEST_CASE("loss matches its definition") {
  const ImageBuffer x = testkit::RandomImage(12, 10, 1);
  const ImageBuffer y = testkit::RandomImage(12, 10, 2);
  const ImageBuffer a = testkit::RandomImage(12, 10, 3);
  const Kernel2D k = GaussianKernel(1.2, 5);
  CHECK(LossAndGrad(x, y, k, a, 0.05).loss == doctest::Approx(Loss(x, y, k, a, 0.05)).epsilon(1e-13));
}

TEST_CASE("gradient matches central differences everywhere") {
  const ImageBuffer x = testkit::RandomImage(9, 7, 4);
  const ImageBuffer y = testkit::RandomImage(9, 7, 5);
  const ImageBuffer a = testkit::RandomImage(9, 7, 6);
  const Kernel2D k = GaussianKernel(1.0, 5);  // radius 2 reaches the borders
  const LossAndGradient lg = LossAndGrad(x, y, k, a, 0.01);
  const double h = 1e-5;
  for (size_t i = 0; i < x.size(); ++i) {
    ImageBuffer p = x, m = x;
    p.data()[i] += h;
    m.data()[i] -= h;
    const double fd = (Loss(p, y, k, a, 0.01) - Loss(m, y, k, a, 0.01)) / (2 * h);
    CHECK(std::abs(fd - lg.grad.data()[i]) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("at the observation with the anchor on top the gradient vanishes") {
  const ImageBuffer x = testkit::NaturalImage(16, 16, 7);
  const Kernel2D k = GaussianKernel(1.5, 7);
  const ImageBuffer y = Convolve(x, k);
  const LossAndGradient lg = LossAndGrad(x, y, k, x, 0.1);
  CHECK(lg.loss < 1e-25);
  for (double g : lg.grad.data()) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("loss argument validation") {
  const ImageBuffer x = testkit::RandomImage(8, 8, 1);
  const Kernel2D k = GaussianKernel(1.0, 3);
  CHECK_THROWS_AS(LossAndGrad(x, testkit::RandomImage(8, 6, 1), k, x, 0.1), ShapeError);
  CHECK_THROWS_AS(LossAndGrad(x, x, GaussianKernel(3.0, 19), x, 0.1), ShapeError);
  CHECK_THROWS_AS(LossAndGrad(x, x, k, x, 0.0), RangeError);
}

TEST_CASE("descent never increases the loss") {
  const ImageBuffer ref = testkit::NaturalImage(32, 32, 8);
  const Kernel2D k = GaussianKernel(2.0, 9);
  const ImageBuffer y = Convolve(ref, k);
  const ImageBuffer init = testkit::RandomImage(32, 32, 9);
  ExploreOptions opts;
  opts.steps = 60;
  const ExploreResult r = ExploreNonunique(y, k, init, opts);
  CHECK(r.iterations <= 60);
  REQUIRE(!r.accepted_losses.empty());
  double prev = r.initial_loss;
  for (double l : r.accepted_losses) {
    CHECK(l <= prev);
    prev = l;
  }
  CHECK(r.final_loss == r.accepted_losses.back());
  CHECK(r.final_loss < 0.1 * r.initial_loss);
  for (double v : r.image.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("starting at a consistent anchor stays put") {
  const ImageBuffer x = testkit::NaturalImage(24, 24, 10);
  const Kernel2D k = GaussianKernel(1.0, 5);
  const ExploreResult r = ExploreNonunique(Convolve(x, k), k, x);
  CHECK(r.initial_loss < 1e-25);
  CHECK(r.psnr_vs_init == kPsnrCapDb);
}

TEST_CASE("explorer reports non-finite losses with the iteration") {
  ImageBuffer init = testkit::NaturalImage(16, 16, 11);
  const Kernel2D k = GaussianKernel(1.0, 5);
  const ImageBuffer y = Convolve(init, k);
  init.at(0, 4, 4) = std::numeric_limits<double>::quiet_NaN();
  try {
    ExploreNonunique(y, k, init);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("indeterminate exploration re-solves under a wider kernel") {
  const ImageBuffer x = testkit::NaturalImage(48, 48, 12);
  ExploreOptions opts;
  opts.steps = 200;
  const ExploreResult same = ExploreIndeterminate(x, 1.0, 1.0, 13, opts);
  CHECK(same.initial_loss < 1e-25);
  CHECK(Psnr(same.image, x) == kPsnrCapDb);
  const ExploreResult wider = ExploreIndeterminate(x, 1.0, 1.12, 13, opts);
  CHECK(wider.initial_loss > 0.0);
  CHECK(wider.final_loss < wider.initial_loss);
  CHECK(wider.deg_psnr_vs_input > 40.0);
  CHECK(wider.psnr_vs_init < kPsnrCapDb);
}

}  // namespace
}  // namespace cdi
