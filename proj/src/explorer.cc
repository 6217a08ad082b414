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

#include "cdi/explorer.h"

#include <cmath>

#include "cdi/error.h"

namespace cdi {

LossAndGradient LossAndGrad(const ImageBuffer& xhat, const ImageBuffer& y,
                            const Kernel2D& kernel, const ImageBuffer& anchor,
                            double lambda_reg) {
  if (!(lambda_reg > 0)) throw RangeError("lambda_reg must be > 0");
  if (!xhat.SameShape(y) || !xhat.SameShape(anchor)) {
    throw ShapeError("explorer: image dimensions differ");
  }
  if (static_cast<size_t>(kernel.size) > std::min(xhat.width(), xhat.height())) {
    throw ShapeError("explorer: kernel larger than image");
  }
  ImageBuffer residual = Convolve(xhat, kernel);
  double data_term = 0.0;
  {
    auto r = residual.data();
    const auto yd = y.data();
    for (size_t i = 0; i < r.size(); ++i) {
      r[i] -= yd[i];
      data_term += r[i] * r[i];
    }
  }
  LossAndGradient out;
  out.grad = ConvolveAdjoint(residual, kernel);
  double reg_term = 0.0;
  auto g = out.grad.data();
  const auto xd = xhat.data();
  const auto ad = anchor.data();
  for (size_t i = 0; i < g.size(); ++i) {
    const double d = xd[i] - ad[i];
    reg_term += d * d;
    g[i] = 2.0 * g[i] + 2.0 * lambda_reg * d;
  }
  out.loss = data_term + lambda_reg * reg_term;
  return out;
}

namespace {

ExploreResult Descend(const ImageBuffer& y, const Kernel2D& kernel, const ImageBuffer& init,
                      const ImageBuffer& anchor, const ExploreOptions& opts) {
  if (opts.steps < 1) throw RangeError("explorer: steps must be >= 1");
  if (!(opts.step_size > 0)) throw RangeError("explorer: step size must be > 0");
  ImageBuffer current = init;
  LossAndGradient state = LossAndGrad(current, y, kernel, anchor, opts.lambda_reg);
  if (!std::isfinite(state.loss)) throw Error("explorer: loss is not finite at iteration 0");

  ExploreResult result;
  result.initial_loss = state.loss;
  double step = opts.step_size;
  constexpr int kMaxHalvings = 60;
  for (int it = 1; it <= opts.steps; ++it) {
    bool accepted = false;
    for (int halving = 0; halving <= kMaxHalvings; ++halving) {
      ImageBuffer candidate = current;
      auto c = candidate.data();
      const auto g = state.grad.data();
      for (size_t i = 0; i < c.size(); ++i) c[i] -= step * g[i];
      LossAndGradient next = LossAndGrad(candidate, y, kernel, anchor, opts.lambda_reg);
      if (std::isnan(next.loss)) {
        throw Error("explorer: loss became NaN at iteration " + std::to_string(it));
      }
      if (next.loss <= state.loss) {
        current = std::move(candidate);
        state = std::move(next);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    result.iterations = it;
    if (!accepted) break;  // no descent direction left at machine precision
    result.accepted_losses.push_back(state.loss);
  }
  result.final_loss = state.loss;
  result.image = Clamp01(std::move(current));
  result.deg_psnr_vs_input = Psnr(Convolve(result.image, kernel), y);
  result.psnr_vs_init = Psnr(result.image, init);
  return result;
}

}  // namespace

ExploreResult ExploreNonunique(const ImageBuffer& y, const Kernel2D& kernel,
                               const ImageBuffer& init, const ExploreOptions& opts) {
  return Descend(y, kernel, init, init, opts);
}

ExploreResult ExploreIndeterminate(const ImageBuffer& x, double k1_sigma, double k2_sigma,
                                   int size, const ExploreOptions& opts) {
  const Kernel2D k1 = GaussianKernel(k1_sigma, size);
  const Kernel2D k2 = GaussianKernel(k2_sigma, size);
  const ImageBuffer y = Convolve(x, k1);
  return Descend(y, k2, x, x, opts);
}

}  // namespace cdi
