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

#ifndef CDI_EXPLORER_H_
#define CDI_EXPLORER_H_

// Gradient-descent construction of alternative restorations that degrade to
// (nearly) the same observation. Minimizes
//
//   L(xhat) = ||conv(xhat, k) - y||^2 + lambda_reg ||xhat - anchor||^2
//
// with squared L2 norms and reflect-padded convolution.

#include <vector>

#include "cdi/degrade.h"
#include "cdi/image.h"

namespace cdi {

struct ExploreOptions {
  double lambda_reg = 0.005;
  int steps = 500;
  double step_size = 0.5;
};

struct ExploreResult {
  ImageBuffer image;  // clamped to [0, 1]
  double initial_loss = 0.0;
  double final_loss = 0.0;  // loss of the unclamped iterate
  double deg_psnr_vs_input = 0.0;
  double psnr_vs_init = 0.0;
  int iterations = 0;
  std::vector<double> accepted_losses;  // loss after every accepted step
};

struct LossAndGradient {
  double loss = 0.0;
  ImageBuffer grad;
};

// grad = 2 conv^T(conv(xhat, k) - y) + 2 lambda_reg (xhat - anchor), where
// conv^T is the exact adjoint of the padded convolution. Throws ShapeError
// for mismatched dimensions or a kernel wider than the image, RangeError
// for lambda_reg <= 0.
LossAndGradient LossAndGrad(const ImageBuffer& xhat, const ImageBuffer& y,
                            const Kernel2D& kernel, const ImageBuffer& anchor,
                            double lambda_reg);

// Descends from `init` (also the regularization anchor). Steps that would
// raise the loss are retried with half the step size. Throws Error naming
// the iteration if the loss becomes non-finite.
ExploreResult ExploreNonunique(const ImageBuffer& y, const Kernel2D& kernel,
                               const ImageBuffer& init, const ExploreOptions& opts = {});

// Blurs x with a Gaussian of k1_sigma, then re-solves starting from x with
// a kernel of k2_sigma (both size x size) and x as the anchor.
ExploreResult ExploreIndeterminate(const ImageBuffer& x, double k1_sigma, double k2_sigma,
                                   int size, const ExploreOptions& opts = {});

}  // namespace cdi

#endif  // CDI_EXPLORER_H_
