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

#ifndef CDI_CDI_H_
#define CDI_CDI_H_

// Consistency-with-degraded-image scoring in the Haar wavelet domain.
//
// Per subband, the degraded coefficients y are split against the reference
// coefficients x as y = mu_A x + n_D. The noise is then converted into the
// attenuation that removes the same amount of information for an observer
// with internal noise variance sigma_H^2, giving the attenuated target
//
//   F(x, y) = mu_A * mu_D * x,   mu_D = 1 / sqrt(1 + sigma_D^2 / sigma_H^2).
//
// The restored image is scaled band-by-band by the least-squares gain mu_M
// that best matches the target, and the score is the PSNR between the two
// reconstructions.
//
// All second moments are uncentered and taken over whole subbands.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cdi/image.h"
#include "cdi/wavelet.h"

namespace cdi {

inline constexpr double kDefaultLambda = 0.3;
inline constexpr double kSigmaHFloor = 1e-12;
inline constexpr double kDegenerateMoment = 1e-12;
// A reference band is treated as flat by the noise split only when its
// energy is not representable. Any larger cut-off breaks idempotency:
// attenuated targets legitimately carry bands far below 1e-12.
inline constexpr double kFlatBandMoment = std::numeric_limits<double>::min();

struct BandStats {
  std::string name;
  double mu_a = 0.0;
  double sigma_d2 = 0.0;
  double sigma_h2 = kSigmaHFloor;
  double mu_d = 1.0;
  double mu_m = 0.0;
  double cov_xx = 0.0;
  double cov_yy = 0.0;
  double cov_xy = 0.0;

  // mu_A * mu_D, the total gain applied to the reference band.
  double gain() const { return mu_a * mu_d; }
};

struct CdiScore {
  double rgcdi_psnr = 0.0;
  double lambda = kDefaultLambda;
  int levels = kDefaultLevels;
  std::vector<BandStats> per_band;
};

// (1/N) sum a_i b_i. Fixed-order summation.
double Moment(std::span<const double> a, std::span<const double> b);

struct AttenuationSplit {
  double mu_a = 0.0;
  double sigma_d2 = 0.0;
};

// mu_A = COV(y,x)/COV(x,x), sigma_D^2 = max(0, COV(y,y) - mu_A COV(y,x)).
// A flat reference band (COV(x,x) < kFlatBandMoment) yields mu_A = 0 and
// sigma_D^2 = COV(y,y). Throws ShapeError on length mismatch or N < 2.
AttenuationSplit SplitAttenuationNoise(std::span<const double> x,
                                       std::span<const double> y);

// max(1e-12, lambda * mu_A^2 * COV(x,x)).
double HvsSigma2(double mu_a, double cov_xx, double lambda);

// 1 / sqrt(1 + sigma_D^2 / sigma_H^2).
double NoiseEquivGain(double sigma_d2, double sigma_h2);

enum class InfoVariant {
  kClean = 1,        // ln((C + sH) / sH)
  kAttenuated = 2,   // ln((mu_A^2 C + sH) / sH)
  kNoisy = 3,        // ln((C + sD + sH) / (sD + sH))
  kEquivalent = 4,   // ln((C mu_D^2 + sH) / sH)
};

// Information (nats) passed by the observer model for a band of second
// moment cov_xx. Throws RangeError for non-positive sigma_h2 or negative
// sigma_d2.
double MutualInfo(double cov_xx, double mu_a, double sigma_d2, double sigma_h2,
                  InfoVariant variant);

struct AttenuatedReference {
  WaveletPyramid target;
  std::vector<BandStats> stats;  // mu_m left at 0
};

// Applies F(x, y) to every subband independently. The pyramids must have
// identical shape; lambda must be > 0.
AttenuatedReference AttenuateReference(const WaveletPyramid& x,
                                       const WaveletPyramid& y, double lambda);

// Least-squares gain COV(xhat, t) / COV(xhat, xhat); 0 for a flat xhat.
double AdaptiveGain(std::span<const double> xhat, std::span<const double> target);

// Brings a degraded image onto the reference grid: luma, then bicubic
// upsampling when its dimensions differ.
ImageBuffer AlignDegraded(const ImageBuffer& degraded, size_t width, size_t height);

// Result of scoring a restored image against an attenuated target image.
struct TargetComparison {
  double psnr = 0.0;
  std::vector<double> mu_m;  // one per band, flat band order
};

// Shared final stage of the reference-guided and reference-agnostic scores:
// the target image is decomposed, every band of xhat is scaled by its
// adaptive gain, and the two reconstructions are compared with PSNR.
TargetComparison CompareWithTarget(const WaveletPyramid& xhat,
                                   const ImageBuffer& target_image);

// Attenuated target image idwt2(F(x, y)) for a (reference, degraded) pair.
// Both are converted to luma; the degraded image is aligned to the
// reference grid first.
ImageBuffer AttenuatedTargetImage(const ImageBuffer& ref, const ImageBuffer& degraded,
                                  double lambda = kDefaultLambda,
                                  int levels = kDefaultLevels);

// Reference-guided score. ref and restored must share dimensions. Throws
// RangeError when the reference luma is completely flat.
CdiScore RgcdiPsnr(const ImageBuffer& ref, const ImageBuffer& degraded,
                   const ImageBuffer& restored, double lambda = kDefaultLambda,
                   int levels = kDefaultLevels);

// JSON report: {"v":1,"rgcdi_psnr":..,"lambda":..,"levels":..,"bands":[...]}.
std::string CdiScoreToJson(const CdiScore& score);

}  // namespace cdi

#endif  // CDI_CDI_H_
