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

#include "cdi/cdi.h"

#include <cmath>

#include "cdi/degrade.h"
#include "cdi/error.h"
#include "json.hpp"

namespace cdi {

double Moment(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum / static_cast<double>(a.size());
}

AttenuationSplit SplitAttenuationNoise(std::span<const double> x,
                                       std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("split: band lengths differ");
  if (x.size() < 2) throw ShapeError("split: bands need at least 2 coefficients");
  const double cxx = Moment(x, x);
  const double cyy = Moment(y, y);
  if (cxx < kFlatBandMoment) return {0.0, cyy};
  const double cxy = Moment(y, x);
  const double mu_a = cxy / cxx;
  return {mu_a, std::max(0.0, cyy - mu_a * cxy)};
}

double HvsSigma2(double mu_a, double cov_xx, double lambda) {
  return std::max(kSigmaHFloor, lambda * mu_a * mu_a * cov_xx);
}

double NoiseEquivGain(double sigma_d2, double sigma_h2) {
  return 1.0 / std::sqrt(1.0 + sigma_d2 / sigma_h2);
}

double MutualInfo(double cov_xx, double mu_a, double sigma_d2, double sigma_h2,
                  InfoVariant variant) {
  if (!(sigma_h2 > 0)) throw RangeError("mutual info: sigma_H^2 must be > 0");
  if (sigma_d2 < 0) throw RangeError("mutual info: sigma_D^2 must be >= 0");
  switch (variant) {
    case InfoVariant::kClean:
      return std::log1p(cov_xx / sigma_h2);
    case InfoVariant::kAttenuated:
      return std::log1p(mu_a * mu_a * cov_xx / sigma_h2);
    case InfoVariant::kNoisy:
      return std::log1p(cov_xx / (sigma_d2 + sigma_h2));
    case InfoVariant::kEquivalent: {
      const double mu_d = NoiseEquivGain(sigma_d2, sigma_h2);
      return std::log1p(cov_xx * mu_d * mu_d / sigma_h2);
    }
  }
  throw RangeError("mutual info: unknown variant");
}

AttenuatedReference AttenuateReference(const WaveletPyramid& x,
                                       const WaveletPyramid& y, double lambda) {
  if (!(lambda > 0)) throw RangeError("lambda must be > 0");
  if (!x.SameShape(y)) throw ShapeError("attenuate: pyramid shapes differ");
  AttenuatedReference out;
  out.target = x;
  out.stats.reserve(x.band_count());
  for (size_t b = 0; b < x.band_count(); ++b) {
    const auto& xb = x.band(b).coeffs;
    const auto& yb = y.band(b).coeffs;
    BandStats s;
    s.name = x.band_name(b);
    s.cov_xx = Moment(xb, xb);
    s.cov_yy = Moment(yb, yb);
    s.cov_xy = Moment(xb, yb);
    const AttenuationSplit split = SplitAttenuationNoise(xb, yb);
    s.mu_a = split.mu_a;
    s.sigma_d2 = split.sigma_d2;
    s.sigma_h2 = HvsSigma2(s.mu_a, s.cov_xx, lambda);
    s.mu_d = NoiseEquivGain(s.sigma_d2, s.sigma_h2);
    const double gain = s.mu_a * s.mu_d;
    for (double& v : out.target.band(b).coeffs) v *= gain;
    out.stats.push_back(std::move(s));
  }
  return out;
}

double AdaptiveGain(std::span<const double> xhat, std::span<const double> target) {
  if (xhat.size() != target.size()) throw ShapeError("adaptive gain: band lengths differ");
  if (xhat.empty()) return 0.0;
  const double cxx = Moment(xhat, xhat);
  if (cxx < kDegenerateMoment) return 0.0;
  return Moment(xhat, target) / cxx;
}

ImageBuffer AlignDegraded(const ImageBuffer& degraded, size_t width, size_t height) {
  return ResizeBicubic(ToLuma(degraded), width, height);
}

TargetComparison CompareWithTarget(const WaveletPyramid& xhat,
                                   const ImageBuffer& target_image) {
  const ImageBuffer target = ToLuma(target_image);
  ImageBuffer aligned;
  if (target.width() == xhat.cropped_width && target.height() == xhat.cropped_height) {
    aligned = target;
  } else if (target.width() == xhat.original_width &&
             target.height() == xhat.original_height) {
    aligned = CenterCrop(target, xhat.cropped_width, xhat.cropped_height);
  } else {
    aligned = CenterCrop(ResizeBicubic(target, xhat.original_width, xhat.original_height),
                         xhat.cropped_width, xhat.cropped_height);
  }
  const WaveletPyramid t = Dwt2(aligned, xhat.levels);
  TargetComparison out;
  WaveletPyramid scaled = xhat;
  for (size_t b = 0; b < xhat.band_count(); ++b) {
    const double mu_m = AdaptiveGain(xhat.band(b).coeffs, t.band(b).coeffs);
    for (double& v : scaled.band(b).coeffs) v *= mu_m;
    out.mu_m.push_back(mu_m);
  }
  out.psnr = Psnr(Idwt2(scaled), Idwt2(t));
  return out;
}

namespace {

struct ReferenceTarget {
  AttenuatedReference attenuated;
  ImageBuffer image;
};

ReferenceTarget BuildTarget(const ImageBuffer& ref, const ImageBuffer& degraded,
                            double lambda, int levels) {
  const ImageBuffer x = ToLuma(ref);
  const ImageBuffer y = AlignDegraded(degraded, x.width(), x.height());
  ReferenceTarget out{AttenuateReference(Dwt2(x, levels), Dwt2(y, levels), lambda), {}};
  bool degenerate = true;
  for (const BandStats& s : out.attenuated.stats) {
    if (s.cov_xx >= kDegenerateMoment) degenerate = false;
  }
  if (degenerate) throw RangeError("reference image has no energy in any subband");
  out.image = Idwt2(out.attenuated.target);
  return out;
}

}  // namespace

ImageBuffer AttenuatedTargetImage(const ImageBuffer& ref, const ImageBuffer& degraded,
                                  double lambda, int levels) {
  return BuildTarget(ref, degraded, lambda, levels).image;
}

CdiScore RgcdiPsnr(const ImageBuffer& ref, const ImageBuffer& degraded,
                   const ImageBuffer& restored, double lambda, int levels) {
  if (ref.width() != restored.width() || ref.height() != restored.height()) {
    throw ShapeError("rgcdi: reference and restored dimensions differ");
  }
  ReferenceTarget target = BuildTarget(ref, degraded, lambda, levels);
  const TargetComparison cmp =
      CompareWithTarget(Dwt2(ToLuma(restored), levels), target.image);
  CdiScore score;
  score.rgcdi_psnr = cmp.psnr;
  score.lambda = lambda;
  score.levels = levels;
  score.per_band = std::move(target.attenuated.stats);
  for (size_t b = 0; b < score.per_band.size(); ++b) score.per_band[b].mu_m = cmp.mu_m[b];
  return score;
}

std::string CdiScoreToJson(const CdiScore& score) {
  nlohmann::ordered_json j;
  j["v"] = 1;
  j["rgcdi_psnr"] = score.rgcdi_psnr;
  j["lambda"] = score.lambda;
  j["levels"] = score.levels;
  j["bands"] = nlohmann::ordered_json::array();
  for (const BandStats& s : score.per_band) {
    j["bands"].push_back({{"name", s.name},
                          {"mu_a", s.mu_a},
                          {"sigma_d2", s.sigma_d2},
                          {"sigma_h2", s.sigma_h2},
                          {"mu_d", s.mu_d},
                          {"mu_m", s.mu_m},
                          {"cov_xx", s.cov_xx},
                          {"cov_yy", s.cov_yy},
                          {"cov_xy", s.cov_xy}});
  }
  return j.dump();
}

}  // namespace cdi
