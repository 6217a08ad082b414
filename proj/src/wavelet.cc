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

#include "cdi/wavelet.h"

#include "cdi/error.h"

namespace cdi {

Band& WaveletPyramid::band(size_t index) {
  if (index == 0) return approx;
  --index;
  return details.at(index / 3)[index % 3];
}

const Band& WaveletPyramid::band(size_t index) const {
  if (index == 0) return approx;
  --index;
  return details.at(index / 3)[index % 3];
}

std::string WaveletPyramid::band_name(size_t index) const {
  if (index == 0) return "LL" + std::to_string(levels);
  --index;
  static const char* kNames[] = {"LH", "HL", "HH"};
  return kNames[index % 3] + std::to_string(index / 3 + 1);
}

size_t WaveletPyramid::coefficient_count() const {
  size_t n = 0;
  for (size_t i = 0; i < band_count(); ++i) n += band(i).coeffs.size();
  return n;
}

bool WaveletPyramid::SameShape(const WaveletPyramid& other) const {
  if (levels != other.levels || band_count() != other.band_count()) return false;
  for (size_t i = 0; i < band_count(); ++i) {
    if (!band(i).SameShape(other.band(i))) return false;
  }
  return true;
}

std::pair<size_t, size_t> CroppedDims(size_t width, size_t height, int levels) {
  if (levels < 1 || levels > 30) throw RangeError("levels must be in [1, 30]");
  const size_t block = size_t{1} << levels;
  const size_t w = width / block * block;
  const size_t h = height / block * block;
  if (w == 0 || h == 0) {
    throw ShapeError("image " + std::to_string(width) + "x" +
                     std::to_string(height) + " too small for " +
                     std::to_string(levels) + " wavelet levels");
  }
  return {w, h};
}

namespace {

// One analysis step on a w x h (both even) matrix.
void AnalyzeLevel(const std::vector<double>& in, size_t w, size_t h, Band& ll,
                  std::array<Band, 3>& detail) {
  const size_t hw = w / 2;
  const size_t hh = h / 2;
  ll = Band{hw, hh, std::vector<double>(hw * hh)};
  for (Band& b : detail) b = Band{hw, hh, std::vector<double>(hw * hh)};
  for (size_t y = 0; y < hh; ++y) {
    const double* r0 = &in[2 * y * w];
    const double* r1 = r0 + w;
    for (size_t x = 0; x < hw; ++x) {
      const double a = r0[2 * x], b = r0[2 * x + 1];
      const double c = r1[2 * x], d = r1[2 * x + 1];
      const size_t i = y * hw + x;
      ll.coeffs[i] = 0.5 * (a + b + c + d);
      detail[0].coeffs[i] = 0.5 * (a + b - c - d);
      detail[1].coeffs[i] = 0.5 * (a - b + c - d);
      detail[2].coeffs[i] = 0.5 * (a - b - c + d);
    }
  }
}

std::vector<double> SynthesizeLevel(const Band& ll,
                                    const std::array<Band, 3>& detail) {
  for (const Band& b : detail) {
    if (!b.SameShape(ll)) throw ShapeError("idwt2: inconsistent band dimensions");
  }
  const size_t hw = ll.width;
  const size_t w = 2 * hw;
  std::vector<double> out(w * 2 * ll.height);
  for (size_t y = 0; y < ll.height; ++y) {
    double* r0 = &out[2 * y * w];
    double* r1 = r0 + w;
    for (size_t x = 0; x < hw; ++x) {
      const size_t i = y * hw + x;
      const double s = ll.coeffs[i], v = detail[0].coeffs[i];
      const double u = detail[1].coeffs[i], d = detail[2].coeffs[i];
      r0[2 * x] = 0.5 * (s + v + u + d);
      r0[2 * x + 1] = 0.5 * (s + v - u - d);
      r1[2 * x] = 0.5 * (s - v + u - d);
      r1[2 * x + 1] = 0.5 * (s - v - u + d);
    }
  }
  return out;
}

}  // namespace

WaveletPyramid Dwt2(const ImageBuffer& img, int levels) {
  if (levels < 1) throw RangeError("dwt2: levels must be >= 1");
  if (img.channels() != 1) throw ShapeError("dwt2: expects a single-channel image");
  const auto [cw, ch] = CroppedDims(img.width(), img.height(), levels);
  const ImageBuffer cropped = CenterCrop(img, cw, ch);

  WaveletPyramid pyr;
  pyr.levels = levels;
  pyr.original_width = img.width();
  pyr.original_height = img.height();
  pyr.cropped_width = cw;
  pyr.cropped_height = ch;
  pyr.details.resize(levels);

  std::vector<double> current(cropped.data().begin(), cropped.data().end());
  size_t w = cw, h = ch;
  for (int level = 0; level < levels; ++level) {
    Band ll;
    AnalyzeLevel(current, w, h, ll, pyr.details[level]);
    current = std::move(ll.coeffs);
    w /= 2;
    h /= 2;
  }
  pyr.approx = Band{w, h, std::move(current)};
  return pyr;
}

ImageBuffer Idwt2(const WaveletPyramid& pyr) {
  if (pyr.levels < 1 || pyr.details.size() != static_cast<size_t>(pyr.levels)) {
    throw ShapeError("idwt2: level count does not match detail bands");
  }
  if (pyr.approx.coeffs.size() != pyr.approx.width * pyr.approx.height) {
    throw ShapeError("idwt2: approximation band size mismatch");
  }
  Band current = pyr.approx;
  for (int level = pyr.levels - 1; level >= 0; --level) {
    for (const Band& b : pyr.details[level]) {
      if (b.coeffs.size() != b.width * b.height) {
        throw ShapeError("idwt2: detail band size mismatch");
      }
    }
    current = Band{2 * current.width, 2 * current.height,
                   SynthesizeLevel(current, pyr.details[level])};
  }
  if (pyr.cropped_width != 0 &&
      (current.width != pyr.cropped_width || current.height != pyr.cropped_height)) {
    throw ShapeError("idwt2: reconstructed size does not match recorded crop");
  }
  return ImageBuffer(current.width, current.height, 1, std::move(current.coeffs));
}

}  // namespace cdi
