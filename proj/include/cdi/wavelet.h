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

#ifndef CDI_WAVELET_H_
#define CDI_WAVELET_H_

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "cdi/image.h"

namespace cdi {

// Row-major matrix of wavelet coefficients.
struct Band {
  size_t width = 0;
  size_t height = 0;
  std::vector<double> coeffs;

  bool SameShape(const Band& o) const {
    return width == o.width && height == o.height;
  }
  bool operator==(const Band&) const = default;
};

enum class Orientation { kLH = 0, kHL = 1, kHH = 2 };

// Multi-level orthonormal Haar decomposition of one channel.
//
// Bands are addressable by a flat index: 0 is the LL band of the coarsest
// level, then (LH, HL, HH) of level 1 (finest), level 2, and so on up to
// `levels`. The transform operates on the image center-cropped to
// multiples of 2^levels; the crop is recorded.
struct WaveletPyramid {
  int levels = 0;
  Band approx;
  std::vector<std::array<Band, 3>> details;  // details[0] is level 1
  size_t original_width = 0;
  size_t original_height = 0;
  size_t cropped_width = 0;
  size_t cropped_height = 0;

  size_t band_count() const { return 1 + 3 * details.size(); }
  Band& band(size_t index);
  const Band& band(size_t index) const;
  std::string band_name(size_t index) const;
  size_t coefficient_count() const;

  bool SameShape(const WaveletPyramid& other) const;
};

inline constexpr int kDefaultLevels = 4;

// Largest multiples of 2^levels not exceeding the given dimensions.
// Throws ShapeError when either would be zero.
std::pair<size_t, size_t> CroppedDims(size_t width, size_t height, int levels);

// Single-channel forward transform. Throws RangeError for levels < 1 and
// ShapeError for multi-channel input or a crop that leaves nothing.
WaveletPyramid Dwt2(const ImageBuffer& img, int levels = kDefaultLevels);

// Exact inverse on the cropped domain. Throws ShapeError when band
// dimensions are inconsistent.
ImageBuffer Idwt2(const WaveletPyramid& pyr);

}  // namespace cdi

#endif  // CDI_WAVELET_H_
