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

#ifndef CDI_IMAGE_H_
#define CDI_IMAGE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cdi {

// Planar real-valued raster with 1 or 3 channels. Samples are nominally in
// [0, 1]; intermediate results (wavelet targets, noisy images before
// clamping) may leave that range but are always finite.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(size_t width, size_t height, size_t channels, double fill = 0.0);
  ImageBuffer(size_t width, size_t height, size_t channels,
              std::vector<double> data);

  size_t width() const { return width_; }
  size_t height() const { return height_; }
  size_t channels() const { return channels_; }
  size_t plane_size() const { return width_ * height_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::span<double> plane(size_t c) {
    return std::span<double>(data_).subspan(c * plane_size(), plane_size());
  }
  std::span<const double> plane(size_t c) const {
    return std::span<const double>(data_).subspan(c * plane_size(),
                                                  plane_size());
  }

  double& at(size_t c, size_t y, size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }
  double at(size_t c, size_t y, size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  bool SameShape(const ImageBuffer& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

  // Throws RangeError if any sample is NaN or infinite.
  void CheckFinite() const;

  bool operator==(const ImageBuffer& other) const = default;

 private:
  size_t width_ = 0;
  size_t height_ = 0;
  size_t channels_ = 0;
  std::vector<double> data_;
};

// Reads binary PGM (P5), binary PPM (P6) or 8-bit PNG. Samples are mapped
// to [0, 1] by division by 255.
ImageBuffer LoadImage(const std::string& path);

// Writes by extension: .pgm (1 channel), .ppm (3 channels) or .png (either).
// Samples are clamped to [0, 1] and rounded to the nearest 8-bit level.
void SaveImage(const ImageBuffer& img, const std::string& path);

// In-memory codecs used by the annotation service and tests.
std::vector<uint8_t> EncodePng(const ImageBuffer& img);
std::vector<uint8_t> EncodePnm(const ImageBuffer& img);
ImageBuffer DecodePnm(std::span<const uint8_t> bytes);

// round(clamp(v) * 255) / 255 for every sample.
ImageBuffer Quantize8(const ImageBuffer& img);

ImageBuffer Clamp01(ImageBuffer img);

// Rec.601 luma: Y = 0.299 R + 0.587 G + 0.114 B. One-channel input is
// returned unchanged.
ImageBuffer ToLuma(const ImageBuffer& img);

// Crops the centered width x height window.
ImageBuffer CenterCrop(const ImageBuffer& img, size_t width, size_t height);

inline constexpr double kPsnrCapDb = 100.0;

// 10 log10(1 / MSE) over all samples, peak 1.0. Returns kPsnrCapDb when the
// MSE is below 1e-10.
double Psnr(const ImageBuffer& a, const ImageBuffer& b);

// Mean SSIM over all valid 11x11 windows (Gaussian weights, sigma 1.5),
// C1 = 0.01^2, C2 = 0.03^2. Both inputs must be single-channel.
double Ssim(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace cdi

#endif  // CDI_IMAGE_H_
