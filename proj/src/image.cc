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

#include "cdi/image.h"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <string_view>

#include "cdi/error.h"

namespace cdi {

ImageBuffer::ImageBuffer(size_t width, size_t height, size_t channels,
                         double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width == 0 || height == 0) throw ShapeError("image dimensions must be > 0");
  if (channels != 1 && channels != 3) {
    throw ShapeError("image must have 1 or 3 channels, got " +
                     std::to_string(channels));
  }
  data_.assign(width * height * channels, fill);
}

ImageBuffer::ImageBuffer(size_t width, size_t height, size_t channels,
                         std::vector<double> data)
    : ImageBuffer(width, height, channels) {
  if (data.size() != data_.size()) {
    throw ShapeError("sample count " + std::to_string(data.size()) +
                     " does not match " + std::to_string(width) + "x" +
                     std::to_string(height) + "x" + std::to_string(channels));
  }
  data_ = std::move(data);
}

void ImageBuffer::CheckFinite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) throw RangeError("image contains non-finite sample");
  }
}

namespace {

std::string Extension(const std::string& path) {
  const size_t dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  return ext;
}

std::vector<uint8_t> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void WriteFile(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path);
}

uint8_t ToByte(double v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Header tokenizer for PNM: whitespace and '#' comments between fields.
class PnmHeader {
 public:
  explicit PnmHeader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  size_t ReadField(const char* name) {
    SkipSpace();
    if (pos_ >= bytes_.size()) {
      throw FormatError(std::string("truncated header: missing ") + name);
    }
    if (!std::isdigit(bytes_[pos_])) {
      throw FormatError(std::string("invalid header field ") + name);
    }
    size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 30)) {
        throw FormatError(std::string("header field ") + name + " too large");
      }
      ++pos_;
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  size_t RasterStart() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError("unexpected end of pixel data");
    }
    return pos_ + 1;
  }

 private:
  void SkipSpace() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 2;
};

ImageBuffer LoadPng(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw FormatError(path + ": " + png.message);
  }
  if (png.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&png);
    throw FormatError(path + ": unsupported bit depth (only 8-bit PNG)");
  }
  const size_t channels = (png.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  png.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<uint8_t> raw(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw FormatError(path + ": " + msg);
  }
  ImageBuffer img(png.width, png.height, channels);
  const size_t n = img.plane_size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t c = 0; c < channels; ++c) {
      img.plane(c)[i] = raw[i * channels + c] / 255.0;
    }
  }
  return img;
}

std::vector<uint8_t> Interleave(const ImageBuffer& img) {
  const size_t n = img.plane_size();
  const size_t channels = img.channels();
  std::vector<uint8_t> raw(n * channels);
  for (size_t c = 0; c < channels; ++c) {
    const auto plane = img.plane(c);
    for (size_t i = 0; i < n; ++i) raw[i * channels + c] = ToByte(plane[i]);
  }
  return raw;
}

}  // namespace

ImageBuffer DecodePnm(std::span<const uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("unsupported format: magic number is not P5 or P6");
  }
  const size_t channels = bytes[1] == '5' ? 1 : 3;
  PnmHeader header(bytes);
  const size_t width = header.ReadField("width");
  const size_t height = header.ReadField("height");
  const size_t maxval = header.ReadField("maxval");
  if (width == 0 || height == 0) throw FormatError("invalid header field width/height: zero");
  if (maxval != 255) {
    throw FormatError("unsupported header field maxval " + std::to_string(maxval) +
                      " (only 255)");
  }
  const size_t start = header.RasterStart();
  const size_t count = width * height * channels;
  if (bytes.size() - start < count) throw FormatError("unexpected end of pixel data");
  ImageBuffer img(width, height, channels);
  const size_t n = width * height;
  for (size_t i = 0; i < n; ++i) {
    for (size_t c = 0; c < channels; ++c) {
      img.plane(c)[i] = bytes[start + i * channels + c] / 255.0;
    }
  }
  return img;
}

std::vector<uint8_t> EncodePnm(const ImageBuffer& img) {
  const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") +
                             "\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  const auto raw = Interleave(img);
  out.insert(out.end(), raw.begin(), raw.end());
  return out;
}

std::vector<uint8_t> EncodePng(const ImageBuffer& img) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const auto raw = Interleave(img);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, raw.data(), 0,
                                 nullptr)) {
    throw FormatError(std::string("png encode: ") + png.message);
  }
  std::vector<uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, raw.data(), 0,
                                 nullptr)) {
    throw FormatError(std::string("png encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

ImageBuffer LoadImage(const std::string& path) {
  const std::string ext = Extension(path);
  if (ext == "png") return LoadPng(path);
  try {
    return DecodePnm(ReadFile(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void SaveImage(const ImageBuffer& img, const std::string& path) {
  const std::string ext = Extension(path);
  if (ext == "png") {
    WriteFile(path, EncodePng(img));
  } else if (ext == "pgm" || ext == "ppm") {
    if ((ext == "pgm") != (img.channels() == 1)) {
      throw FormatError(path + ": ." + ext + " cannot hold " +
                        std::to_string(img.channels()) + "-channel image");
    }
    WriteFile(path, EncodePnm(img));
  } else {
    throw FormatError(path + ": unsupported extension '" + ext + "'");
  }
}

ImageBuffer Quantize8(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (double& v : out.data()) v = ToByte(v) / 255.0;
  return out;
}

ImageBuffer Clamp01(ImageBuffer img) {
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

ImageBuffer ToLuma(const ImageBuffer& img) {
  if (img.channels() == 1) return img;
  ImageBuffer out(img.width(), img.height(), 1);
  const auto r = img.plane(0);
  const auto g = img.plane(1);
  const auto b = img.plane(2);
  auto y = out.plane(0);
  for (size_t i = 0; i < y.size(); ++i) {
    y[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  }
  return out;
}

ImageBuffer CenterCrop(const ImageBuffer& img, size_t width, size_t height) {
  if (width > img.width() || height > img.height()) {
    throw ShapeError("crop larger than image");
  }
  if (width == img.width() && height == img.height()) return img;
  const size_t x0 = (img.width() - width) / 2;
  const size_t y0 = (img.height() - height) / 2;
  ImageBuffer out(width, height, img.channels());
  for (size_t c = 0; c < img.channels(); ++c) {
    for (size_t y = 0; y < height; ++y) {
      for (size_t x = 0; x < width; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    }
  }
  return out;
}

double Psnr(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.SameShape(b)) throw ShapeError("psnr: image dimensions differ");
  const auto da = a.data();
  const auto db = b.data();
  double sum = 0.0;
  for (size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(da.size());
  if (mse < 1e-10) return kPsnrCapDb;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kSsimRadius = 5;
constexpr double kSsimSigma = 1.5;

std::array<double, 2 * kSsimRadius + 1> SsimWeights() {
  std::array<double, 2 * kSsimRadius + 1> w{};
  double sum = 0.0;
  for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
    w[i + kSsimRadius] = std::exp(-(i * i) / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i + kSsimRadius];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable "valid" filtering: output is (w - 10) x (h - 10).
std::vector<double> FilterValid(std::span<const double> in, size_t w, size_t h,
                                const std::array<double, 11>& k) {
  const size_t ow = w - 2 * kSsimRadius;
  const size_t oh = h - 2 * kSsimRadius;
  std::vector<double> tmp(ow * h);
  for (size_t y = 0; y < h; ++y) {
    for (size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (size_t i = 0; i < k.size(); ++i) s += k[i] * in[y * w + x + i];
      tmp[y * ow + x] = s;
    }
  }
  std::vector<double> out(ow * oh);
  for (size_t y = 0; y < oh; ++y) {
    for (size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (size_t i = 0; i < k.size(); ++i) s += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double Ssim(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.SameShape(b)) throw ShapeError("ssim: image dimensions differ");
  if (a.channels() != 1) throw ShapeError("ssim: expects single-channel images");
  const size_t w = a.width();
  const size_t h = a.height();
  if (w < 2 * kSsimRadius + 1 || h < 2 * kSsimRadius + 1) {
    throw ShapeError("ssim: image smaller than 11x11 window");
  }
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const auto k = SsimWeights();
  const auto pa = a.plane(0);
  const auto pb = b.plane(0);
  std::vector<double> aa(pa.size()), bb(pa.size()), ab(pa.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    aa[i] = pa[i] * pa[i];
    bb[i] = pb[i] * pb[i];
    ab[i] = pa[i] * pb[i];
  }
  const auto mu_a = FilterValid(pa, w, h, k);
  const auto mu_b = FilterValid(pb, w, h, k);
  const auto s_aa = FilterValid(aa, w, h, k);
  const auto s_bb = FilterValid(bb, w, h, k);
  const auto s_ab = FilterValid(ab, w, h, k);
  double total = 0.0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double var_a = s_aa[i] - ma * ma;
    const double var_b = s_bb[i] - mb * mb;
    const double cov = s_ab[i] - ma * mb;
    total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
             ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace cdi
