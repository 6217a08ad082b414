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

#include "cdi/degrade.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>

#include "cdi/error.h"

namespace cdi {

namespace {

std::string FormatNumber(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct NumberToken {
  size_t offset = 0;
  std::string_view text;
  double value = 0.0;
};

class SpecParser {
 public:
  explicit SpecParser(std::string_view text) : text_(text) {}

  DegradationSpec Parse() {
    DegradationSpec spec;
    SkipSpace();
    if (pos_ >= text_.size()) Fail("expected stage name");
    spec.stages.push_back(ParseStage());
    SkipSpace();
    while (pos_ < text_.size()) {
      Expect('|', "expected '|' or end of spec");
      spec.stages.push_back(ParseStage());
      SkipSpace();
    }
    return spec;
  }

 private:
  [[noreturn]] void Fail(const std::string& msg) const { throw ParseError(pos_, msg); }
  [[noreturn]] void FailAt(size_t offset, const std::string& msg) const {
    throw ParseError(offset, msg);
  }

  void SkipSpace() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n')) {
      ++pos_;
    }
  }

  void Expect(char c, const char* msg) {
    SkipSpace();
    if (pos_ >= text_.size() || text_[pos_] != c) Fail(msg);
    ++pos_;
  }

  std::string_view Identifier(const char* what) {
    SkipSpace();
    const size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    if (start == pos_) Fail(std::string("expected ") + what);
    return text_.substr(start, pos_ - start);
  }

  NumberToken Number() {
    SkipSpace();
    NumberToken tok;
    tok.offset = pos_;
    size_t end = pos_;
    if (end < text_.size() && (text_[end] == '+' || text_[end] == '-')) ++end;
    while (end < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
            text_[end] == 'e' || text_[end] == 'E' ||
            ((text_[end] == '+' || text_[end] == '-') &&
             (text_[end - 1] == 'e' || text_[end - 1] == 'E')))) {
      ++end;
    }
    tok.text = text_.substr(pos_, end - pos_);
    const char* first = tok.text.data();
    if (!tok.text.empty() && tok.text.front() == '+') ++first;
    const auto res = std::from_chars(first, tok.text.data() + tok.text.size(), tok.value);
    if (tok.text.empty() || res.ec != std::errc() ||
        res.ptr != tok.text.data() + tok.text.size() || !std::isfinite(tok.value)) {
      Fail("expected number");
    }
    pos_ = end;
    return tok;
  }

  static bool IsInteger(const NumberToken& tok) {
    return tok.text.find_first_of(".eE") == std::string_view::npos;
  }

  int64_t Integer(const NumberToken& tok) {
    if (!IsInteger(tok)) FailAt(tok.offset, "expected integer");
    return static_cast<int64_t>(tok.value);
  }

  DegradationStage ParseStage() {
    SkipSpace();
    const size_t name_offset = pos_;
    const std::string_view name = Identifier("stage name");
    if (name != "blur" && name != "down" && name != "noise" && name != "jpeg") {
      FailAt(name_offset, "unknown stage '" + std::string(name) +
                              "' (expected blur, down, noise or jpeg)");
    }
    Expect('(', "expected '('");

    std::optional<NumberToken> sigma, size, factor, seed, qf;
    bool have_method = false;
    for (bool first = true;; first = false) {
      if (!first) {
        SkipSpace();
        if (pos_ < text_.size() && text_[pos_] == ')') break;
        Expect(',', "expected ',' or ')'");
      }
      const size_t key_offset = (SkipSpace(), pos_);
      const std::string_view key = Identifier("key");
      Expect('=', "expected '='");
      auto assign = [&](std::optional<NumberToken>& slot) {
        if (slot) FailAt(key_offset, "duplicate key '" + std::string(key) + "'");
        slot = Number();
      };
      if (key == "sigma" && (name == "blur" || name == "noise")) {
        assign(sigma);
      } else if (key == "size" && name == "blur") {
        assign(size);
      } else if (key == "factor" && name == "down") {
        assign(factor);
      } else if (key == "method" && name == "down") {
        if (have_method) FailAt(key_offset, "duplicate key 'method'");
        const size_t value_offset = (SkipSpace(), pos_);
        if (Identifier("method name") != "bicubic") {
          FailAt(value_offset, "unsupported method (expected bicubic)");
        }
        have_method = true;
      } else if (key == "seed" && name == "noise") {
        assign(seed);
      } else if (key == "qf" && name == "jpeg") {
        assign(qf);
      } else {
        FailAt(key_offset, "unknown key '" + std::string(key) + "' for " +
                               std::string(name));
      }
    }
    const size_t close_offset = pos_;
    Expect(')', "expected ')'");

    auto require = [&](const std::optional<NumberToken>& slot, const char* key) {
      if (!slot) FailAt(close_offset, std::string("missing key '") + key + "'");
      return *slot;
    };

    if (name == "blur") {
      const NumberToken s = require(sigma, "sigma");
      if (!(s.value > 0)) FailAt(s.offset, "blur sigma must be > 0");
      BlurStage stage{s.value, DefaultBlurSize(s.value)};
      if (size) {
        const int64_t n = Integer(*size);
        if (n < 3 || n % 2 == 0 || n > 4097) {
          FailAt(size->offset, "blur size must be odd and >= 3");
        }
        stage.size = static_cast<int>(n);
      }
      return stage;
    }
    if (name == "down") {
      const NumberToken f = require(factor, "factor");
      const int64_t n = Integer(f);
      if (n < 2 || n > 1 << 16) FailAt(f.offset, "down factor must be an integer >= 2");
      return DownStage{static_cast<int>(n)};
    }
    if (name == "noise") {
      const NumberToken s = require(sigma, "sigma");
      if (s.value < 0) FailAt(s.offset, "noise sigma must be >= 0");
      NoiseStage stage{s.value, 0};
      if (seed) {
        if (!IsInteger(*seed) || seed->text.front() == '-' || seed->text.front() == '+') {
          FailAt(seed->offset, "seed must be an unsigned integer");
        }
        uint64_t v = 0;
        const auto res =
            std::from_chars(seed->text.data(), seed->text.data() + seed->text.size(), v);
        if (res.ec != std::errc()) FailAt(seed->offset, "seed out of range");
        stage.seed = v;
      }
      return stage;
    }
    const NumberToken q = require(qf, "qf");
    const int64_t n = Integer(q);
    if (n < 1 || n > 100) FailAt(q.offset, "jpeg qf must be in [1, 100]");
    return JpegStage{static_cast<int>(n)};
  }

  std::string_view text_;
  size_t pos_ = 0;
};

struct StageWriter {
  std::string operator()(const BlurStage& s) const {
    return "blur(sigma=" + FormatNumber(s.sigma) + ",size=" + std::to_string(s.size) + ")";
  }
  std::string operator()(const DownStage& s) const {
    return "down(factor=" + std::to_string(s.factor) + ")";
  }
  std::string operator()(const NoiseStage& s) const {
    return "noise(sigma=" + FormatNumber(s.sigma255) + ",seed=" + std::to_string(s.seed) +
           ")";
  }
  std::string operator()(const JpegStage& s) const {
    return "jpeg(qf=" + std::to_string(s.quality) + ")";
  }
};

}  // namespace

std::string DegradationSpec::ToString() const {
  std::string out;
  for (const auto& stage : stages) {
    if (!out.empty()) out += '|';
    out += std::visit(StageWriter{}, stage);
  }
  return out;
}

DegradationSpec ParseDegradation(std::string_view text) {
  return SpecParser(text).Parse();
}

int DefaultBlurSize(double sigma) {
  const int size = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  return std::max(size, 3) | 1;
}

Kernel2D GaussianKernel(double sigma, int size) {
  if (!(sigma > 0)) throw RangeError("gaussian kernel: sigma must be > 0");
  if (size < 3 || size % 2 == 0) {
    throw RangeError("gaussian kernel: size must be odd and >= 3");
  }
  Kernel2D k{size, std::vector<double>(static_cast<size_t>(size) * size)};
  const int r = size / 2;
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    for (int j = -r; j <= r; ++j) {
      const double v = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
      k.weights[(i + r) * size + (j + r)] = v;
      sum += v;
    }
  }
  for (double& v : k.weights) v /= sum;
  return k;
}

size_t ReflectIndex(std::ptrdiff_t i, size_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * static_cast<std::ptrdiff_t>(n) - 2;
  i %= period;
  if (i < 0) i += period;
  return static_cast<size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - i);
}

namespace {

// taps[p * size + t] is the source index read by output p for kernel tap t
// of a true convolution (offset r - t).
std::vector<size_t> ConvolutionTaps(size_t n, int size) {
  const int r = size / 2;
  std::vector<size_t> taps(n * size);
  for (size_t p = 0; p < n; ++p) {
    for (int t = 0; t < size; ++t) {
      taps[p * size + t] = ReflectIndex(static_cast<std::ptrdiff_t>(p) + r - t, n);
    }
  }
  return taps;
}

}  // namespace

ImageBuffer Convolve(const ImageBuffer& img, const Kernel2D& kernel) {
  const size_t w = img.width(), h = img.height();
  const int ks = kernel.size;
  const auto xt = ConvolutionTaps(w, ks);
  const auto yt = ConvolutionTaps(h, ks);
  ImageBuffer out(w, h, img.channels());
  for (size_t c = 0; c < img.channels(); ++c) {
    const auto in = img.plane(c);
    auto dst = out.plane(c);
    for (size_t y = 0; y < h; ++y) {
      for (size_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = 0; i < ks; ++i) {
          const double* row = &in[yt[y * ks + i] * w];
          const double* kr = &kernel.weights[i * ks];
          const size_t* xs = &xt[x * ks];
          for (int j = 0; j < ks; ++j) s += kr[j] * row[xs[j]];
        }
        dst[y * w + x] = s;
      }
    }
  }
  return out;
}

ImageBuffer ConvolveAdjoint(const ImageBuffer& img, const Kernel2D& kernel) {
  const size_t w = img.width(), h = img.height();
  const int ks = kernel.size;
  const auto xt = ConvolutionTaps(w, ks);
  const auto yt = ConvolutionTaps(h, ks);
  ImageBuffer out(w, h, img.channels());
  for (size_t c = 0; c < img.channels(); ++c) {
    const auto in = img.plane(c);
    auto dst = out.plane(c);
    for (size_t y = 0; y < h; ++y) {
      for (size_t x = 0; x < w; ++x) {
        const double v = in[y * w + x];
        for (int i = 0; i < ks; ++i) {
          double* row = &dst[yt[y * ks + i] * w];
          const double* kr = &kernel.weights[i * ks];
          const size_t* xs = &xt[x * ks];
          for (int j = 0; j < ks; ++j) row[xs[j]] += kr[j] * v;
        }
      }
    }
  }
  return out;
}

ImageBuffer GaussianBlur(const ImageBuffer& img, double sigma) {
  if (sigma < 0) throw RangeError("blur sigma must be >= 0");
  if (sigma == 0) return img;
  return Convolve(img, GaussianKernel(sigma, DefaultBlurSize(sigma)));
}

namespace {

double CatmullRom(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2) * t - (a + 3)) * t * t + 1;
  if (t < 2.0) return ((a * t - 5 * a) * t + 8 * a) * t - 4 * a;
  return 0.0;
}

struct Contribution {
  std::vector<size_t> index;
  std::vector<double> weight;
};

// Resampling taps for one axis. scale = input length / output length.
std::vector<Contribution> ResampleTaps(size_t in_len, size_t out_len, double scale) {
  const double stretch = std::max(1.0, scale);
  const double support = 2.0 * stretch;
  std::vector<Contribution> taps(out_len);
  for (size_t o = 0; o < out_len; ++o) {
    const double center = (static_cast<double>(o) + 0.5) * scale - 0.5;
    const auto lo = static_cast<std::ptrdiff_t>(std::floor(center - support)) + 1;
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(center + support));
    double sum = 0.0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) {
      const double wgt = CatmullRom((static_cast<double>(i) - center) / stretch);
      if (wgt == 0.0) continue;
      taps[o].index.push_back(ReflectIndex(i, in_len));
      taps[o].weight.push_back(wgt);
      sum += wgt;
    }
    for (double& wgt : taps[o].weight) wgt /= sum;
  }
  return taps;
}

ImageBuffer Resample(const ImageBuffer& img, size_t width, size_t height, double sx,
                     double sy) {
  if (width == 0 || height == 0) throw ShapeError("resize: output dimension is zero");
  const auto xt = ResampleTaps(img.width(), width, sx);
  const auto yt = ResampleTaps(img.height(), height, sy);
  ImageBuffer out(width, height, img.channels());
  std::vector<double> tmp(width * img.height());
  for (size_t c = 0; c < img.channels(); ++c) {
    const auto in = img.plane(c);
    for (size_t y = 0; y < img.height(); ++y) {
      for (size_t x = 0; x < width; ++x) {
        double s = 0.0;
        for (size_t t = 0; t < xt[x].index.size(); ++t) {
          s += xt[x].weight[t] * in[y * img.width() + xt[x].index[t]];
        }
        tmp[y * width + x] = s;
      }
    }
    auto dst = out.plane(c);
    for (size_t y = 0; y < height; ++y) {
      for (size_t x = 0; x < width; ++x) {
        double s = 0.0;
        for (size_t t = 0; t < yt[y].index.size(); ++t) {
          s += yt[y].weight[t] * tmp[yt[y].index[t] * width + x];
        }
        dst[y * width + x] = s;
      }
    }
  }
  return out;
}

ImageBuffer Downsample(const ImageBuffer& img, int factor) {
  const size_t w = img.width() / factor;
  const size_t h = img.height() / factor;
  if (w == 0 || h == 0) {
    throw ShapeError("down(factor=" + std::to_string(factor) + ") of " +
                     std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                     " leaves a zero dimension");
  }
  return Resample(img, w, h, factor, factor);
}

uint64_t Mix(uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ImageBuffer AddNoise(ImageBuffer img, const NoiseStage& stage) {
  const double sd = stage.sigma255 / 255.0;
  auto data = img.data();
  for (size_t i = 0; i < data.size(); ++i) data[i] += sd * NoiseSample(stage.seed, i);
  return img;
}

constexpr std::array<int, 64> kLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

// Orthonormal DCT-II basis: dct[u][x].
std::array<std::array<double, 8>, 8> DctMatrix() {
  std::array<std::array<double, 8>, 8> m{};
  for (int u = 0; u < 8; ++u) {
    const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
    for (int x = 0; x < 8; ++x) {
      m[u][x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
  }
  return m;
}

}  // namespace

ImageBuffer ResizeBicubic(const ImageBuffer& img, size_t width, size_t height) {
  if (width == img.width() && height == img.height()) return img;
  return Resample(img, width, height,
                  static_cast<double>(img.width()) / static_cast<double>(width),
                  static_cast<double>(img.height()) / static_cast<double>(height));
}

double NoiseSample(uint64_t seed, uint64_t index) {
  const uint64_t key = Mix(seed);
  const uint64_t w1 = Mix(key ^ (2 * index));
  const uint64_t w2 = Mix(key ^ (2 * index + 1));
  constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = (static_cast<double>(w1 >> 11) + 1.0) * kInv53;  // (0, 1]
  const double u2 = static_cast<double>(w2 >> 11) * kInv53;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::array<int, 64> JpegQuantTable(int quality) {
  if (quality < 1 || quality > 100) throw RangeError("jpeg quality must be in [1, 100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> table{};
  for (size_t i = 0; i < 64; ++i) {
    table[i] = std::clamp((kLuminanceTable[i] * scale + 50) / 100, 1, 255);
  }
  return table;
}

ImageBuffer JpegRoundTrip(const ImageBuffer& img, int quality) {
  const auto q = JpegQuantTable(quality);
  static const auto dct = DctMatrix();
  const size_t w = img.width(), h = img.height();
  ImageBuffer out(w, h, img.channels());
  double block[8][8], tmp[8][8], coef[8][8];
  for (size_t c = 0; c < img.channels(); ++c) {
    const auto in = img.plane(c);
    auto dst = out.plane(c);
    for (size_t by = 0; by < h; by += 8) {
      for (size_t bx = 0; bx < w; bx += 8) {
        for (int y = 0; y < 8; ++y) {
          const size_t sy = ReflectIndex(static_cast<std::ptrdiff_t>(by + y), h);
          for (int x = 0; x < 8; ++x) {
            const size_t sx = ReflectIndex(static_cast<std::ptrdiff_t>(bx + x), w);
            block[y][x] = in[sy * w + sx] * 255.0 - 128.0;
          }
        }
        // coef = D * block * D^T
        for (int u = 0; u < 8; ++u) {
          for (int x = 0; x < 8; ++x) {
            double s = 0.0;
            for (int y = 0; y < 8; ++y) s += dct[u][y] * block[y][x];
            tmp[u][x] = s;
          }
        }
        for (int u = 0; u < 8; ++u) {
          for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int x = 0; x < 8; ++x) s += tmp[u][x] * dct[v][x];
            const double step = q[u * 8 + v];
            coef[u][v] = std::round(s / step) * step;
          }
        }
        // block = D^T * coef * D
        for (int y = 0; y < 8; ++y) {
          for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int u = 0; u < 8; ++u) s += dct[u][y] * coef[u][v];
            tmp[y][v] = s;
          }
        }
        for (int y = 0; y < 8 && by + y < h; ++y) {
          for (int x = 0; x < 8 && bx + x < w; ++x) {
            double s = 0.0;
            for (int v = 0; v < 8; ++v) s += tmp[y][v] * dct[v][x];
            dst[(by + y) * w + bx + x] = (s + 128.0) / 255.0;
          }
        }
      }
    }
  }
  return out;
}

namespace {

struct StageApplier {
  const ImageBuffer& img;
  ImageBuffer operator()(const BlurStage& s) const {
    return Convolve(img, GaussianKernel(s.sigma, s.size));
  }
  ImageBuffer operator()(const DownStage& s) const { return Downsample(img, s.factor); }
  ImageBuffer operator()(const NoiseStage& s) const { return AddNoise(img, s); }
  ImageBuffer operator()(const JpegStage& s) const { return JpegRoundTrip(img, s.quality); }
};

}  // namespace

ImageBuffer ApplyDegradation(const ImageBuffer& img, const DegradationSpec& spec) {
  if (spec.stages.empty()) throw RangeError("degradation spec has no stages");
  ImageBuffer current = img;
  for (const auto& stage : spec.stages) {
    current = Clamp01(std::visit(StageApplier{current}, stage));
  }
  return current;
}

double DegPsnr(const ImageBuffer& restored, const ImageBuffer& degraded,
               const DegradationSpec& spec) {
  const ImageBuffer redegraded = ApplyDegradation(restored, spec);
  if (!redegraded.SameShape(degraded)) {
    throw ShapeError("deg_psnr: degraded restored image is " +
                     std::to_string(redegraded.width()) + "x" +
                     std::to_string(redegraded.height()) + " but degraded image is " +
                     std::to_string(degraded.width()) + "x" +
                     std::to_string(degraded.height()));
  }
  return Psnr(redegraded, degraded);
}

}  // namespace cdi
