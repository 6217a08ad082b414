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

#ifndef CDI_DEGRADE_H_
#define CDI_DEGRADE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cdi/image.h"

namespace cdi {

struct BlurStage {
  double sigma = 1.0;
  int size = 7;
  bool operator==(const BlurStage&) const = default;
};

// Bicubic (Catmull-Rom) decimation by an integer factor. Output dimensions
// are floor(input / factor).
struct DownStage {
  int factor = 2;
  bool operator==(const DownStage&) const = default;
};

// Additive Gaussian noise. sigma255 is on the 8-bit scale; the applied
// standard deviation in [0, 1] space is sigma255 / 255.
struct NoiseStage {
  double sigma255 = 0.0;
  uint64_t seed = 0;
  bool operator==(const NoiseStage&) const = default;
};

struct JpegStage {
  int quality = 75;
  bool operator==(const JpegStage&) const = default;
};

using DegradationStage = std::variant<BlurStage, DownStage, NoiseStage, JpegStage>;

// A parsed degradation chain. Text form:
//
//   spec  := stage ("|" stage)*
//   stage := name "(" kv ("," kv)* ")"
//   kv    := key "=" value
//
//   blur(sigma=S[,size=N])       size defaults to 2*ceil(3S)+1, odd, >= 3
//   down(factor=F[,method=bicubic])
//   noise(sigma=S[,seed=K])      seed defaults to 0
//   jpeg(qf=Q)                   1 <= Q <= 100
//
// Whitespace between tokens is ignored. ToString() emits the canonical form,
// which parses back to an equal spec.
struct DegradationSpec {
  std::vector<DegradationStage> stages;

  std::string ToString() const;
  bool operator==(const DegradationSpec&) const = default;
};

// Throws ParseError (with byte offset) on syntax errors, unknown names or
// keys, and out-of-range values.
DegradationSpec ParseDegradation(std::string_view text);

int DefaultBlurSize(double sigma);

// Normalized square kernel, stored row-major.
struct Kernel2D {
  int size = 0;
  std::vector<double> weights;

  int radius() const { return size / 2; }
  double at(int row, int col) const { return weights[row * size + col]; }
};

// Samples exp(-(i^2 + j^2) / (2 sigma^2)) on the centered size x size grid
// and normalizes to unit sum. Throws RangeError for even size, size < 3 or
// sigma <= 0.
Kernel2D GaussianKernel(double sigma, int size);

// Maps any integer index into [0, n) by mirror reflection without repeating
// the edge sample (d c b | a b c d | c b a).
size_t ReflectIndex(std::ptrdiff_t i, size_t n);

// 2-D convolution of every channel with reflect padding.
ImageBuffer Convolve(const ImageBuffer& img, const Kernel2D& kernel);

// Exact adjoint of Convolve: <Convolve(a), b> == <a, ConvolveAdjoint(b)>.
// Equals correlation with the kernel in the interior; reflected taps are
// folded back onto the samples they were read from near the borders.
ImageBuffer ConvolveAdjoint(const ImageBuffer& img, const Kernel2D& kernel);

// Gaussian blur with the default kernel size; sigma == 0 returns the input.
ImageBuffer GaussianBlur(const ImageBuffer& img, double sigma);

// Catmull-Rom (a = -0.5) resampling to an arbitrary size. When shrinking,
// the kernel is stretched by the scale factor (antialiased).
ImageBuffer ResizeBicubic(const ImageBuffer& img, size_t width, size_t height);

// Deterministic standard normal sample for (seed, index).
//
// Generator: SplitMix64 used as a counter-based hash. The stream key is
// mix(seed); the two uniforms for sample i come from mix(key ^ 2i) and
// mix(key ^ (2i+1)), taking the top 53 bits. Box-Muller (cosine branch)
// turns them into one N(0, 1) value. mix() is the SplitMix64 finalizer
// applied to (input + 0x9E3779B97F4A7C15).
double NoiseSample(uint64_t seed, uint64_t index);

// Standard JPEG luminance quantization table (zig-zag not applied; row-major
// in natural order) scaled by the usual quality mapping: scale = 5000/Q for
// Q < 50, 200 - 2Q otherwise; entries clamped to [1, 255].
std::array<int, 64> JpegQuantTable(int quality);

// Blockwise 8x8 DCT-II, quantize, dequantize, inverse DCT on every channel
// (8-bit scale with a 128 level shift). Blocks crossing the border read
// reflected samples.
ImageBuffer JpegRoundTrip(const ImageBuffer& img, int quality);

// Applies every stage in order, clamping to [0, 1] after each stage.
ImageBuffer ApplyDegradation(const ImageBuffer& img, const DegradationSpec& spec);

// PSNR between the re-degraded restored image and the degraded image.
double DegPsnr(const ImageBuffer& restored, const ImageBuffer& degraded,
               const DegradationSpec& spec);

}  // namespace cdi

#endif  // CDI_DEGRADE_H_
