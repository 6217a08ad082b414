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

#ifndef CDI_TESTS_TESTKIT_H_
#define CDI_TESTS_TESTKIT_H_

// Synthetic images and fixtures shared by the unit tests and the acceptance
// runner.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cdi/bench.h"
#include "cdi/degrade.h"
#include "cdi/image.h"

namespace cdi::testkit {

// Uniform double in [0, 1) from a 64-bit state.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}
  uint64_t Next();
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  double Normal();

 private:
  uint64_t state_;
};

// iid uniform samples in [0, 1].
ImageBuffer RandomImage(size_t width, size_t height, uint64_t seed, size_t channels = 1);

// Multi-octave value noise with 1/f falloff plus a few flat discs and
// rectangles, scaled to [0.05, 0.95].
ImageBuffer NaturalImage(size_t width, size_t height, uint64_t seed, size_t channels = 1);

// Randomizes the Fourier phases of a band, keeping its energy.
std::vector<double> PhaseScramble(const std::vector<double>& band, size_t width, size_t height,
                                  uint64_t seed);

// x with the detail bands of levels 1..scrambled_levels phase-scrambled.
// Dimensions must be multiples of 2^levels.
ImageBuffer ScrambleDetail(const ImageBuffer& x, int scrambled_levels, uint64_t seed,
                           int levels = 4);

// Replaces the content above radial frequency f1 (cycles/pixel, raised-cosine
// ramp from f0) with a random-phase copy of equal energy. Lower frequencies
// are untouched.
ImageBuffer FourierScramble(const ImageBuffer& x, double f0, double f1, uint64_t seed);

// Iterative back-projection: pulls xhat towards degrade(xhat) == degrade(x)
// using bicubic upsampling of the residual.
ImageBuffer BackProject(ImageBuffer xhat, const ImageBuffer& x, const DegradationSpec& spec,
                        int iterations);

// Reference, degraded image and a restoration with hallucinated fine detail
// that stays consistent with the degraded image.
struct RestorationCase {
  ImageBuffer ref;
  ImageBuffer degraded;
  ImageBuffer consistent;
  std::string spec;
  double blur_sigma = 0.0;
  int blur_size = 0;
};

RestorationCase MakeRestorationCase(size_t size, uint64_t seed, double blur_sigma = 2.0,
                                    int explore_steps = 300);

// x4 super-resolution flavour: blur(sigma=1)|down(factor=4) followed by
// noise. The restoration keeps the reference below the low-resolution
// Nyquist band, hallucinates everything above it, and is back-projected so
// that it degrades to the same low-resolution image as the reference.
RestorationCase MakeSrRestorationCase(size_t size, uint64_t seed);

struct TwoAfcFixture {
  std::filesystem::path dir;
  std::filesystem::path manifest;
  TrialSet trials;
  std::vector<bool> consistent_is_a;
};

// Writes trials pitting the super-resolution consistent candidate against
// the reference blurred with sigma in [2, 3.5]. Simulated raters prefer the candidate with higher DEG_PSNR,
// choosing it with probability 1 / (1 + exp(-diff_db / 2)).
TwoAfcFixture WriteTwoAfcFixture(const std::filesystem::path& dir, int trials, size_t size,
                                 int raters, uint64_t seed);

// Fresh empty directory under the system temp dir.
std::filesystem::path TempDir(const std::string& name);

}  // namespace cdi::testkit

#endif  // CDI_TESTS_TESTKIT_H_
