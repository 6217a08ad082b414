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

#ifndef CDI_RACDI_H_
#define CDI_RACDI_H_

// Reference-agnostic scoring. A predictor maps a degraded image directly to
// the attenuated target that the reference-guided path would produce; the
// restored image is then scored against that prediction exactly as in
// RgcdiPsnr.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cdi/cdi.h"
#include "cdi/image.h"

namespace cdi {

// Implementations must be safe for concurrent Predict() calls.
class AttenuationPredictor {
 public:
  virtual ~AttenuationPredictor() = default;
  virtual std::string name() const = 0;
  // Returns a single-channel prediction, either on the degraded image's grid
  // or on the restored image's grid.
  virtual ImageBuffer Predict(const ImageBuffer& degraded) const = 0;
};

// Returns the luma of the degraded image unchanged.
std::unique_ptr<AttenuationPredictor> MakeIdentityPredictor();

// Computes the reference-guided target from a known reference. Used to
// generate training pairs and as the exact upper bound for a trained model.
std::unique_ptr<AttenuationPredictor> MakeReferenceOraclePredictor(
    ImageBuffer ref, double lambda = kDefaultLambda, int levels = kDefaultLevels);

// Looks up precomputed predictions. Keys are degraded image paths; each is
// read once at construction and matched by content (8-bit quantized
// samples), so Predict() accepts any image equal to the stored file.
// Predicted images are read at call time. Predict() throws NotFoundError
// ("no prediction available") for an unmapped image.
std::unique_ptr<AttenuationPredictor> PredictorFromFiles(
    const std::map<std::string, std::string>& degraded_to_predicted);

// Reads a JSON object of {"degraded path": "predicted path"}; relative paths
// resolve against the map file's directory.
std::unique_ptr<AttenuationPredictor> PredictorFromMapFile(const std::string& path);

// Content key used by the file-backed predictor.
uint64_t ImageContentHash(const ImageBuffer& img);

// Score of `restored` against predictor(degraded). The reference image is
// not an input. Predictor failures are rethrown with the predictor name as
// context.
double RacdiPsnr(const ImageBuffer& degraded, const ImageBuffer& restored,
                 const AttenuationPredictor& predictor, int levels = kDefaultLevels);

struct PairEntry {
  std::string degraded_path;
  std::string target_path;
  std::string spec_text;
  std::string source_ref_path;
};

struct PairFailure {
  std::string source_ref_path;
  std::string spec_text;
  std::string error;
};

// Generated (degraded, attenuated target) training pairs. Paths of generated
// files are relative to the manifest's directory.
struct PairManifest {
  double lambda = kDefaultLambda;
  int levels = kDefaultLevels;
  std::vector<PairEntry> entries;
  std::vector<PairFailure> failures;
};

inline constexpr const char* kPairManifestName = "pairs.json";
inline constexpr const char* kPredictorMapName = "predictor_map.json";

// For every (ref, spec) combination writes NNNN_degraded.pgm and
// NNNN_target.pgm (luma, 8-bit) into out_dir, plus pairs.json and a
// predictor_map.json usable with PredictorFromMapFile. Per-entry failures
// are recorded and generation continues; an unwritable out_dir or an
// unparseable spec throws.
PairManifest GenTrainingPairs(const std::vector<std::string>& refs,
                              const std::vector<std::string>& specs,
                              const std::string& out_dir,
                              double lambda = kDefaultLambda,
                              int levels = kDefaultLevels);

std::string PairManifestToJson(const PairManifest& manifest);
PairManifest PairManifestFromJson(const std::string& text);

}  // namespace cdi

#endif  // CDI_RACDI_H_
