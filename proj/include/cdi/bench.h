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

#ifndef CDI_BENCH_H_
#define CDI_BENCH_H_

// Two-alternative forced choice (2AFC) benchmarking against human
// judgments, the trial manifest format, and the blur sweep.
//
// Manifest schema (v1):
//
//   {"v": 1,
//    "trials": [{"id": "t0",
//                "ref_path": "ref.png",          // optional
//                "degraded_path": "deg.png",
//                "spec_text": "down(factor=4)",
//                "restoredA_path": "a.png",
//                "restoredB_path": "b.png",
//                "judgments": [{"rater_id": "r1", "choice": "A",
//                               "timestamp": "..."}]}]}
//
// Relative paths resolve against the manifest's directory. Fields not
// listed above are preserved through load/save.

#include <optional>
#include <string>
#include <vector>

#include "cdi/cdi.h"
#include "json.hpp"

namespace cdi {

class AttenuationPredictor;

enum class Choice { kA, kB };

std::string ChoiceName(Choice c);
// Accepts "A" or "B"; throws RangeError otherwise.
Choice ParseChoice(const std::string& text);

struct Judgment {
  std::string rater_id;
  Choice choice = Choice::kA;
  std::string timestamp;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const Judgment&) const = default;
};

struct Trial {
  std::string id;
  std::optional<std::string> ref_path;
  std::string degraded_path;
  std::string spec_text;
  std::string restored_a_path;
  std::string restored_b_path;
  std::vector<Judgment> judgments;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const Trial&) const = default;
};

struct TrialSet {
  std::vector<Trial> trials;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
  std::string base_dir;  // not serialized

  std::string Resolve(const std::string& path) const;
  const Trial* Find(const std::string& id) const;
};

// Throws SchemaError with a JSON pointer to the first violation.
TrialSet ParseManifest(const std::string& text, const std::string& base_dir = "");
TrialSet LoadManifest(const std::string& path);
std::string ManifestToJson(const TrialSet& ts);
void SaveManifest(const TrialSet& ts, const std::string& path);

// p^2 + (1 - p)^2. Throws RangeError outside [0, 1].
double Human2afc(double p);

enum class Metric { kPsnr, kSsim, kDegPsnr, kRgcdi, kRacdi };

std::string MetricName(Metric m);
// "psnr", "ssim", "deg_psnr", "rgcdi", "racdi".
Metric ParseMetric(const std::string& name);

struct MetricConfig {
  Metric metric = Metric::kRgcdi;
  double lambda = kDefaultLambda;
  int levels = kDefaultLevels;
  // Used by kRacdi; the identity predictor when null.
  const AttenuationPredictor* predictor = nullptr;
};

struct TrialOutcome {
  std::string id;
  double p = 0.0;  // fraction of judgments choosing A
  double score_a = 0.0;
  double score_b = 0.0;
  double contribution = 0.0;
};

struct TwoAfcResult {
  double mean = 0.0;
  std::vector<TrialOutcome> trials;  // scored trials, manifest order
  std::vector<std::string> warnings;
};

// Scores both candidates of one trial (higher is better).
std::pair<double, double> ScoreTrial(const TrialSet& ts, const Trial& trial,
                                     const MetricConfig& config);

// Per trial, p is the fraction of judgments choosing A; a metric that
// prefers A contributes p, one that prefers B contributes 1 - p, and an
// exact tie contributes 0.5. Trials without judgments are skipped with a
// warning. The mean is summed in trial-id order, so it does not depend on
// the order of trials or judgments.
TwoAfcResult Metric2afc(const TrialSet& ts, const MetricConfig& config, size_t threads = 0);

struct SweepRow {
  double sigma = 0.0;
  std::string metric;
  double raw = 0.0;
  double normalized = 0.0;
};

// Blurs the restored image with each sigma (0 = unchanged) and reports
// psnr, ssim and rgcdi (plus deg_psnr when spec_text is non-empty), each
// divided by its sigma = 0 value. Throws RangeError when 0 is missing from
// sigmas.
std::vector<SweepRow> BlurSweep(const ImageBuffer& ref, const ImageBuffer& degraded,
                                const ImageBuffer& restored, const std::string& spec_text,
                                const std::vector<double>& sigmas,
                                double lambda = kDefaultLambda,
                                int levels = kDefaultLevels);

// Header "sigma,metric,raw,normalized", numbers with 6 decimals.
std::string SweepToCsv(const std::vector<SweepRow>& rows);

}  // namespace cdi

#endif  // CDI_BENCH_H_
