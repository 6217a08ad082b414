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

#include "cdi/racdi.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "cdi/degrade.h"
#include "cdi/error.h"
#include "cdi/parallel.h"
#include "json.hpp"

namespace cdi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class IdentityPredictor : public AttenuationPredictor {
 public:
  std::string name() const override { return "identity"; }
  ImageBuffer Predict(const ImageBuffer& degraded) const override {
    return ToLuma(degraded);
  }
};

class ReferenceOraclePredictor : public AttenuationPredictor {
 public:
  ReferenceOraclePredictor(ImageBuffer ref, double lambda, int levels)
      : ref_(std::move(ref)), lambda_(lambda), levels_(levels) {}
  std::string name() const override { return "oracle"; }
  ImageBuffer Predict(const ImageBuffer& degraded) const override {
    return AttenuatedTargetImage(ref_, degraded, lambda_, levels_);
  }

 private:
  ImageBuffer ref_;
  double lambda_;
  int levels_;
};

class FilePredictor : public AttenuationPredictor {
 public:
  explicit FilePredictor(const std::map<std::string, std::string>& mapping) {
    for (const auto& [degraded, predicted] : mapping) {
      by_hash_[ImageContentHash(LoadImage(degraded))] = predicted;
    }
  }
  std::string name() const override { return "files"; }
  ImageBuffer Predict(const ImageBuffer& degraded) const override {
    const auto it = by_hash_.find(ImageContentHash(degraded));
    if (it == by_hash_.end()) throw NotFoundError("no prediction available");
    return ToLuma(LoadImage(it->second));
  }

 private:
  std::unordered_map<uint64_t, std::string> by_hash_;
};

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text << '\n';
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

std::unique_ptr<AttenuationPredictor> MakeIdentityPredictor() {
  return std::make_unique<IdentityPredictor>();
}

std::unique_ptr<AttenuationPredictor> MakeReferenceOraclePredictor(ImageBuffer ref,
                                                                   double lambda,
                                                                   int levels) {
  return std::make_unique<ReferenceOraclePredictor>(std::move(ref), lambda, levels);
}

std::unique_ptr<AttenuationPredictor> PredictorFromFiles(
    const std::map<std::string, std::string>& degraded_to_predicted) {
  return std::make_unique<FilePredictor>(degraded_to_predicted);
}

std::unique_ptr<AttenuationPredictor> PredictorFromMapFile(const std::string& path) {
  json j;
  try {
    j = json::parse(ReadText(path));
  } catch (const json::parse_error& e) {
    throw SchemaError("", path + ": " + e.what());
  }
  if (!j.is_object()) throw SchemaError("", "predictor map must be a JSON object");
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  std::map<std::string, std::string> mapping;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string()) {
      throw SchemaError("/" + key, "predicted path must be a string");
    }
    mapping[resolve(key)] = resolve(value.get<std::string>());
  }
  return PredictorFromFiles(mapping);
}

uint64_t ImageContentHash(const ImageBuffer& img) {
  // FNV-1a over dimensions and 8-bit levels of the luma plane.
  const ImageBuffer luma = Quantize8(ToLuma(img));
  uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  feed(luma.width());
  feed(luma.height());
  for (double v : luma.data()) feed(static_cast<uint64_t>(std::lround(v * 255.0)));
  return h;
}

double RacdiPsnr(const ImageBuffer& degraded, const ImageBuffer& restored,
                 const AttenuationPredictor& predictor, int levels) {
  const WaveletPyramid xhat = Dwt2(ToLuma(restored), levels);
  ImageBuffer predicted;
  try {
    predicted = predictor.Predict(degraded);
  } catch (const NotFoundError& e) {
    throw NotFoundError("predictor '" + predictor.name() + "': " + e.what());
  } catch (const Error& e) {
    throw Error("predictor '" + predictor.name() + "': " + e.what());
  }
  return CompareWithTarget(xhat, predicted).psnr;
}

PairManifest GenTrainingPairs(const std::vector<std::string>& refs,
                              const std::vector<std::string>& specs,
                              const std::string& out_dir, double lambda, int levels) {
  std::vector<DegradationSpec> parsed;
  for (const std::string& s : specs) parsed.push_back(ParseDegradation(s));
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw Error("cannot create output directory " + out_dir);
  }
  {
    const fs::path probe = fs::path(out_dir) / ".write_probe";
    std::ofstream out(probe);
    if (!out) throw Error("output directory " + out_dir + " is not writable");
    out.close();
    fs::remove(probe, ec);
  }

  const size_t n = refs.size() * specs.size();
  std::vector<std::optional<PairEntry>> entries(n);
  std::vector<std::optional<PairFailure>> failures(n);
  ParallelFor(n, [&](size_t i) {
    const size_t r = i / specs.size();
    const size_t s = i % specs.size();
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%04zu", i);
    try {
      const ImageBuffer ref = LoadImage(refs[r]);
      const ImageBuffer degraded = ApplyDegradation(ref, parsed[s]);
      const ImageBuffer target = AttenuatedTargetImage(ref, degraded, lambda, levels);
      const std::string degraded_name = std::string(stem) + "_degraded.pgm";
      const std::string target_name = std::string(stem) + "_target.pgm";
      SaveImage(ToLuma(degraded), (fs::path(out_dir) / degraded_name).string());
      SaveImage(target, (fs::path(out_dir) / target_name).string());
      entries[i] = PairEntry{degraded_name, target_name, parsed[s].ToString(), refs[r]};
    } catch (const std::exception& e) {
      failures[i] = PairFailure{refs[r], specs[s], e.what()};
    }
  });

  PairManifest manifest;
  manifest.lambda = lambda;
  manifest.levels = levels;
  json map = json::object();
  for (size_t i = 0; i < n; ++i) {
    if (entries[i]) {
      map[entries[i]->degraded_path] = entries[i]->target_path;
      manifest.entries.push_back(std::move(*entries[i]));
    }
    if (failures[i]) manifest.failures.push_back(std::move(*failures[i]));
  }
  WriteText(fs::path(out_dir) / kPairManifestName, PairManifestToJson(manifest));
  WriteText(fs::path(out_dir) / kPredictorMapName, map.dump(2));
  return manifest;
}

std::string PairManifestToJson(const PairManifest& manifest) {
  nlohmann::ordered_json j;
  j["v"] = 1;
  j["lambda"] = manifest.lambda;
  j["levels"] = manifest.levels;
  j["entries"] = nlohmann::ordered_json::array();
  for (const PairEntry& e : manifest.entries) {
    j["entries"].push_back({{"degraded_path", e.degraded_path},
                            {"target_path", e.target_path},
                            {"spec_text", e.spec_text},
                            {"source_ref_path", e.source_ref_path}});
  }
  j["failures"] = nlohmann::ordered_json::array();
  for (const PairFailure& f : manifest.failures) {
    j["failures"].push_back({{"source_ref_path", f.source_ref_path},
                             {"spec_text", f.spec_text},
                             {"error", f.error}});
  }
  return j.dump(2);
}

PairManifest PairManifestFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", e.what());
  }
  auto field = [](const json& obj, const std::string& ptr, const char* key) -> const json& {
    if (!obj.is_object() || !obj.contains(key)) {
      throw SchemaError(ptr + "/" + key, "missing required field");
    }
    return obj.at(key);
  };
  auto str = [&](const json& obj, const std::string& ptr, const char* key) {
    const json& v = field(obj, ptr, key);
    if (!v.is_string()) throw SchemaError(ptr + "/" + key, "expected string");
    return v.get<std::string>();
  };
  if (field(j, "", "v") != 1) throw SchemaError("/v", "unsupported version");
  PairManifest m;
  const json& lambda = field(j, "", "lambda");
  const json& levels = field(j, "", "levels");
  if (!lambda.is_number()) throw SchemaError("/lambda", "expected number");
  if (!levels.is_number_integer()) throw SchemaError("/levels", "expected integer");
  m.lambda = lambda.get<double>();
  m.levels = levels.get<int>();
  const json& entries = field(j, "", "entries");
  if (!entries.is_array()) throw SchemaError("/entries", "expected array");
  for (size_t i = 0; i < entries.size(); ++i) {
    const std::string ptr = "/entries/" + std::to_string(i);
    m.entries.push_back(PairEntry{str(entries[i], ptr, "degraded_path"),
                                  str(entries[i], ptr, "target_path"),
                                  str(entries[i], ptr, "spec_text"),
                                  str(entries[i], ptr, "source_ref_path")});
  }
  if (j.contains("failures")) {
    const json& failures = j.at("failures");
    if (!failures.is_array()) throw SchemaError("/failures", "expected array");
    for (size_t i = 0; i < failures.size(); ++i) {
      const std::string ptr = "/failures/" + std::to_string(i);
      m.failures.push_back(PairFailure{str(failures[i], ptr, "source_ref_path"),
                                       str(failures[i], ptr, "spec_text"),
                                       str(failures[i], ptr, "error")});
    }
  }
  return m;
}

}  // namespace cdi
