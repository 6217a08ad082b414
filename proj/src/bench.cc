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

#include "cdi/bench.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cdi/degrade.h"
#include "cdi/error.h"
#include "cdi/parallel.h"
#include "cdi/racdi.h"

namespace cdi {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string ChoiceName(Choice c) { return c == Choice::kA ? "A" : "B"; }

Choice ParseChoice(const std::string& text) {
  if (text == "A") return Choice::kA;
  if (text == "B") return Choice::kB;
  throw RangeError("choice must be \"A\" or \"B\", got \"" + text + "\"");
}

std::string TrialSet::Resolve(const std::string& path) const {
  const fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).string();
}

const Trial* TrialSet::Find(const std::string& id) const {
  for (const Trial& t : trials) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

namespace {

// Pulls known keys out of a JSON object and leaves the rest as extras.
class ObjectReader {
 public:
  ObjectReader(const Json& obj, std::string pointer)
      : obj_(obj), pointer_(std::move(pointer)) {
    if (!obj.is_object()) throw SchemaError(Ptr(), "expected object");
  }

  std::string Ptr() const { return pointer_.empty() ? "/" : pointer_; }
  std::string Ptr(const std::string& key) const { return pointer_ + "/" + key; }

  const Json* Optional(const std::string& key) {
    consumed_.push_back(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  const Json& Required(const std::string& key) {
    const Json* v = Optional(key);
    if (!v) throw SchemaError(Ptr(key), "missing required field");
    return *v;
  }

  std::string String(const std::string& key) {
    const Json& v = Required(key);
    if (!v.is_string()) throw SchemaError(Ptr(key), "expected string");
    return v.get<std::string>();
  }

  Json Extras() const {
    Json extra = Json::object();
    for (const auto& [key, value] : obj_.items()) {
      if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end()) {
        extra[key] = value;
      }
    }
    return extra;
  }

 private:
  const Json& obj_;
  std::string pointer_;
  std::vector<std::string> consumed_;
};

Judgment ParseJudgment(const Json& j, const std::string& ptr) {
  ObjectReader r(j, ptr);
  Judgment out;
  out.rater_id = r.String("rater_id");
  const std::string choice = r.String("choice");
  if (choice != "A" && choice != "B") {
    throw SchemaError(r.Ptr("choice"), "choice must be \"A\" or \"B\"");
  }
  out.choice = ParseChoice(choice);
  const Json& ts = r.Required("timestamp");
  if (!ts.is_string()) throw SchemaError(r.Ptr("timestamp"), "expected string");
  out.timestamp = ts.get<std::string>();
  out.extra = r.Extras();
  return out;
}

Trial ParseTrial(const Json& j, const std::string& ptr) {
  ObjectReader r(j, ptr);
  Trial t;
  t.id = r.String("id");
  if (const Json* ref = r.Optional("ref_path"); ref && !ref->is_null()) {
    if (!ref->is_string()) throw SchemaError(r.Ptr("ref_path"), "expected string");
    t.ref_path = ref->get<std::string>();
  }
  t.degraded_path = r.String("degraded_path");
  t.spec_text = r.String("spec_text");
  try {
    ParseDegradation(t.spec_text);
  } catch (const ParseError& e) {
    throw SchemaError(r.Ptr("spec_text"), std::string("invalid spec: ") + e.what());
  }
  t.restored_a_path = r.String("restoredA_path");
  t.restored_b_path = r.String("restoredB_path");
  if (const Json* js = r.Optional("judgments")) {
    if (!js->is_array()) throw SchemaError(r.Ptr("judgments"), "expected array");
    for (size_t i = 0; i < js->size(); ++i) {
      t.judgments.push_back(
          ParseJudgment((*js)[i], r.Ptr("judgments") + "/" + std::to_string(i)));
    }
  }
  t.extra = r.Extras();
  return t;
}

Json JudgmentToJson(const Judgment& jd) {
  Json j;
  j["rater_id"] = jd.rater_id;
  j["choice"] = ChoiceName(jd.choice);
  j["timestamp"] = jd.timestamp;
  for (const auto& [k, v] : jd.extra.items()) j[k] = v;
  return j;
}

Json TrialToJson(const Trial& t) {
  Json j;
  j["id"] = t.id;
  if (t.ref_path) j["ref_path"] = *t.ref_path;
  j["degraded_path"] = t.degraded_path;
  j["spec_text"] = t.spec_text;
  j["restoredA_path"] = t.restored_a_path;
  j["restoredB_path"] = t.restored_b_path;
  j["judgments"] = Json::array();
  for (const Judgment& jd : t.judgments) j["judgments"].push_back(JudgmentToJson(jd));
  for (const auto& [k, v] : t.extra.items()) j[k] = v;
  return j;
}

}  // namespace

TrialSet ParseManifest(const std::string& text, const std::string& base_dir) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  ObjectReader r(j, "");
  const Json& v = r.Required("v");
  if (!v.is_number_integer() || v.get<int>() != 1) {
    throw SchemaError("/v", "unsupported schema version (expected 1)");
  }
  const Json& trials = r.Required("trials");
  if (!trials.is_array()) throw SchemaError("/trials", "expected array");
  TrialSet ts;
  ts.base_dir = base_dir;
  for (size_t i = 0; i < trials.size(); ++i) {
    ts.trials.push_back(ParseTrial(trials[i], "/trials/" + std::to_string(i)));
  }
  for (size_t i = 0; i < ts.trials.size(); ++i) {
    for (size_t k = 0; k < i; ++k) {
      if (ts.trials[k].id == ts.trials[i].id) {
        throw SchemaError("/trials/" + std::to_string(i) + "/id",
                          "duplicate trial id \"" + ts.trials[i].id + "\"");
      }
    }
  }
  ts.extra = r.Extras();
  return ts;
}

TrialSet LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseManifest(ss.str(), fs::path(path).parent_path().string());
}

std::string ManifestToJson(const TrialSet& ts) {
  Json j;
  j["v"] = 1;
  j["trials"] = Json::array();
  for (const Trial& t : ts.trials) j["trials"].push_back(TrialToJson(t));
  for (const auto& [k, v] : ts.extra.items()) j[k] = v;
  return j.dump(2);
}

void SaveManifest(const TrialSet& ts, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + path);
  out << ManifestToJson(ts) << '\n';
  if (!out) throw Error("write failed for " + path);
}

double Human2afc(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw RangeError("p must be in [0, 1]");
  // Same polynomial as p^2 + (1-p)^2, arranged so that the rounding error
  // is smaller (human_2afc(0.8) comes out as the double nearest 0.68).
  const double d = 2.0 * p - 1.0;
  return 0.5 + 0.5 * d * d;
}

std::string MetricName(Metric m) {
  switch (m) {
    case Metric::kPsnr: return "psnr";
    case Metric::kSsim: return "ssim";
    case Metric::kDegPsnr: return "deg_psnr";
    case Metric::kRgcdi: return "rgcdi";
    case Metric::kRacdi: return "racdi";
  }
  return "?";
}

Metric ParseMetric(const std::string& name) {
  for (Metric m : {Metric::kPsnr, Metric::kSsim, Metric::kDegPsnr, Metric::kRgcdi,
                   Metric::kRacdi}) {
    if (MetricName(m) == name) return m;
  }
  throw RangeError("unknown metric '" + name +
                   "' (expected psnr, ssim, deg_psnr, rgcdi or racdi)");
}

std::pair<double, double> ScoreTrial(const TrialSet& ts, const Trial& trial,
                                     const MetricConfig& config) {
  const ImageBuffer a = LoadImage(ts.Resolve(trial.restored_a_path));
  const ImageBuffer b = LoadImage(ts.Resolve(trial.restored_b_path));
  auto reference = [&]() {
    if (!trial.ref_path) {
      throw Error("trial " + trial.id + ": metric " + MetricName(config.metric) +
                  " needs ref_path");
    }
    return LoadImage(ts.Resolve(*trial.ref_path));
  };
  switch (config.metric) {
    case Metric::kPsnr: {
      const ImageBuffer ref = reference();
      return {Psnr(ref, a), Psnr(ref, b)};
    }
    case Metric::kSsim: {
      const ImageBuffer ref = ToLuma(reference());
      return {Ssim(ref, ToLuma(a)), Ssim(ref, ToLuma(b))};
    }
    case Metric::kDegPsnr: {
      const ImageBuffer deg = LoadImage(ts.Resolve(trial.degraded_path));
      const DegradationSpec spec = ParseDegradation(trial.spec_text);
      return {DegPsnr(a, deg, spec), DegPsnr(b, deg, spec)};
    }
    case Metric::kRgcdi: {
      const ImageBuffer ref = reference();
      const ImageBuffer deg = LoadImage(ts.Resolve(trial.degraded_path));
      return {RgcdiPsnr(ref, deg, a, config.lambda, config.levels).rgcdi_psnr,
              RgcdiPsnr(ref, deg, b, config.lambda, config.levels).rgcdi_psnr};
    }
    case Metric::kRacdi: {
      const ImageBuffer deg = LoadImage(ts.Resolve(trial.degraded_path));
      std::unique_ptr<AttenuationPredictor> identity;
      const AttenuationPredictor* predictor = config.predictor;
      if (!predictor) {
        identity = MakeIdentityPredictor();
        predictor = identity.get();
      }
      return {RacdiPsnr(deg, a, *predictor, config.levels),
              RacdiPsnr(deg, b, *predictor, config.levels)};
    }
  }
  throw RangeError("unknown metric");
}

TwoAfcResult Metric2afc(const TrialSet& ts, const MetricConfig& config, size_t threads) {
  TwoAfcResult result;
  std::vector<const Trial*> judged;
  for (const Trial& t : ts.trials) {
    if (t.judgments.empty()) {
      result.warnings.push_back("trial " + t.id + " has no judgments; skipped");
    } else {
      judged.push_back(&t);
    }
  }
  if (judged.empty()) throw Error("no judged trials to score");
  std::vector<TrialOutcome> outcomes(judged.size());
  ParallelFor(
      judged.size(),
      [&](size_t i) {
        const Trial& t = *judged[i];
        TrialOutcome& o = outcomes[i];
        o.id = t.id;
        size_t votes_a = 0;
        for (const Judgment& jd : t.judgments) votes_a += jd.choice == Choice::kA;
        o.p = static_cast<double>(votes_a) / static_cast<double>(t.judgments.size());
        std::tie(o.score_a, o.score_b) = ScoreTrial(ts, t, config);
        if (o.score_a > o.score_b) {
          o.contribution = o.p;
        } else if (o.score_b > o.score_a) {
          o.contribution = 1.0 - o.p;
        } else {
          o.contribution = 0.5;
        }
      },
      threads);
  std::vector<const TrialOutcome*> by_id;
  for (const TrialOutcome& o : outcomes) by_id.push_back(&o);
  std::sort(by_id.begin(), by_id.end(),
            [](const TrialOutcome* x, const TrialOutcome* y) { return x->id < y->id; });
  double sum = 0.0;
  for (const TrialOutcome* o : by_id) sum += o->contribution;
  result.mean = sum / static_cast<double>(outcomes.size());
  result.trials = std::move(outcomes);
  return result;
}

std::vector<SweepRow> BlurSweep(const ImageBuffer& ref, const ImageBuffer& degraded,
                                const ImageBuffer& restored, const std::string& spec_text,
                                const std::vector<double>& sigmas, double lambda,
                                int levels) {
  if (std::find(sigmas.begin(), sigmas.end(), 0.0) == sigmas.end()) {
    throw RangeError("blur sweep needs sigma = 0 as the normalization anchor");
  }
  for (double s : sigmas) {
    if (!(s >= 0)) throw RangeError("blur sweep sigmas must be >= 0");
  }
  std::optional<DegradationSpec> spec;
  if (!spec_text.empty()) spec = ParseDegradation(spec_text);
  const ImageBuffer ref_luma = ToLuma(ref);

  struct Raw {
    double psnr, ssim, rgcdi, deg;
  };
  std::vector<Raw> raws(sigmas.size());
  for (size_t i = 0; i < sigmas.size(); ++i) {
    const ImageBuffer blurred = GaussianBlur(restored, sigmas[i]);
    const ImageBuffer luma = ToLuma(blurred);
    raws[i].psnr = Psnr(ref_luma, luma);
    raws[i].ssim = Ssim(ref_luma, luma);
    raws[i].rgcdi = RgcdiPsnr(ref, degraded, blurred, lambda, levels).rgcdi_psnr;
    raws[i].deg = spec ? DegPsnr(blurred, degraded, *spec) : 0.0;
  }
  const size_t anchor = static_cast<size_t>(
      std::find(sigmas.begin(), sigmas.end(), 0.0) - sigmas.begin());
  std::vector<SweepRow> rows;
  for (size_t i = 0; i < sigmas.size(); ++i) {
    rows.push_back({sigmas[i], "psnr", raws[i].psnr, raws[i].psnr / raws[anchor].psnr});
    rows.push_back({sigmas[i], "ssim", raws[i].ssim, raws[i].ssim / raws[anchor].ssim});
    rows.push_back(
        {sigmas[i], "rgcdi", raws[i].rgcdi, raws[i].rgcdi / raws[anchor].rgcdi});
    if (spec) {
      rows.push_back({sigmas[i], "deg_psnr", raws[i].deg, raws[i].deg / raws[anchor].deg});
    }
  }
  return rows;
}

std::string SweepToCsv(const std::vector<SweepRow>& rows) {
  std::string out = "sigma,metric,raw,normalized\n";
  char line[160];
  for (const SweepRow& r : rows) {
    std::snprintf(line, sizeof(line), "%.6f,%s,%.6f,%.6f\n", r.sigma, r.metric.c_str(),
                  r.raw, r.normalized);
    out += line;
  }
  return out;
}

}  // namespace cdi
