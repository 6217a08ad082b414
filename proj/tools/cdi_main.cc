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

// Command-line entry point. Exit codes: 0 success, 1 domain error, 2 usage
// error. With --json every subcommand writes exactly one JSON document to
// stdout.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdi/annotate.h"
#include "cdi/bench.h"
#include "cdi/cdi.h"
#include "cdi/degrade.h"
#include "cdi/error.h"
#include "cdi/explorer.h"
#include "cdi/image.h"
#include "cdi/parallel.h"
#include "cdi/racdi.h"
#include "json.hpp"

namespace {

using cdi::ImageBuffer;
using Json = nlohmann::ordered_json;

// JSON has no infinity; capped PSNR values are finite, but guard anyway.
Json Number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

void PrintJson(const Json& j) { std::cout << j.dump(2) << "\n"; }

std::unique_ptr<cdi::AttenuationPredictor> MakePredictor(const std::string& spec) {
  if (spec == "identity") return cdi::MakeIdentityPredictor();
  if (spec.rfind("files:", 0) == 0) return cdi::PredictorFromMapFile(spec.substr(6));
  throw CLI::ValidationError("--predictor", "expected identity or files:MAP, got " + spec);
}

struct ScoreArgs {
  std::string ref, degraded, restored, spec;
  double lambda = cdi::kDefaultLambda;
  int levels = cdi::kDefaultLevels;
  bool json = false;
};

void RunScore(const ScoreArgs& a) {
  const ImageBuffer ref = cdi::LoadImage(a.ref);
  const ImageBuffer degraded = cdi::LoadImage(a.degraded);
  const ImageBuffer restored = cdi::LoadImage(a.restored);
  const cdi::CdiScore score = cdi::RgcdiPsnr(ref, degraded, restored, a.lambda, a.levels);
  const double psnr = cdi::Psnr(ref, restored);
  const double ssim = cdi::Ssim(cdi::ToLuma(ref), cdi::ToLuma(restored));
  std::optional<double> deg_psnr;
  if (!a.spec.empty()) {
    deg_psnr = cdi::DegPsnr(restored, degraded, cdi::ParseDegradation(a.spec));
  }
  if (a.json) {
    Json j = Json::parse(cdi::CdiScoreToJson(score));
    j["psnr"] = Number(psnr);
    j["ssim"] = Number(ssim);
    j["deg_psnr"] = deg_psnr ? Number(*deg_psnr) : Json(nullptr);
    PrintJson(j);
    return;
  }
  std::printf("RGCDI_PSNR %.4f\n", score.rgcdi_psnr);
  std::printf("PSNR       %.4f\n", psnr);
  std::printf("SSIM       %.6f\n", ssim);
  if (deg_psnr) std::printf("DEG_PSNR   %.4f\n", *deg_psnr);
}

struct RacdiArgs {
  std::string degraded, restored, predictor = "identity";
  int levels = cdi::kDefaultLevels;
  bool json = false;
};

void RunRacdi(const RacdiArgs& a) {
  const auto predictor = MakePredictor(a.predictor);
  const double v = cdi::RacdiPsnr(cdi::LoadImage(a.degraded), cdi::LoadImage(a.restored),
                                  *predictor, a.levels);
  if (a.json) {
    PrintJson(Json{{"v", 1}, {"racdi_psnr", Number(v)}, {"predictor", predictor->name()},
                   {"levels", a.levels}});
  } else {
    std::printf("RACDI_PSNR %.4f\n", v);
  }
}

struct DegradeArgs {
  std::string in, out, spec;
  bool json = false;
};

void RunDegrade(const DegradeArgs& a) {
  const cdi::DegradationSpec spec = cdi::ParseDegradation(a.spec);
  const ImageBuffer out = cdi::ApplyDegradation(cdi::LoadImage(a.in), spec);
  cdi::SaveImage(out, a.out);
  if (a.json) {
    PrintJson(Json{{"v", 1}, {"out", a.out}, {"spec", spec.ToString()},
                   {"width", out.width()}, {"height", out.height()}});
  }
}

struct SweepArgs {
  std::string ref, degraded, restored, spec, out;
  std::vector<double> sigmas = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0};
  double lambda = cdi::kDefaultLambda;
  int levels = cdi::kDefaultLevels;
  bool json = false;
};

void RunSweep(const SweepArgs& a) {
  const auto rows = cdi::BlurSweep(cdi::LoadImage(a.ref), cdi::LoadImage(a.degraded),
                                   cdi::LoadImage(a.restored), a.spec, a.sigmas, a.lambda,
                                   a.levels);
  const std::string csv = cdi::SweepToCsv(rows);
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw cdi::Error("cannot write " + a.out);
    f << csv;
  }
  if (a.json) {
    Json arr = Json::array();
    for (const auto& r : rows) {
      arr.push_back(Json{{"sigma", r.sigma}, {"metric", r.metric}, {"raw", Number(r.raw)},
                         {"normalized", Number(r.normalized)}});
    }
    PrintJson(Json{{"v", 1}, {"rows", arr}});
  } else if (a.out.empty()) {
    std::cout << csv;
  }
}

struct ExploreArgs {
  std::string degraded, init, in, out;
  double sigma = 5.0;
  int size = 9;
  int indeterminate_size = 13;
  double k1 = 1.0, k2 = 1.12;
  cdi::ExploreOptions opts;
  bool json = false;
};

void ReportExplore(const ExploreArgs& a, const cdi::ExploreResult& r) {
  if (!a.out.empty()) cdi::SaveImage(r.image, a.out);
  if (a.json) {
    PrintJson(Json{{"v", 1},
                   {"initial_loss", Number(r.initial_loss)},
                   {"final_loss", Number(r.final_loss)},
                   {"deg_psnr", Number(r.deg_psnr_vs_input)},
                   {"psnr_vs_init", Number(r.psnr_vs_init)},
                   {"iterations", r.iterations}});
  } else {
    std::printf("loss      %.6g -> %.6g (%d steps)\n", r.initial_loss, r.final_loss,
                r.iterations);
    std::printf("DEG_PSNR  %.4f\n", r.deg_psnr_vs_input);
    std::printf("PSNR/init %.4f\n", r.psnr_vs_init);
  }
}

void RunExploreNonunique(const ExploreArgs& a) {
  const ImageBuffer y = cdi::ToLuma(cdi::LoadImage(a.degraded));
  const ImageBuffer init = cdi::ToLuma(cdi::LoadImage(a.init));
  const auto r = cdi::ExploreNonunique(y, cdi::GaussianKernel(a.sigma, a.size), init, a.opts);
  ReportExplore(a, r);
}

void RunExploreIndeterminate(const ExploreArgs& a) {
  const ImageBuffer x = cdi::ToLuma(cdi::LoadImage(a.in));
  ReportExplore(a, cdi::ExploreIndeterminate(x, a.k1, a.k2, a.indeterminate_size, a.opts));
}

struct GenPairsArgs {
  std::vector<std::string> refs, specs;
  std::string out_dir;
  double lambda = cdi::kDefaultLambda;
  int levels = cdi::kDefaultLevels;
  bool json = false;
};

void RunGenPairs(const GenPairsArgs& a) {
  const cdi::PairManifest m =
      cdi::GenTrainingPairs(a.refs, a.specs, a.out_dir, a.lambda, a.levels);
  for (const auto& f : m.failures) {
    std::fprintf(stderr, "warning: %s with %s: %s\n", f.source_ref_path.c_str(), f.spec_text.c_str(),
                 f.error.c_str());
  }
  if (a.json) {
    std::cout << cdi::PairManifestToJson(m) << "\n";
  } else {
    std::printf("%zu pairs written to %s (%zu failed)\n", m.entries.size(), a.out_dir.c_str(),
                m.failures.size());
  }
}

struct EvalArgs {
  std::string manifest, metric = "rgcdi", predictor = "identity";
  double lambda = cdi::kDefaultLambda;
  int levels = cdi::kDefaultLevels;
  bool json = false;
};

void RunEval(const EvalArgs& a) {
  const cdi::TrialSet ts = cdi::LoadManifest(a.manifest);
  cdi::MetricConfig config;
  config.metric = cdi::ParseMetric(a.metric);
  config.lambda = a.lambda;
  config.levels = a.levels;
  std::unique_ptr<cdi::AttenuationPredictor> predictor;
  if (config.metric == cdi::Metric::kRacdi) {
    predictor = MakePredictor(a.predictor);
    config.predictor = predictor.get();
  }
  const cdi::TwoAfcResult r = cdi::Metric2afc(ts, config);
  for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (a.json) {
    Json trials = Json::array();
    for (const auto& t : r.trials) {
      trials.push_back(Json{{"id", t.id}, {"p", t.p}, {"score_a", Number(t.score_a)},
                            {"score_b", Number(t.score_b)}, {"contribution", t.contribution}});
    }
    PrintJson(Json{{"v", 1}, {"metric", a.metric}, {"mean", r.mean}, {"trials", trials}});
  } else {
    std::printf("%.4f\n", r.mean);
  }
}

struct ServeArgs {
  cdi::AnnotationOptions opts;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<uint64_t> seed;
};

void RunServe(ServeArgs a) {
  a.opts.seed = a.seed;
  cdi::AnnotationService service(a.opts);
  cdi::AnnotationServer server(service);
  std::fprintf(stderr, "serving %s on http://%s:%d/\n", a.opts.manifest_path.c_str(),
               a.host.c_str(), a.port);
  server.Run(a.host, a.port);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistency-guided image restoration quality metrics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cdi 0.1.0");

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "RGCDI_PSNR, PSNR, SSIM and DEG_PSNR");
  score_cmd->add_option("--ref", score.ref, "Reference image")->required();
  score_cmd->add_option("--degraded", score.degraded, "Degraded image")->required();
  score_cmd->add_option("--restored", score.restored, "Restored image")->required();
  score_cmd->add_option("--spec", score.spec, "Degradation spec, enables DEG_PSNR");
  score_cmd->add_option("--lambda", score.lambda, "HVS noise ratio")->capture_default_str();
  score_cmd->add_option("--levels", score.levels, "Wavelet levels")->capture_default_str();
  score_cmd->add_flag("--json", score.json, "JSON output");
  score_cmd->callback([&] { RunScore(score); });

  RacdiArgs racdi;
  auto* racdi_cmd = app.add_subcommand("racdi", "Reference-agnostic score");
  racdi_cmd->add_option("--degraded", racdi.degraded, "Degraded image")->required();
  racdi_cmd->add_option("--restored", racdi.restored, "Restored image")->required();
  racdi_cmd->add_option("--predictor", racdi.predictor, "identity or files:MAP")
      ->capture_default_str();
  racdi_cmd->add_option("--levels", racdi.levels, "Wavelet levels")->capture_default_str();
  racdi_cmd->add_flag("--json", racdi.json, "JSON output");
  racdi_cmd->callback([&] { RunRacdi(racdi); });

  DegradeArgs degrade;
  auto* degrade_cmd = app.add_subcommand("degrade", "Apply a degradation spec");
  degrade_cmd->add_option("--in", degrade.in, "Input image")->required();
  degrade_cmd->add_option("--out", degrade.out, "Output image (.png/.pgm/.ppm)")->required();
  degrade_cmd->add_option("--spec", degrade.spec, "Degradation spec")->required();
  degrade_cmd->add_flag("--json", degrade.json, "JSON output");
  degrade_cmd->callback([&] { RunDegrade(degrade); });

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-blur", "Metric response to blurring the result");
  sweep_cmd->add_option("--ref", sweep.ref, "Reference image")->required();
  sweep_cmd->add_option("--degraded", sweep.degraded, "Degraded image")->required();
  sweep_cmd->add_option("--restored", sweep.restored, "Restored image")->required();
  sweep_cmd->add_option("--spec", sweep.spec, "Degradation spec, adds DEG_PSNR rows");
  sweep_cmd->add_option("--sigmas", sweep.sigmas, "Comma-separated blur sigmas")
      ->delimiter(',');
  sweep_cmd->add_option("--lambda", sweep.lambda, "HVS noise ratio")->capture_default_str();
  sweep_cmd->add_option("--levels", sweep.levels, "Wavelet levels")->capture_default_str();
  sweep_cmd->add_option("--out", sweep.out, "CSV output file (default stdout)");
  sweep_cmd->add_flag("--json", sweep.json, "JSON output");
  sweep_cmd->callback([&] { RunSweep(sweep); });

  ExploreArgs explore;
  auto* explore_cmd = app.add_subcommand("explore", "Search for degradation-consistent images");
  explore_cmd->require_subcommand(1);
  auto add_descent = [&](CLI::App* cmd) {
    cmd->add_option("--lambda-reg", explore.opts.lambda_reg, "Anchor weight")
        ->capture_default_str();
    cmd->add_option("--steps", explore.opts.steps, "Iterations")->capture_default_str();
    cmd->add_option("--step-size", explore.opts.step_size, "Initial step")
        ->capture_default_str();
    cmd->add_option("--out", explore.out, "Output image");
    cmd->add_flag("--json", explore.json, "JSON output");
  };
  auto* nonunique = explore_cmd->add_subcommand("nonunique", "Descend from a given init");
  nonunique->add_option("--degraded", explore.degraded, "Blurred observation")->required();
  nonunique->add_option("--init", explore.init, "Initial estimate")->required();
  nonunique->add_option("--sigma", explore.sigma, "Blur sigma")->capture_default_str();
  nonunique->add_option("--size", explore.size, "Kernel size")->capture_default_str();
  add_descent(nonunique);
  nonunique->callback([&] { RunExploreNonunique(explore); });
  auto* indeterminate =
      explore_cmd->add_subcommand("indeterminate", "Re-solve a blur with a wrong kernel");
  indeterminate->add_option("--in", explore.in, "Sharp image")->required();
  indeterminate->add_option("--k1", explore.k1, "True blur sigma")->capture_default_str();
  indeterminate->add_option("--k2", explore.k2, "Assumed blur sigma")->capture_default_str();
  indeterminate->add_option("--size", explore.indeterminate_size, "Kernel size")
      ->capture_default_str();
  add_descent(indeterminate);
  indeterminate->callback([&] { RunExploreIndeterminate(explore); });

  GenPairsArgs pairs;
  auto* pairs_cmd = app.add_subcommand("gen-pairs", "Write (degraded, attenuated target) pairs");
  pairs_cmd->add_option("--refs", pairs.refs, "Reference images")->required();
  pairs_cmd->add_option("--specs", pairs.specs, "Degradation specs")->required();
  pairs_cmd->add_option("--out-dir", pairs.out_dir, "Output directory")->required();
  pairs_cmd->add_option("--lambda", pairs.lambda, "HVS noise ratio")->capture_default_str();
  pairs_cmd->add_option("--levels", pairs.levels, "Wavelet levels")->capture_default_str();
  pairs_cmd->add_flag("--json", pairs.json, "JSON output");
  pairs_cmd->callback([&] { RunGenPairs(pairs); });

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval-2afc", "Agreement of a metric with 2AFC judgments");
  eval_cmd->add_option("--manifest", eval.manifest, "Trial manifest")->required();
  eval_cmd->add_option("--metric", eval.metric, "psnr|ssim|deg_psnr|rgcdi|racdi")
      ->capture_default_str();
  eval_cmd->add_option("--predictor", eval.predictor, "identity or files:MAP (racdi)")
      ->capture_default_str();
  eval_cmd->add_option("--lambda", eval.lambda, "HVS noise ratio")->capture_default_str();
  eval_cmd->add_option("--levels", eval.levels, "Wavelet levels")->capture_default_str();
  eval_cmd->add_flag("--json", eval.json, "JSON output");
  eval_cmd->callback([&] { RunEval(eval); });

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the 2AFC annotation server");
  serve_cmd->add_option("--manifest", serve.opts.manifest_path, "Trial manifest")->required();
  serve_cmd->add_option("--images", serve.opts.image_root, "Image root directory");
  serve_cmd->add_option("--log", serve.opts.log_path, "Judgment log")->required();
  serve_cmd->add_option("--port", serve.port, "TCP port")->capture_default_str();
  serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--cache", serve.opts.cache_dir, "Derived image cache directory");
  serve_cmd->add_option("--ui", serve.opts.ui_dir, "UI asset directory");
  serve_cmd->add_option("--seed", serve.seed, "Permutation seed");
  serve_cmd->callback([&] { RunServe(serve); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
