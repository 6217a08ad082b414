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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdi/cdi.h"
#include "cdi/degrade.h"
#include "doctest.h"
#include "json.hpp"
#include "testkit.h"

namespace cdi {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
  int status = -1;
  std::string out;
  std::string err;
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult Cdi(const std::string& args) {
  static int counter = 0;
  const fs::path dir = testkit::TempDir("cli_run" + std::to_string(counter++));
  const std::string cmd = std::string("'") + CDI_TOOL_PATH + "' " + args + " >'" +
                          (dir / "out").string() + "' 2>'" + (dir / "err").string() + "'";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = Slurp(dir / "out");
  r.err = Slurp(dir / "err");
  return r;
}

std::string Fixture(const std::string& name) {
  return (fs::path(CDI_FIXTURE_DIR) / name).string();
}

struct Triple {
  fs::path dir, ref, deg, res;
};

Triple WriteTriple(const std::string& name) {
  Triple t;
  t.dir = testkit::TempDir(name);
  const ImageBuffer ref = testkit::NaturalImage(64, 64, 900, 3);
  t.ref = t.dir / "ref.png";
  t.deg = t.dir / "deg.png";
  t.res = t.dir / "res.png";
  SaveImage(ref, t.ref.string());
  SaveImage(ApplyDegradation(ref, ParseDegradation("blur(sigma=2)")), t.deg.string());
  SaveImage(GaussianBlur(ref, 0.8), t.res.string());
  return t;
}

TEST_CASE("help and version exit cleanly") {
  const RunResult help = Cdi("--help");
  CHECK(help.status == 0);
  CHECK(help.out.find("score") != std::string::npos);
  CHECK(help.out.find("eval-2afc") != std::string::npos);
  CHECK(Cdi("--version").status == 0);
  CHECK(Cdi("score --help").status == 0);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(Cdi("").status == 2);
  CHECK(Cdi("frobnicate").status == 2);
  CHECK(Cdi("score --ref a.png").status == 2);
  CHECK(Cdi("score --ref a --degraded b --restored c --lambda abc").status == 2);
  CHECK(Cdi("eval-2afc --manifest x.json --bogus").status == 2);
}

TEST_CASE("domain errors exit with 1") {
  const RunResult missing = Cdi("score --ref /nonexistent.png --degraded x.png --restored y.png");
  CHECK(missing.status == 1);
  CHECK(missing.err.rfind("error: ", 0) == 0);
  const Triple t = WriteTriple("cli_domain");
  const RunResult bad_spec = Cdi("degrade --in " + t.ref.string() + " --out " +
                                 (t.dir / "o.png").string() + " --spec 'blur(sigma=)'");
  CHECK(bad_spec.status == 1);
  CHECK(bad_spec.err.find("offset 11") != std::string::npos);
}

TEST_CASE("score prints all metrics and matches the library") {
  const Triple t = WriteTriple("cli_score");
  const std::string base =
      "score --ref " + t.ref.string() + " --degraded " + t.deg.string() + " --restored " + t.res.string();
  const RunResult text = Cdi(base + " --spec 'blur(sigma=2)'");
  REQUIRE(text.status == 0);
  for (const char* key : {"RGCDI_PSNR", "PSNR", "SSIM", "DEG_PSNR"}) {
    CHECK(text.out.find(key) != std::string::npos);
  }
  const RunResult js = Cdi(base + " --json");
  REQUIRE(js.status == 0);
  const json j = json::parse(js.out);  // exactly one document
  const double want =
      RgcdiPsnr(LoadImage(t.ref.string()), LoadImage(t.deg.string()), LoadImage(t.res.string()))
          .rgcdi_psnr;
  CHECK(j["rgcdi_psnr"].get<double>() == doctest::Approx(want).epsilon(1e-12));
  CHECK(j["v"] == 1);
  CHECK(j["bands"].size() == 13);
  CHECK(j.contains("psnr"));
  CHECK(j["deg_psnr"].is_null());
  const RunResult with_spec = Cdi(base + " --spec 'blur(sigma=2)' --json");
  REQUIRE(with_spec.status == 0);
  const json js4 = json::parse(with_spec.out);
  for (const char* key : {"rgcdi_psnr", "psnr", "ssim", "deg_psnr"}) CHECK(js4[key].is_number());
  CHECK(Cdi(base + " --lambda 0").status == 1);
}

TEST_CASE("degrade output is deterministic") {
  const Triple t = WriteTriple("cli_degrade");
  const std::string spec = "'blur(sigma=1)|down(factor=2)|noise(sigma=20,seed=5)|jpeg(qf=30)'";
  const fs::path o1 = t.dir / "o1.png", o2 = t.dir / "o2.png";
  REQUIRE(Cdi("degrade --in " + t.ref.string() + " --out " + o1.string() + " --spec " + spec).status == 0);
  REQUIRE(Cdi("degrade --in " + t.ref.string() + " --out " + o2.string() + " --spec " + spec).status == 0);
  CHECK(Slurp(o1) == Slurp(o2));
  const ImageBuffer out = LoadImage(o1.string());
  CHECK(out.width() == 32);
  const ImageBuffer want = Quantize8(ApplyDegradation(
      LoadImage(t.ref.string()),
      ParseDegradation("blur(sigma=1)|down(factor=2)|noise(sigma=20,seed=5)|jpeg(qf=30)")));
  CHECK(out == want);
}

TEST_CASE("racdi with the identity predictor") {
  const Triple t = WriteTriple("cli_racdi");
  const RunResult r = Cdi("racdi --degraded " + t.deg.string() + " --restored " + t.res.string());
  REQUIRE(r.status == 0);
  CHECK(r.out.rfind("RACDI_PSNR ", 0) == 0);
  CHECK(Cdi("racdi --degraded " + t.deg.string() + " --restored " + t.res.string() +
            " --predictor magic")
            .status != 0);
}

TEST_CASE("sweep-blur writes csv") {
  const Triple t = WriteTriple("cli_sweep");
  const fs::path csv = t.dir / "sweep.csv";
  const RunResult r = Cdi("sweep-blur --ref " + t.ref.string() + " --degraded " + t.deg.string() +
                          " --restored " + t.res.string() + " --sigmas 0,0.5,1 --out " + csv.string());
  REQUIRE(r.status == 0);
  const std::string text = Slurp(csv);
  CHECK(text.rfind("sigma,metric,raw,normalized\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 3 * 3);
}

TEST_CASE("explore subcommands write images") {
  const Triple t = WriteTriple("cli_explore");
  const fs::path out = t.dir / "explored.png";
  const RunResult nu = Cdi("explore nonunique --degraded " + t.deg.string() + " --init " + t.res.string() +
                           " --sigma 2 --size 13 --steps 20 --out " + out.string());
  REQUIRE(nu.status == 0);
  CHECK(nu.out.find("DEG_PSNR") != std::string::npos);
  CHECK(fs::exists(out));
  const RunResult ind = Cdi("explore indeterminate --in " + t.deg.string() + " --k2 1.12 --steps 10 --out " +
                            (t.dir / "ind.png").string());
  CHECK(ind.status == 0);
}

TEST_CASE("gen-pairs reports failures and continues") {
  const Triple t = WriteTriple("cli_pairs");
  const fs::path out = t.dir / "pairs";
  const RunResult r = Cdi("gen-pairs --refs " + t.ref.string() + " " + (t.dir / "missing.png").string() +
                          " --specs 'blur(sigma=1)' --out-dir " + out.string());
  CHECK(r.status == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(fs::exists(out / "pairs.json"));
  CHECK(fs::exists(out / "0000_degraded.pgm"));
}

TEST_CASE("eval-2afc reproduces the checked-in golden values") {
  const RunResult rg = Cdi("eval-2afc --manifest " + Fixture("trials.json") + " --metric rgcdi");
  REQUIRE(rg.status == 0);
  CHECK(rg.out == Slurp(Fixture("golden_rgcdi.txt")));
  const RunResult ps = Cdi("eval-2afc --manifest " + Fixture("trials.json") + " --metric psnr");
  REQUIRE(ps.status == 0);
  CHECK(ps.out == Slurp(Fixture("golden_psnr.txt")));
  const RunResult js = Cdi("eval-2afc --manifest " + Fixture("trials.json") + " --metric ssim --json");
  REQUIRE(js.status == 0);
  CHECK(json::parse(js.out)["trials"].size() == 4);
  CHECK(Cdi("eval-2afc --manifest " + Fixture("trials.json") + " --metric lpips").status != 0);
  CHECK(Cdi("eval-2afc --manifest /nonexistent.json").status == 1);
}

}  // namespace
}  // namespace cdi
