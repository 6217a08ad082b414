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

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cdi/annotate.h"
#include "cdi/degrade.h"
#include "cdi/error.h"
#include "doctest.h"
#include "httplib.h"
#include "testkit.h"

namespace cdi {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Site {
  fs::path dir;
  AnnotationOptions options;
};

// A manifest of n trials without judgments. Candidate A is a light blur of
// the reference and B a heavy one, so their degraded versions differ.
Site MakeSite(const std::string& name, int n) {
  Site s;
  s.dir = testkit::TempDir(name);
  TrialSet ts;
  for (int i = 0; i < n; ++i) {
    const std::string k = std::to_string(i);
    const ImageBuffer ref = testkit::NaturalImage(24, 24, 500 + i, 3);
    SaveImage(ref, (s.dir / ("ref" + k + ".png")).string());
    SaveImage(ApplyDegradation(ref, ParseDegradation("blur(sigma=1)")),
              (s.dir / ("deg" + k + ".png")).string());
    SaveImage(GaussianBlur(ref, 0.4), (s.dir / ("a" + k + ".png")).string());
    SaveImage(GaussianBlur(ref, 2.5), (s.dir / ("b" + k + ".png")).string());
    Trial t;
    t.id = "t" + k;
    t.ref_path = "ref" + k + ".png";
    t.degraded_path = "deg" + k + ".png";
    t.spec_text = "blur(sigma=1)";
    t.restored_a_path = "a" + k + ".png";
    t.restored_b_path = "b" + k + ".png";
    ts.trials.push_back(t);
  }
  SaveManifest(ts, (s.dir / "trials.json").string());
  s.options.manifest_path = (s.dir / "trials.json").string();
  s.options.log_path = (s.dir / "judgments.jsonl").string();
  s.options.seed = 42;
  return s;
}

json Judge(const std::string& trial, const std::string& rater, const std::string& choice,
           const std::string& ts = "2026-03-01T10:00:00Z") {
  return {{"v", 1},         {"trial_id", trial}, {"rater_id", rater}, {"choice", choice},
          {"timestamp", ts}, {"toggles", 3},      {"elapsed_ms", 1200.5}};
}

size_t LineCount(const fs::path& p) {
  std::ifstream in(p);
  size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

std::string Token(const std::string& url) { return url.substr(url.rfind('/') + 1); }

TEST_CASE("judgment records round-trip through json") {
  JudgmentRecord r;
  r.seq = 7;
  r.trial_id = "t1";
  r.rater_id = "alice";
  r.choice = Choice::kB;
  r.toggles = 4;
  r.elapsed_ms = 812.25;
  r.timestamp = "2026-03-01T10:00:00Z";
  r.received_at = "2026-03-01T10:00:01Z";
  const std::string line = JudgmentRecordToJson(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.rfind(R"({"v":1,"seq":7,"trial_id":"t1")", 0) == 0);
  const JudgmentRecord back = JudgmentRecordFromJson(line);
  CHECK(back.seq == 7);
  CHECK(back.choice == Choice::kB);
  CHECK(back.elapsed_ms == 812.25);
  CHECK(JudgmentRecordToJson(back) == line);
}

TEST_CASE("next trial payload hides the candidate identity") {
  Site s = MakeSite("ann_payload", 4);
  AnnotationService svc(s.options);
  const json p = svc.NextTrial("r1");
  CHECK(p["v"] == 1);
  CHECK(p["trial_id"] == "t0");
  CHECK(p["swapped"].is_boolean());
  CHECK(p.contains("assignment"));
  REQUIRE(p["images"].size() == 5);
  std::set<std::string> urls;
  for (const auto& [k, v] : p["images"].items()) {
    const std::string u = v.get<std::string>();
    CHECK(u.rfind("/images/", 0) == 0);
    const std::string tok = Token(u);
    CHECK(tok.find_first_not_of("0123456789abcdef") == std::string::npos);
    urls.insert(u);
  }
  CHECK(urls.size() == 5);
  const std::string text = p.dump();
  for (const char* leak : {"restoredA", "restoredB", "a0.png", "b0.png", "\"A\"", "\"B\""}) {
    CHECK(text.find(leak) == std::string::npos);
  }
  // Asking again before judging returns the same assignment.
  CHECK(svc.NextTrial("r1") == p);
}

TEST_CASE("served images are the candidates and their degradations") {
  Site s = MakeSite("ann_images", 1);
  AnnotationService svc(s.options);
  const json p = svc.NextTrial("r1");
  const bool swapped = p["swapped"];
  const fs::path a = s.dir / "a0.png", b = s.dir / "b0.png";
  const fs::path left = swapped ? b : a, right = swapped ? a : b;
  auto decode = [&](const std::string& key) {
    const std::vector<uint8_t> bytes = svc.ImagePng(Token(p["images"][key]));
    REQUIRE(bytes.size() > 8);
    CHECK(bytes[1] == 'P');
    const fs::path tmp = s.dir / ("decoded_" + key + ".png");
    std::ofstream(tmp, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    return LoadImage(tmp.string());
  };
  CHECK(decode("restored_left") == LoadImage(left.string()));
  CHECK(decode("restored_right") == LoadImage(right.string()));
  CHECK(decode("degraded") == LoadImage((s.dir / "deg0.png").string()));
  const DegradationSpec spec = ParseDegradation("blur(sigma=1)");
  CHECK(decode("degraded_left") == Quantize8(ApplyDegradation(LoadImage(left.string()), spec)));
  // The second request is served from the cache with identical bytes.
  CHECK(svc.ImagePng(Token(p["images"]["degraded_left"])) ==
        svc.ImagePng(Token(p["images"]["degraded_left"])));
  CHECK_THROWS_AS(svc.ImagePng("deadbeef"), NotFoundError);
}

TEST_CASE("side choices are stored canonically") {
  Site s = MakeSite("ann_sides", 1);
  AnnotationService svc(s.options);
  int flipped = 0, straight = 0;
  for (int r = 0; r < 40 && (flipped == 0 || straight == 0); ++r) {
    const std::string rater = "r" + std::to_string(r);
    const json p = svc.NextTrial(rater);
    json body = Judge("t0", rater, "A");
    body.erase("choice");
    body["side"] = "left";
    body["assignment"] = p["assignment"];
    svc.RecordJudgment(body);
    (p["swapped"].get<bool>() ? flipped : straight)++;
  }
  REQUIRE(flipped > 0);
  REQUIRE(straight > 0);
  const json exported = json::parse(svc.ExportJson());
  std::ifstream log(s.options.log_path);
  std::string line;
  size_t i = 0;
  for (const auto& j : exported["trials"][0]["judgments"]) {
    std::getline(log, line);
    CHECK(j["choice"] == json::parse(line)["choice"]);
    ++i;
  }
  CHECK(i == static_cast<size_t>(flipped + straight));
  size_t b_votes = 0;
  for (const auto& j : exported["trials"][0]["judgments"]) b_votes += j["choice"] == "B";
  CHECK(b_votes == static_cast<size_t>(flipped));
}

TEST_CASE("side without an assignment is rejected") {
  Site s = MakeSite("ann_noassign", 1);
  AnnotationService svc(s.options);
  json body = Judge("t0", "r1", "A");
  body.erase("choice");
  body["side"] = "right";
  CHECK_THROWS_AS(svc.RecordJudgment(body), SchemaError);
}

TEST_CASE("assignment policy favours the least judged trial") {
  Site s = MakeSite("ann_policy", 4);
  AnnotationService svc(s.options);
  std::map<std::string, int> counts;
  const std::vector<std::string> raters = {"r1", "r2", "r3"};
  for (int round = 0; round < 4; ++round) {
    for (const std::string& r : raters) {
      const std::string id = svc.NextTrial(r)["trial_id"];
      int min_other = 1 << 30;
      for (const auto& t : {"t0", "t1", "t2", "t3"}) min_other = std::min(min_other, counts[t]);
      // Every trial reaches 2 judgments before any reaches 3.
      if (counts[id] == 2) CHECK(min_other >= 2);
      svc.RecordJudgment(Judge(id, r, "A", "ts-" + std::to_string(round)));
      ++counts[id];
    }
  }
  for (const auto& [id, c] : counts) CHECK(c == 3);
  for (const std::string& r : raters) CHECK_THROWS_AS(svc.NextTrial(r), NotFoundError);
}

TEST_CASE("single trial is exhausted after one judgment") {
  Site s = MakeSite("ann_single", 1);
  AnnotationService svc(s.options);
  svc.NextTrial("r1");
  svc.RecordJudgment(Judge("t0", "r1", "B"));
  try {
    svc.NextTrial("r1");
    FAIL("no error");
  } catch (const NotFoundError& e) {
    CHECK(std::string(e.what()) == "no trials remaining");
  }
  CHECK(svc.NextTrial("r2")["trial_id"] == "t0");
}

TEST_CASE("duplicate submissions append once") {
  Site s = MakeSite("ann_dup", 2);
  AnnotationService svc(s.options);
  const json ack = svc.RecordJudgment(Judge("t1", "r1", "A"));
  CHECK(ack == json{{"v", 1}, {"ok", true}, {"seq", 1}});
  const json again = svc.RecordJudgment(Judge("t1", "r1", "A"));
  CHECK(again["seq"] == 1);
  CHECK(LineCount(s.options.log_path) == 1);
  CHECK(svc.RecordJudgment(Judge("t1", "r1", "A", "later"))["seq"] == 2);
  CHECK(svc.record_count() == 2);
}

TEST_CASE("malformed judgments are schema errors") {
  Site s = MakeSite("ann_bad", 1);
  AnnotationService svc(s.options);
  auto pointer = [&](const json& body) {
    try {
      svc.RecordJudgment(body);
    } catch (const SchemaError& e) {
      return e.pointer();
    }
    return std::string("<none>");
  };
  CHECK(pointer(json::array()) == "/");
  json b = Judge("t0", "r", "A");
  b.erase("rater_id");
  CHECK(pointer(b) == "/rater_id");
  b = Judge("t0", "r", "C");
  CHECK(pointer(b) == "/choice");
  b = Judge("t0", "r", "A");
  b["toggles"] = -1;
  CHECK(pointer(b) == "/toggles");
  b = Judge("t0", "r", "A");
  b["elapsed_ms"] = "slow";
  CHECK(pointer(b) == "/elapsed_ms");
  b = Judge("t0", "r", "A");
  b["v"] = 2;
  CHECK(pointer(b) == "/v");
  b = Judge("t0", "r", "A");
  b.erase("choice");
  CHECK(pointer(b) == "/choice");
  CHECK_THROWS_AS(svc.RecordJudgment(Judge("t9", "r", "A")), NotFoundError);
  CHECK(svc.record_count() == 0);
}

TEST_CASE("log replay restores state and export matches offline replay") {
  Site s = MakeSite("ann_replay", 3);
  std::string exported;
  {
    AnnotationService svc(s.options);
    svc.RecordJudgment(Judge("t0", "r1", "A"));
    svc.RecordJudgment(Judge("t2", "r1", "B"));
    svc.RecordJudgment(Judge("t0", "r2", "B"));
    exported = svc.ExportJson();
  }
  CHECK(ReplayLog(s.options.manifest_path, "", s.options.log_path) == exported);
  // A torn final line from a crash is ignored.
  std::ofstream(s.options.log_path, std::ios::app) << R"({"v":1,"seq":4,"tri)";
  AnnotationService again(s.options);
  CHECK(again.record_count() == 3);
  CHECK(again.ExportJson() == exported);
  CHECK(again.NextTrial("r1")["trial_id"] == "t1");
  CHECK(again.RecordJudgment(Judge("t0", "r1", "A"))["seq"] == 1);

  const TrialSet ts = ParseManifest(exported);
  size_t total = 0;
  for (const Trial& t : ts.trials) total += t.judgments.size();
  CHECK(total == 3);
  CHECK(ts.trials[0].judgments[1].extra["seq"] == 3);
  CHECK(ts.trials[0].judgments[0].extra["toggles"] == 3);
}

TEST_CASE("service refuses broken setups") {
  Site s = MakeSite("ann_broken", 1);
  AnnotationOptions o = s.options;
  fs::remove(s.dir / "b0.png");
  CHECK_THROWS_AS(AnnotationService{o}, Error);
  Site t = MakeSite("ann_broken2", 1);
  o = t.options;
  o.manifest_path = (t.dir / "absent.json").string();
  CHECK_THROWS_AS(AnnotationService{o}, Error);
  std::ofstream(t.dir / "bad.json") << R"({"v":1,"trials":[{"id":"x"}]})";
  o.manifest_path = (t.dir / "bad.json").string();
  CHECK_THROWS_AS(AnnotationService{o}, SchemaError);
}

TEST_CASE("http round trip") {
  Site s = MakeSite("ann_http", 4);
  fs::create_directories(s.dir / "ui");
  std::ofstream(s.dir / "ui" / "index.html") << "<html>annotate</html>";
  std::ofstream(s.dir / "ui" / "app.js") << "console.log(1);";
  s.options.ui_dir = (s.dir / "ui").string();
  AnnotationService svc(s.options);
  AnnotationServer server(svc);
  const int port = server.Start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);

  auto next = cli.Get("/api/trial/next?rater=r1");
  REQUIRE(next);
  CHECK(next->status == 200);
  const json p = json::parse(next->body);
  CHECK(p["images"].size() == 5);

  auto img = cli.Get(p["images"]["degraded_right"].get<std::string>());
  REQUIRE(img);
  CHECK(img->status == 200);
  CHECK(img->get_header_value("Content-Type") == "image/png");
  CHECK(img->body.substr(1, 3) == "PNG");
  CHECK(cli.Get("/images/0123abcd")->status == 404);

  for (int i = 0; i < 3; ++i) {
    const std::string id = "t" + std::to_string(i);
    auto res = cli.Post("/api/judgment", Judge(id, "r1", i == 1 ? "B" : "A").dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["seq"] == i + 1);
  }
  auto exp = cli.Get("/api/export");
  REQUIRE(exp);
  const TrialSet ts = ParseManifest(exp->body);
  size_t total = 0;
  for (const Trial& t : ts.trials) total += t.judgments.size();
  CHECK(total == 3);
  CHECK(exp->body == ReplayLog(s.options.manifest_path, "", s.options.log_path));

  auto unknown = cli.Post("/api/judgment", Judge("nope", "r1", "A").dump(), "application/json");
  CHECK(unknown->status == 404);
  CHECK(json::parse(unknown->body)["error"] == "unknown trial");
  auto garbage = cli.Post("/api/judgment", "{not json", "application/json");
  CHECK(garbage->status == 400);
  CHECK(json::parse(garbage->body).contains("error"));
  CHECK(cli.Post("/api/judgment", R"({"v":1,"trial_id":"t0"})", "application/json")->status == 400);
  CHECK(cli.Get("/api/trial/next")->status == 400);

  CHECK(cli.Post("/api/judgment", Judge("t3", "r1", "A").dump(), "application/json")->status == 200);
  auto done = cli.Get("/api/trial/next?rater=r1");
  CHECK(done->status == 404);
  CHECK(json::parse(done->body)["error"] == "no trials remaining");

  auto index = cli.Get("/");
  REQUIRE(index);
  CHECK(index->status == 200);
  CHECK(index->body.find("annotate") != std::string::npos);
  CHECK(cli.Get("/app.js")->body == "console.log(1);");
  server.Stop();
}

TEST_CASE("http server refuses a port in use") {
  Site s = MakeSite("ann_port", 1);
  AnnotationService svc(s.options);
  AnnotationServer first(svc);
  const int port = first.Start("127.0.0.1", 0);
  AnnotationServer second(svc);
  CHECK_THROWS_AS(second.Start("127.0.0.1", port), Error);
  first.Stop();
}

TEST_CASE("eight concurrent raters over http") {
  Site s = MakeSite("ann_stress", 6);
  AnnotationService svc(s.options);
  AnnotationServer server(svc);
  const int port = server.Start("127.0.0.1", 0);
  std::atomic<int> submitted{0}, failures{0};
  std::vector<std::thread> raters;
  for (int r = 0; r < 8; ++r) {
    raters.emplace_back([&, r] {
      httplib::Client cli("127.0.0.1", port);
      const std::string id = "rater" + std::to_string(r);
      for (int k = 0; k < 100; ++k) {
        auto next = cli.Get("/api/trial/next?rater=" + id);
        if (!next) {
          ++failures;
          return;
        }
        if (next->status == 404) return;
        const json p = json::parse(next->body);
        json body = Judge(p["trial_id"], id, "A", "ts" + std::to_string(k));
        body.erase("choice");
        body["side"] = k % 2 ? "left" : "right";
        body["assignment"] = p["assignment"];
        auto ack = cli.Post("/api/judgment", body.dump(), "application/json");
        if (!ack || ack->status != 200) {
          ++failures;
          return;
        }
        ++submitted;
      }
    });
  }
  for (auto& t : raters) t.join();
  server.Stop();
  CHECK(failures == 0);
  CHECK(submitted == 48);
  CHECK(LineCount(s.options.log_path) == 48);
  std::ifstream in(s.options.log_path);
  std::set<uint64_t> seqs;
  for (std::string line; std::getline(in, line);) seqs.insert(JudgmentRecordFromJson(line).seq);
  CHECK(seqs.size() == 48);
  CHECK(*seqs.begin() == 1);
  CHECK(*seqs.rbegin() == 48);
  CHECK(svc.ExportJson() == ReplayLog(s.options.manifest_path, "", s.options.log_path));
}

}  // namespace
}  // namespace cdi
