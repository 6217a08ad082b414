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

#include "cdi/annotate.h"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "cdi/degrade.h"
#include "cdi/error.h"
#include "httplib.h"

#ifndef CDI_UI_DIR
#define CDI_UI_DIR "ui"
#endif

namespace cdi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string NowIso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      now.time_since_epoch()) % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(ms.count()));
  return buf;
}

uint64_t Mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<JudgmentRecord> ReadLog(const std::string& path) {
  std::vector<JudgmentRecord> records;
  std::ifstream in(path);
  if (!in) return records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (in.eof()) {
      // A final line without newline is a torn write; ignore it.
      break;
    }
    try {
      records.push_back(JudgmentRecordFromJson(line));
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

TrialSet LoadServedManifest(const std::string& manifest_path, const std::string& image_root) {
  TrialSet ts = LoadManifest(manifest_path);
  if (!image_root.empty()) ts.base_dir = image_root;
  return ts;
}

}  // namespace

std::string JudgmentRecordToJson(const JudgmentRecord& r) {
  nlohmann::ordered_json j;
  j["v"] = 1;
  j["seq"] = r.seq;
  j["trial_id"] = r.trial_id;
  j["rater_id"] = r.rater_id;
  j["choice"] = ChoiceName(r.choice);
  j["toggles"] = r.toggles;
  j["elapsed_ms"] = r.elapsed_ms;
  j["timestamp"] = r.timestamp;
  j["received_at"] = r.received_at;
  return j.dump();
}

JudgmentRecord JudgmentRecordFromJson(const std::string& line) {
  const json j = json::parse(line);
  JudgmentRecord r;
  r.seq = j.at("seq").get<uint64_t>();
  r.trial_id = j.at("trial_id").get<std::string>();
  r.rater_id = j.at("rater_id").get<std::string>();
  r.choice = ParseChoice(j.at("choice").get<std::string>());
  r.toggles = j.at("toggles").get<int64_t>();
  r.elapsed_ms = j.at("elapsed_ms").get<double>();
  r.timestamp = j.at("timestamp").get<std::string>();
  r.received_at = j.at("received_at").get<std::string>();
  return r;
}

TrialSet MergeJudgments(TrialSet manifest, const std::vector<JudgmentRecord>& records) {
  for (const JudgmentRecord& r : records) {
    Trial* trial = nullptr;
    for (Trial& t : manifest.trials) {
      if (t.id == r.trial_id) trial = &t;
    }
    if (!trial) throw NotFoundError("log references unknown trial " + r.trial_id);
    Judgment jd;
    jd.rater_id = r.rater_id;
    jd.choice = r.choice;
    jd.timestamp = r.timestamp;
    jd.extra["seq"] = r.seq;
    jd.extra["toggles"] = r.toggles;
    jd.extra["elapsed_ms"] = r.elapsed_ms;
    jd.extra["received_at"] = r.received_at;
    trial->judgments.push_back(std::move(jd));
  }
  return manifest;
}

std::string ReplayLog(const std::string& manifest_path, const std::string& image_root,
                      const std::string& log_path) {
  return ManifestToJson(
      MergeJudgments(LoadServedManifest(manifest_path, image_root), ReadLog(log_path)));
}

AnnotationService::AnnotationService(AnnotationOptions options)
    : options_(std::move(options)) {
  if (options_.log_path.empty()) throw Error("annotation service needs a log path");
  if (options_.cache_dir.empty()) options_.cache_dir = options_.log_path + ".cache";
  if (options_.ui_dir.empty()) options_.ui_dir = CDI_UI_DIR;
  manifest_ = LoadServedManifest(options_.manifest_path, options_.image_root);
  for (const Trial& t : manifest_.trials) {
    std::vector<std::string> paths = {t.degraded_path, t.restored_a_path, t.restored_b_path};
    for (const std::string& p : paths) {
      if (!fs::exists(manifest_.Resolve(p))) {
        throw Error("trial " + t.id + ": image not found: " + manifest_.Resolve(p));
      }
    }
  }

  const uint64_t seed = options_.seed ? *options_.seed : std::random_device{}();
  rng_.seed(seed);
  salt_ = Mix64(seed ^ 0x5A17C0DEull);

  judgment_counts_.assign(manifest_.trials.size(), 0);
  for (size_t i = 0; i < manifest_.trials.size(); ++i) {
    const Trial& t = manifest_.trials[i];
    judgment_counts_[i] = t.judgments.size();
    for (const Judgment& jd : t.judgments) judged_.insert({jd.rater_id, t.id});
  }
  for (const JudgmentRecord& r : ReadLog(options_.log_path)) {
    const size_t index = TrialIndex(r.trial_id);
    ++judgment_counts_[index];
    judged_.insert({r.rater_id, r.trial_id});
    dedup_[{r.rater_id, r.trial_id, r.timestamp}] = r.seq;
    records_.push_back(r);
  }

  const fs::path log_dir = fs::path(options_.log_path).parent_path();
  if (!log_dir.empty()) fs::create_directories(log_dir);
  log_fd_ = ::open(options_.log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (log_fd_ < 0) throw Error("cannot open judgment log " + options_.log_path);
  fs::create_directories(options_.cache_dir);

  static constexpr Role kRoles[] = {Role::kDegraded, Role::kDegradedA, Role::kDegradedB,
                                    Role::kRestoredA, Role::kRestoredB};
  for (size_t i = 0; i < manifest_.trials.size(); ++i) {
    for (Role role : kRoles) tokens_[Token(i, role)] = {i, role};
  }
}

AnnotationService::~AnnotationService() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

size_t AnnotationService::TrialIndex(const std::string& trial_id) const {
  for (size_t i = 0; i < manifest_.trials.size(); ++i) {
    if (manifest_.trials[i].id == trial_id) return i;
  }
  throw NotFoundError("unknown trial");
}

std::string AnnotationService::Token(size_t trial_index, Role role) const {
  const uint64_t h =
      Mix64(salt_ ^ Mix64(trial_index * 8 + static_cast<uint64_t>(role)));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

size_t AnnotationService::record_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_.size();
}

json AnnotationService::NextTrial(const std::string& rater_id) {
  if (rater_id.empty()) throw SchemaError("/rater", "rater id is required");
  std::lock_guard<std::mutex> lock(mu_);
  // Load = recorded judgments plus assignments other raters still hold.
  std::vector<size_t> load = judgment_counts_;
  for (const auto& [key, a] : outstanding_) {
    if (key.first != rater_id) ++load[TrialIndex(a.trial_id)];
  }
  std::optional<size_t> best;
  for (size_t i = 0; i < manifest_.trials.size(); ++i) {
    if (judged_.count({rater_id, manifest_.trials[i].id})) continue;
    if (!best || load[i] < load[*best]) best = i;
  }
  if (!best) throw NotFoundError("no trials remaining");
  const Trial& trial = manifest_.trials[*best];

  const auto key = std::make_pair(rater_id, trial.id);
  auto it = outstanding_.find(key);
  if (it == outstanding_.end()) {
    Assignment a;
    a.id = "a" + std::to_string(next_assignment_++);
    a.trial_id = trial.id;
    a.rater_id = rater_id;
    a.swapped = (rng_() & 1) != 0;
    assignments_[a.id] = a;
    it = outstanding_.emplace(key, a).first;
  }
  const Assignment& a = it->second;
  auto url = [&](Role role) { return "/images/" + Token(*best, role); };
  const Role left_deg = a.swapped ? Role::kDegradedB : Role::kDegradedA;
  const Role right_deg = a.swapped ? Role::kDegradedA : Role::kDegradedB;
  const Role left_rest = a.swapped ? Role::kRestoredB : Role::kRestoredA;
  const Role right_rest = a.swapped ? Role::kRestoredA : Role::kRestoredB;
  return json{{"v", 1},
              {"trial_id", trial.id},
              {"assignment", a.id},
              {"swapped", a.swapped},
              {"images",
               {{"degraded", url(Role::kDegraded)},
                {"degraded_left", url(left_deg)},
                {"degraded_right", url(right_deg)},
                {"restored_left", url(left_rest)},
                {"restored_right", url(right_rest)}}}};
}

json AnnotationService::RecordJudgment(const json& body) {
  if (!body.is_object()) throw SchemaError("/", "expected JSON object");
  auto str = [&](const char* key) {
    if (!body.contains(key) || !body[key].is_string() || body[key].get<std::string>().empty()) {
      throw SchemaError(std::string("/") + key, "expected non-empty string");
    }
    return body[key].get<std::string>();
  };
  if (body.contains("v") && body["v"] != 1) throw SchemaError("/v", "unsupported version");
  JudgmentRecord r;
  r.trial_id = str("trial_id");
  r.rater_id = str("rater_id");
  r.timestamp = str("timestamp");
  if (body.contains("toggles")) {
    if (!body["toggles"].is_number_integer() || body["toggles"].get<int64_t>() < 0) {
      throw SchemaError("/toggles", "expected non-negative integer");
    }
    r.toggles = body["toggles"].get<int64_t>();
  }
  if (body.contains("elapsed_ms")) {
    if (!body["elapsed_ms"].is_number() || body["elapsed_ms"].get<double>() < 0) {
      throw SchemaError("/elapsed_ms", "expected non-negative number");
    }
    r.elapsed_ms = body["elapsed_ms"].get<double>();
  }

  std::lock_guard<std::mutex> lock(mu_);
  const size_t index = TrialIndex(r.trial_id);
  const auto dup = dedup_.find({r.rater_id, r.trial_id, r.timestamp});
  if (dup != dedup_.end()) {
    return json{{"v", 1}, {"ok", true}, {"seq", dup->second}, {"duplicate", true}};
  }

  const auto key = std::make_pair(r.rater_id, r.trial_id);
  if (body.contains("choice")) {
    if (!body["choice"].is_string()) throw SchemaError("/choice", "expected \"A\" or \"B\"");
    const std::string c = body["choice"].get<std::string>();
    if (c != "A" && c != "B") throw SchemaError("/choice", "expected \"A\" or \"B\"");
    r.choice = ParseChoice(c);
  } else if (body.contains("side")) {
    if (!body["side"].is_string()) throw SchemaError("/side", "expected \"left\" or \"right\"");
    const std::string side = body["side"].get<std::string>();
    if (side != "left" && side != "right") {
      throw SchemaError("/side", "expected \"left\" or \"right\"");
    }
    const Assignment* a = nullptr;
    if (body.contains("assignment") && body["assignment"].is_string()) {
      const auto it = assignments_.find(body["assignment"].get<std::string>());
      if (it != assignments_.end() && it->second.trial_id == r.trial_id &&
          it->second.rater_id == r.rater_id) {
        a = &it->second;
      }
    } else if (const auto it = outstanding_.find(key); it != outstanding_.end()) {
      a = &it->second;
    }
    if (!a) throw SchemaError("/assignment", "no assignment to map the chosen side through");
    const bool left = side == "left";
    r.choice = (left != a->swapped) ? Choice::kA : Choice::kB;
  } else {
    throw SchemaError("/choice", "missing required field");
  }

  r.seq = records_.size() + 1;
  r.received_at = NowIso8601();
  AppendRecord(r);
  records_.push_back(r);
  dedup_[{r.rater_id, r.trial_id, r.timestamp}] = r.seq;
  ++judgment_counts_[index];
  judged_.insert(key);
  outstanding_.erase(key);
  return json{{"v", 1}, {"ok", true}, {"seq", r.seq}};
}

void AnnotationService::AppendRecord(const JudgmentRecord& r) {
  const std::string line = JudgmentRecordToJson(r) + "\n";
  size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(log_fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("judgment log write failed");
    }
    written += static_cast<size_t>(n);
  }
  if (::fsync(log_fd_) != 0) throw Error("judgment log fsync failed");
}

std::string AnnotationService::ExportJson() const {
  std::lock_guard<std::mutex> lock(mu_);
  return ManifestToJson(MergeJudgments(manifest_, records_));
}

std::vector<uint8_t> AnnotationService::ImagePng(const std::string& token) {
  std::lock_guard<std::mutex> lock(image_mu_);
  if (const auto it = png_cache_.find(token); it != png_cache_.end()) return it->second;
  const auto tok = tokens_.find(token);
  if (tok == tokens_.end()) throw NotFoundError("unknown image");
  const auto [index, role] = tok->second;
  const Trial& t = manifest_.trials[index];

  std::vector<uint8_t> png;
  if (role == Role::kDegradedA || role == Role::kDegradedB) {
    const fs::path cached = fs::path(options_.cache_dir) / (token + ".png");
    if (fs::exists(cached)) {
      std::ifstream in(cached, std::ios::binary);
      png.assign(std::istreambuf_iterator<char>(in), {});
    } else {
      const std::string& src =
          role == Role::kDegradedA ? t.restored_a_path : t.restored_b_path;
      const ImageBuffer degraded =
          ApplyDegradation(LoadImage(manifest_.Resolve(src)), ParseDegradation(t.spec_text));
      png = EncodePng(degraded);
      const fs::path tmp = cached.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(png.data()),
                  static_cast<std::streamsize>(png.size()));
      }
      fs::rename(tmp, cached);
    }
  } else {
    const std::string& src = role == Role::kDegraded    ? t.degraded_path
                             : role == Role::kRestoredA ? t.restored_a_path
                                                        : t.restored_b_path;
    png = EncodePng(LoadImage(manifest_.Resolve(src)));
  }
  png_cache_[token] = png;
  return png;
}

struct AnnotationServer::Impl {
  AnnotationService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(AnnotationService& s) : service(s) {
    // The library default adds SO_REUSEPORT, which lets a second server
    // silently share a port that is already in use.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    Routes();
  }

  static void SendError(httplib::Response& res, int status, const std::string& msg) {
    res.status = status;
    res.set_content(json{{"v", 1}, {"error", msg}}.dump(), "application/json");
  }

  template <typename Fn>
  static void Guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const NotFoundError& e) {
      SendError(res, 404, e.what());
    } catch (const SchemaError& e) {
      SendError(res, 400, e.what());
    } catch (const json::exception& e) {
      SendError(res, 400, std::string("malformed body: ") + e.what());
    } catch (const std::exception& e) {
      SendError(res, 500, e.what());
    }
  }

  void Routes() {
    server.Get("/api/trial/next", [this](const httplib::Request& req, httplib::Response& res) {
      Guarded(res, [&] {
        const json payload = service.NextTrial(req.get_param_value("rater"));
        res.set_content(payload.dump(), "application/json");
      });
    });
    server.Post("/api/judgment", [this](const httplib::Request& req, httplib::Response& res) {
      Guarded(res, [&] {
        const json ack = service.RecordJudgment(json::parse(req.body));
        res.set_content(ack.dump(), "application/json");
      });
    });
    server.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
      Guarded(res, [&] { res.set_content(service.ExportJson(), "application/json"); });
    });
    server.Get(R"(/images/([0-9a-f]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 Guarded(res, [&] {
                   const auto png = service.ImagePng(req.matches[1]);
                   res.set_content(std::string(png.begin(), png.end()), "image/png");
                 });
               });
    const std::string& ui = service.options().ui_dir;
    if (fs::is_directory(ui)) server.set_mount_point("/", ui);
    server.Get("/", [ui](const httplib::Request&, httplib::Response& res) {
      const fs::path index = fs::path(ui) / "index.html";
      if (fs::exists(index)) {
        res.set_content(ReadText(index.string()), "text/html");
      } else {
        res.set_content("<!doctype html><title>CDI annotation</title>"
                        "<p>UI assets not installed.</p>",
                        "text/html");
      }
    });
  }
};

AnnotationServer::AnnotationServer(AnnotationService& service)
    : impl_(std::make_unique<Impl>(service)) {}

AnnotationServer::~AnnotationServer() { Stop(); }

int AnnotationServer::Start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void AnnotationServer::Run(const std::string& host, int port) {
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  impl_->server.listen_after_bind();
}

void AnnotationServer::Stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace cdi
