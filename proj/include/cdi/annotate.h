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

#ifndef CDI_ANNOTATE_H_
#define CDI_ANNOTATE_H_

// Switch-display 2AFC annotation service.
//
// HTTP API (every JSON payload carries "v": 1):
//
//   GET  /api/trial/next?rater=ID  -> trial payload, or 404 {"error":"no trials remaining"}
//   POST /api/judgment             -> ack {"v":1,"ok":true,"seq":N}
//   GET  /api/export               -> manifest JSON with all recorded judgments
//   GET  /images/{token}           -> PNG
//   GET  /                         -> UI assets
//
// Trial payload:
//
//   {"v":1, "trial_id":"t0", "assignment":"a3", "swapped":false,
//    "images":{"degraded":"/images/..", "degraded_left":"/images/..",
//              "degraded_right":"/images/..", "restored_left":"/images/..",
//              "restored_right":"/images/.."}}
//
// swapped == false means candidate A is shown on the left. Image tokens are
// salted hashes and carry no A/B information.
//
// Judgment body: {"v":1, "trial_id", "rater_id", "timestamp", "toggles",
// "elapsed_ms", and either "choice":"A"|"B" (canonical) or
// "side":"left"|"right" (mapped through the server-side permutation of the
// rater's assignment)}. Judgments go to an append-only JSON-lines log and are
// fsync'ed before the ack; a replay with the same (rater_id, trial_id,
// timestamp) returns the original ack without appending.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "cdi/bench.h"
#include "json.hpp"

namespace cdi {

struct AnnotationOptions {
  std::string manifest_path;
  std::string image_root;  // manifest paths resolve here; defaults to the manifest dir
  std::string log_path;
  std::string cache_dir;  // defaults to log_path + ".cache"
  std::string ui_dir;     // defaults to the bundled ui/ directory
  std::optional<uint64_t> seed;  // A/B permutation and token salt
};

// One line of the judgment log.
struct JudgmentRecord {
  uint64_t seq = 0;
  std::string trial_id;
  std::string rater_id;
  Choice choice = Choice::kA;
  int64_t toggles = 0;
  double elapsed_ms = 0.0;
  std::string timestamp;
  std::string received_at;
};

std::string JudgmentRecordToJson(const JudgmentRecord& r);
JudgmentRecord JudgmentRecordFromJson(const std::string& line);

// Manifest plus log records (in sequence order) as an export TrialSet. Each
// record becomes a Judgment whose extra fields hold seq, toggles,
// elapsed_ms and received_at.
TrialSet MergeJudgments(TrialSet manifest, const std::vector<JudgmentRecord>& records);

// Rebuilds the export JSON from a manifest file and a log file.
std::string ReplayLog(const std::string& manifest_path, const std::string& image_root,
                      const std::string& log_path);

// Thread-safe service state. Construction loads and validates the manifest
// (every referenced image must exist under image_root) and replays an
// existing log.
class AnnotationService {
 public:
  explicit AnnotationService(AnnotationOptions options);
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  // Throws NotFoundError("no trials remaining").
  nlohmann::json NextTrial(const std::string& rater_id);

  // Throws SchemaError for malformed bodies, NotFoundError("unknown trial").
  nlohmann::json RecordJudgment(const nlohmann::json& body);

  std::string ExportJson() const;

  // PNG bytes for an image token; throws NotFoundError for unknown tokens.
  std::vector<uint8_t> ImagePng(const std::string& token);

  const AnnotationOptions& options() const { return options_; }
  size_t record_count() const;

 private:
  enum class Role { kDegraded, kDegradedA, kDegradedB, kRestoredA, kRestoredB };

  struct Assignment {
    std::string id;
    std::string trial_id;
    std::string rater_id;
    bool swapped = false;
  };

  std::string Token(size_t trial_index, Role role) const;
  size_t TrialIndex(const std::string& trial_id) const;
  void AppendRecord(const JudgmentRecord& r);

  AnnotationOptions options_;
  TrialSet manifest_;
  uint64_t salt_ = 0;

  mutable std::mutex mu_;
  std::mt19937_64 rng_;
  std::vector<JudgmentRecord> records_;
  std::map<std::tuple<std::string, std::string, std::string>, uint64_t> dedup_;
  std::vector<size_t> judgment_counts_;
  std::set<std::pair<std::string, std::string>> judged_;  // (rater, trial)
  std::map<std::pair<std::string, std::string>, Assignment> outstanding_;
  std::map<std::string, Assignment> assignments_;
  uint64_t next_assignment_ = 0;
  int log_fd_ = -1;

  std::mutex image_mu_;
  std::map<std::string, std::pair<size_t, Role>> tokens_;
  std::map<std::string, std::vector<uint8_t>> png_cache_;

  friend class AnnotationServer;
};

// HTTP front end. Start() binds (port 0 picks a free port) and serves on a
// background thread; Run() serves on the calling thread.
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationService& service);
  ~AnnotationServer();

  // Returns the bound port; throws Error when the port is unavailable.
  int Start(const std::string& host, int port);
  void Run(const std::string& host, int port);
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cdi

#endif  // CDI_ANNOTATE_H_
