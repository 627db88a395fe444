// Copyright 2026 The CTA Facts Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// HTTP conversation API.
//
//   POST /v1/sessions                 -> 201 {session_id}
//   POST /v1/sessions/{id}/turns      -> 200 {assistant_text, display, phase, policy_trace, ...}
//   GET  /v1/sessions/{id}            -> 200 transcript (+ outcome once ended)
//   GET  /healthz                     -> 200 or 503
//
// Each session is a JSONL file in session_dir: a header line, then one
// record per turn. The user turn and its reply are appended together and
// flushed before the response is sent. On startup every session file is
// replayed through the engine, so a restart with the same session_dir picks
// up where it left off. A torn trailing line is dropped.

#ifndef CTAFACTS_SERVICE_H_
#define CTAFACTS_SERVICE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "ctafacts/engine.h"
#include "json.hpp"

namespace ctafacts {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path fact_store_path;
  std::filesystem::path corpus_path;
  std::filesystem::path session_dir = "sessions";
  PolicyParams policy;
  bool facts_enabled = true;
  std::size_t max_body_bytes = 16 * 1024;
  std::size_t max_utterance_chars = 1000;
  std::size_t max_sessions = 100000;
};

// Relative paths resolve against `base_dir`. Throws Error on bad values.
ServiceConfig service_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ServiceConfig& config);

// CTA_LISTEN (host:port or :port), CTA_FACT_STORE, CTA_CORPUS, CTA_SESSION_DIR.
void apply_env_overrides(ServiceConfig& config);

// Parses "host:port", ":port" or "port". Throws Error.
void parse_listen_address(const std::string& text, std::string& host, int& port);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// Transport-independent request handling. Thread-safe.
class ConversationService {
 public:
  // Loads and validates the store and corpus. On failure the service stays
  // up but answers 503; see ready() and load_error().
  explicit ConversationService(ServiceConfig config);

  bool ready() const { return engine_ != nullptr; }
  const std::string& load_error() const { return load_error_; }
  const ServiceConfig& config() const { return config_; }

  ApiResponse create_session();
  ApiResponse post_turn(const std::string& session_id, const std::string& request_body);
  ApiResponse get_session(const std::string& session_id) const;
  ApiResponse health() const;

  std::size_t session_count() const;
  std::size_t resumed_count() const { return resumed_; }

  // Test hook: runs while the session lock is held during a turn.
  void set_turn_hook(std::function<void()> hook) { turn_hook_ = std::move(hook); }

 private:
  struct Entry {
    std::mutex mu;
    Session session;
  };

  std::shared_ptr<Entry> lookup(const std::string& id) const;
  std::filesystem::path session_path(const std::string& id) const;
  void resume_sessions();
  void append_records(const std::string& id, const std::string& lines) const;

  ServiceConfig config_;
  std::string load_error_;
  std::unique_ptr<Engine> engine_;
  mutable std::shared_mutex sessions_mu_;
  std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
  std::size_t resumed_ = 0;
  std::function<void()> turn_hook_;
};

// 128 random bits as 32 lowercase hex digits.
std::string new_session_id();

// Reads a session file back into its turns. Ignores a trailing line that does
// not parse. Throws ParseError on a bad header or a bad line in the middle.
struct SessionFile {
  std::string session_id;
  std::vector<Turn> turns;
  bool truncated_tail = false;
};
SessionFile read_session_file(const std::filesystem::path& path);

class HttpServer {
 public:
  explicit HttpServer(ConversationService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port or throws Error.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ctafacts

#endif  // CTAFACTS_SERVICE_H_
