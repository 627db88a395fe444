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

#include "ctafacts/service.h"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "ctafacts/store_io.h"
#include "ctafacts/text.h"
#include "httplib.h"

namespace ctafacts {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  return ApiResponse{status, json{{"error", json{{"code", code}, {"message", message}}}}};
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

json session_header(const std::string& id, const ServiceConfig& config) {
  return json{{"format_version", kFormatVersion},
              {"kind", "session"},
              {"session_id", id},
              {"policy", to_json(config.policy)},
              {"facts_enabled", config.facts_enabled}};
}

void log_event(const json& event) {
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << event.dump() << "\n";
}

}  // namespace

void parse_listen_address(const std::string& text, std::string& host, int& port) {
  std::string h = host;
  std::string p = text;
  if (auto colon = text.rfind(':'); colon != std::string::npos) {
    if (colon > 0) h = text.substr(0, colon);
    p = text.substr(colon + 1);
  }
  char* end = nullptr;
  errno = 0;
  long value = std::strtol(p.c_str(), &end, 10);
  if (p.empty() || *end != '\0' || errno != 0 || value < 0 || value > 65535) {
    throw Error("invalid listen address '" + text + "'");
  }
  host = h;
  port = static_cast<int>(value);
}

ServiceConfig service_config_from_json(const json& j, const fs::path& base_dir) {
  ServiceConfig c;
  try {
    if (auto it = j.find("listen"); it != j.end()) {
      parse_listen_address(it->get<std::string>(), c.host, c.port);
    }
    if (auto it = j.find("fact_store_path"); it != j.end()) {
      c.fact_store_path = resolve(it->get<std::string>(), base_dir);
    }
    if (auto it = j.find("corpus_path"); it != j.end()) {
      c.corpus_path = resolve(it->get<std::string>(), base_dir);
    }
    if (auto it = j.find("session_dir"); it != j.end()) {
      c.session_dir = resolve(it->get<std::string>(), base_dir);
    }
    if (auto it = j.find("policy"); it != j.end()) c.policy = policy_params_from_json(*it);
    c.facts_enabled = j.value("facts_enabled", c.facts_enabled);
    if (auto it = j.find("limits"); it != j.end()) {
      c.max_body_bytes = it->value("max_body_bytes", c.max_body_bytes);
      c.max_utterance_chars = it->value("max_utterance_chars", c.max_utterance_chars);
      c.max_sessions = it->value("max_sessions", c.max_sessions);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("invalid service config: ") + e.what());
  }
  if (c.max_body_bytes == 0 || c.max_utterance_chars == 0 || c.max_sessions == 0) {
    throw Error("service limits must be positive");
  }
  return c;
}

json to_json(const ServiceConfig& c) {
  return json{{"listen", c.host + ":" + std::to_string(c.port)},
              {"fact_store_path", c.fact_store_path.string()},
              {"corpus_path", c.corpus_path.string()},
              {"session_dir", c.session_dir.string()},
              {"policy", to_json(c.policy)},
              {"facts_enabled", c.facts_enabled},
              {"limits",
               json{{"max_body_bytes", c.max_body_bytes},
                    {"max_utterance_chars", c.max_utterance_chars},
                    {"max_sessions", c.max_sessions}}}};
}

void apply_env_overrides(ServiceConfig& c) {
  if (const char* v = std::getenv("CTA_LISTEN"); v && *v) parse_listen_address(v, c.host, c.port);
  if (const char* v = std::getenv("CTA_FACT_STORE"); v && *v) c.fact_store_path = v;
  if (const char* v = std::getenv("CTA_CORPUS"); v && *v) c.corpus_path = v;
  if (const char* v = std::getenv("CTA_SESSION_DIR"); v && *v) c.session_dir = v;
}

std::string new_session_id() {
  static std::mutex mu;
  static std::random_device device;
  std::lock_guard lock(mu);
  std::ostringstream out;
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(device()));
    out << buf;
  }
  return out.str();
}

SessionFile read_session_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  bool ends_with_newline = true;
  while (std::getline(in, line)) {
    ends_with_newline = !in.eof();
    lines.push_back(line);
  }
  SessionFile file;
  if (lines.empty()) throw ParseError(0, "format_version", "empty session file");
  json header;
  try {
    header = json::parse(lines[0]);
  } catch (const json::exception& e) {
    throw ParseError(0, "", std::string("bad session header: ") + e.what());
  }
  if (header.value("format_version", -1) != kFormatVersion) {
    throw ParseError(0, "format_version", "unsupported session file version");
  }
  file.session_id = header.value("session_id", "");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const bool last = i + 1 == lines.size();
    try {
      file.turns.push_back(turn_from_json(json::parse(lines[i])));
    } catch (const std::exception& e) {
      if (last) {
        file.truncated_tail = true;
        break;
      }
      throw ParseError(i, "", std::string("bad turn record: ") + e.what());
    }
    if (last && !ends_with_newline) file.truncated_tail = true;
  }
  return file;
}

ConversationService::ConversationService(ServiceConfig config) : config_(std::move(config)) {
  try {
    config_.policy.validate();
    auto corpus = std::make_shared<TaskCorpus>(read_corpus(config_.corpus_path));
    if (auto report = validate_corpus(*corpus); !report.ok()) {
      throw Error("corpus has " + std::to_string(report.violations.size()) +
                  " violation(s), first: " + report.violations.front().message);
    }
    FactStore store = read_fact_store(config_.fact_store_path);
    if (auto report = validate_store(store); !report.ok()) {
      throw Error("fact store has " + std::to_string(report.violations.size()) +
                  " violation(s), first: " + report.violations.front().message);
    }
    for (const auto& fact : store.facts) {
      for (const auto& ref : fact.linked_steps) {
        if (!corpus->step(ref)) {
          throw Error("fact " + fact.id + " links to unknown step " + ref.str());
        }
      }
    }
    auto catalog = std::make_shared<FactCatalog>(std::move(store));
    fs::create_directories(config_.session_dir);
    engine_ = std::make_unique<Engine>(corpus, catalog,
                                       EngineConfig{config_.policy, config_.facts_enabled});
    resume_sessions();
  } catch (const std::exception& e) {
    engine_.reset();
    load_error_ = e.what();
    log_event(json{{"event", "startup_failed"}, {"error", load_error_}});
  }
}

fs::path ConversationService::session_path(const std::string& id) const {
  return config_.session_dir / (id + ".jsonl");
}

void ConversationService::resume_sessions() {
  for (const auto& dirent : fs::directory_iterator(config_.session_dir)) {
    if (!dirent.is_regular_file() || dirent.path().extension() != ".jsonl") continue;
    const std::string id = dirent.path().stem().string();
    try {
      SessionFile file = read_session_file(dirent.path());
      if (file.session_id != id) throw Error("header id does not match file name");
      // Only complete user/assistant pairs count; a lone user turn was in
      // flight when the process stopped.
      std::vector<std::string> utterances;
      std::vector<std::string> replies;
      for (std::size_t i = 0; i + 1 < file.turns.size(); i += 2) {
        if (file.turns[i].speaker != Speaker::kUser ||
            file.turns[i + 1].speaker != Speaker::kAssistant) {
          throw Error("turn records out of order");
        }
        utterances.push_back(file.turns[i].text);
        replies.push_back(file.turns[i + 1].text);
      }
      auto entry = std::make_shared<Entry>();
      entry->session = replay_session(*engine_, id, utterances);
      for (std::size_t k = 0; k < replies.size(); ++k) {
        if (entry->session.turn_log[2 * k + 1].text != replies[k]) {
          log_event(json{{"event", "resume_diverged"}, {"session_id", id}, {"turn", 2 * k + 1}});
          break;
        }
      }
      if (file.truncated_tail || file.turns.size() % 2 != 0) {
        std::string contents = session_header(id, config_).dump() + "\n";
        for (const auto& t : entry->session.turn_log) contents += to_json(t).dump() + "\n";
        write_file_atomic(dirent.path(), contents);
      }
      sessions_.emplace(id, std::move(entry));
      ++resumed_;
    } catch (const std::exception& e) {
      log_event(json{{"event", "resume_failed"}, {"session_id", id}, {"error", e.what()}});
    }
  }
  if (resumed_ > 0) log_event(json{{"event", "resumed"}, {"sessions", resumed_}});
}

void ConversationService::append_records(const std::string& id, const std::string& lines) const {
  const std::string path = session_path(id).string();
  int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (fd < 0) throw Error("cannot append to " + path + ": " + std::strerror(errno));
  std::size_t written = 0;
  while (written < lines.size()) {
    ssize_t n = ::write(fd, lines.data() + written, lines.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd);
      throw Error("write failed on " + path + ": " + std::strerror(err));
    }
    written += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

std::shared_ptr<ConversationService::Entry> ConversationService::lookup(
    const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t ConversationService::session_count() const {
  std::shared_lock lock(sessions_mu_);
  return sessions_.size();
}

ApiResponse ConversationService::health() const {
  if (!ready()) return error_response(503, "not_ready", load_error_);
  return ApiResponse{200, json{{"status", "ok"}, {"sessions", session_count()}}};
}

ApiResponse ConversationService::create_session() {
  if (!ready()) return error_response(503, "not_ready", "fact store not loaded: " + load_error_);
  if (session_count() >= config_.max_sessions) {
    return error_response(503, "session_limit", "too many sessions");
  }
  auto entry = std::make_shared<Entry>();
  std::string id;
  {
    std::unique_lock lock(sessions_mu_);
    do {
      id = new_session_id();
    } while (sessions_.count(id));
    entry->session = engine_->start_session(id);
    sessions_.emplace(id, entry);
  }
  try {
    write_file_atomic(session_path(id), session_header(id, config_).dump() + "\n");
  } catch (const std::exception& e) {
    std::unique_lock lock(sessions_mu_);
    sessions_.erase(id);
    return error_response(500, "storage", e.what());
  }
  return ApiResponse{201, json{{"session_id", id}, {"phase", "searching"}}};
}

ApiResponse ConversationService::post_turn(const std::string& id, const std::string& body) {
  if (!ready()) return error_response(503, "not_ready", "fact store not loaded: " + load_error_);
  auto entry = valid_session_id(id) ? lookup(id) : nullptr;
  if (!entry) return error_response(404, "unknown_session", "no session " + id);

  if (body.size() > config_.max_body_bytes) {
    return error_response(413, "too_large", "request body too large");
  }
  std::string utterance;
  try {
    json request = json::parse(body);
    if (!request.is_object() || !request.contains("utterance") ||
        !request["utterance"].is_string()) {
      return error_response(400, "bad_request", "body must be {\"utterance\": string}");
    }
    utterance = request["utterance"].get<std::string>();
  } catch (const json::exception&) {
    return error_response(400, "bad_request", "body is not valid JSON");
  }
  if (text::trim(utterance).empty()) {
    return error_response(400, "empty_utterance", "utterance is empty");
  }
  if (utterance.size() > config_.max_utterance_chars) {
    return error_response(413, "too_large", "utterance too long");
  }

  std::unique_lock lock(entry->mu, std::try_to_lock);
  if (!lock.owns_lock()) return error_response(409, "turn_in_progress", "turn in progress");
  if (turn_hook_) turn_hook_();
  Session& s = entry->session;
  if (s.phase == SessionPhase::kEnded) return error_response(409, "session_ended", "session has ended");

  // Work on a copy so a failed write leaves the in-memory session matching
  // the file.
  Session next = s;
  Turn reply;
  try {
    reply = engine_->handle_turn(next, utterance);
  } catch (const SessionEndedError& e) {
    return error_response(409, "session_ended", e.what());
  } catch (const Error& e) {
    return error_response(400, "bad_request", e.what());
  }
  const Turn& user_turn = next.turn_log[next.turn_log.size() - 2];
  try {
    append_records(id, to_json(user_turn).dump() + "\n" + to_json(reply).dump() + "\n");
  } catch (const std::exception& e) {
    return error_response(500, "storage", e.what());
  }
  s = std::move(next);

  json out{{"session_id", id},
           {"turn_index", reply.index},
           {"assistant_text", reply.text},
           {"display", to_json(reply).value("display", json::object())},
           {"phase", std::string(to_string(s.phase))},
           {"policy_trace", reply.policy_trace ? to_json(reply)["policy_trace"] : json(nullptr)},
           {"fact_event", reply.fact_event ? json(std::string(to_string(*reply.fact_event)))
                                           : json(nullptr)}};
  return ApiResponse{200, out};
}

ApiResponse ConversationService::get_session(const std::string& id) const {
  if (!ready()) return error_response(503, "not_ready", "fact store not loaded: " + load_error_);
  auto entry = valid_session_id(id) ? lookup(id) : nullptr;
  if (!entry) return error_response(404, "unknown_session", "no session " + id);
  std::lock_guard lock(entry->mu);
  return ApiResponse{200, to_json(entry->session)};
}

struct HttpServer::Impl {
  ConversationService& service;
  httplib::Server server;

  explicit Impl(ConversationService& s) : service(s) {}
};

namespace {

void send(httplib::Response& res, const ApiResponse& api) {
  res.status = api.status;
  res.set_content(api.body.dump(), "application/json; charset=utf-8");
}

}  // namespace

HttpServer::HttpServer(ConversationService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& server = impl_->server;
  auto& svc = impl_->service;
  server.set_payload_max_length(svc.config().max_body_bytes);

  server.Post("/v1/sessions", [&svc](const httplib::Request&, httplib::Response& res) {
    send(res, svc.create_session());
  });
  server.Post(R"(/v1/sessions/([^/]+)/turns)",
              [&svc](const httplib::Request& req, httplib::Response& res) {
                send(res, svc.post_turn(req.matches[1], req.body));
              });
  server.Get(R"(/v1/sessions/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.get_session(req.matches[1]));
  });
  server.Get("/healthz", [&svc](const httplib::Request&, httplib::Response& res) {
    send(res, svc.health());
  });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    std::string code = res.status == 404 ? "not_found" : "http_error";
    send(res, error_response(res.status, code, "request failed"));
  });
  server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    log_event(json{{"event", "access"},
                   {"method", req.method},
                   {"path", req.path},
                   {"status", res.status},
                   {"remote", req.remote_addr}});
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                        : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace ctafacts
