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

// Helpers for driving ConversationService in tests.

#ifndef CTAFACTS_TESTS_SERVICE_SUPPORT_H_
#define CTAFACTS_TESTS_SERVICE_SUPPORT_H_

#include <filesystem>
#include <string>

#include "ctafacts/service.h"
#include "test_support.h"

namespace ctafacts::testing {

inline ServiceConfig fixture_service_config(const std::filesystem::path& session_dir) {
  ServiceConfig c;
  c.host = "127.0.0.1";
  c.port = 0;
  c.fact_store_path = data_dir() / "facts.jsonl";
  c.corpus_path = data_dir() / "corpus.jsonl";
  c.session_dir = session_dir;
  return c;
}

inline std::string utterance_body(const std::string& text) {
  return nlohmann::json{{"utterance", text}}.dump();
}

// Rebuilds the engine transcript text from a GET /v1/sessions/{id} body.
inline std::string transcript_from_json(const nlohmann::json& body) {
  Session s;
  s.id = body.at("session_id").get<std::string>();
  s.phase = parse_session_phase(body.at("phase").get<std::string>());
  for (const auto& t : body.at("turns")) s.turn_log.push_back(turn_from_json(t));
  return export_transcript(s);
}

}  // namespace ctafacts::testing

#endif  // CTAFACTS_TESTS_SERVICE_SUPPORT_H_
