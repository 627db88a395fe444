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

// Session state machine for a task assistant: search, pick a task, walk its
// steps, and weave fact placement decisions into the turns.
//
//   searching --select--> executing --next...--> awaiting_rating --> ended
//       |                   |   ^
//       |                   v   |
//       +--> awaiting_fact_permission / awaiting_feedback (return to the
//            phase they interrupted)
//
// Every user turn produces exactly one assistant turn.

#ifndef CTAFACTS_ENGINE_H_
#define CTAFACTS_ENGINE_H_

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ctafacts/model.h"
#include "ctafacts/policy.h"
#include "json.hpp"

namespace ctafacts {

enum class SessionPhase {
  kSearching,
  kAwaitingFactPermission,
  kExecuting,
  kAwaitingFeedback,
  kAwaitingRating,
  kEnded,
};

std::string_view to_string(SessionPhase phase);
SessionPhase parse_session_phase(std::string_view text);

enum class Speaker { kUser, kAssistant };
enum class FactEvent { kOffered, kShown, kRejected, kLiked, kDisliked };

std::string_view to_string(FactEvent event);
FactEvent parse_fact_event(std::string_view text);

namespace intent {
struct Search { std::string query; };
struct Select { std::string task_id; };
struct NextStep {};
struct Yes {};
struct No {};
struct FeedbackAnswer { bool liked = false; };
struct Rate { int rating = 0; };
struct Exit {};
struct Other {};
}  // namespace intent

using Intent = std::variant<intent::Search, intent::Select, intent::NextStep, intent::Yes,
                            intent::No, intent::FeedbackAnswer, intent::Rate, intent::Exit,
                            intent::Other>;

std::string_view intent_kind(const Intent& intent);
nlohmann::json to_json(const Intent& intent);
Intent intent_from_json(const nlohmann::json& j);

// Keyword rules. `results` are the tasks from the last search, used to resolve
// ordinals and titles.
Intent parse_intent(std::string_view utterance, SessionPhase phase,
                    std::span<const Task* const> results = {});

struct StepCard {
  std::string task_id;
  std::size_t index = 0;
  std::size_t step_count = 0;
  std::string text;
};

struct FactCard {
  std::string fact_id;
  std::string text;
  std::string source_url;
  std::string provider;
};

struct DisplayPayload {
  std::optional<StepCard> step;
  std::optional<FactCard> fact_card;
  std::vector<std::string> results;
};

// One show/no-show evaluation, recorded on the assistant turn it shaped.
struct PolicyTrace {
  std::size_t turn_index = 0;
  DialoguePhase phase = DialoguePhase::kSearch;
  std::string fact_id;
  std::size_t prospective_word_count = 0;
  ShowDecision decision;
  std::string outcome;  // "shown", "offered" or "none"
};

struct Turn {
  std::size_t index = 0;
  Speaker speaker = Speaker::kUser;
  std::string text;
  std::optional<DisplayPayload> display;
  std::optional<Intent> intent;
  std::optional<FactEvent> fact_event;
  std::optional<PolicyTrace> policy_trace;
  // Session phase after an assistant turn.
  std::optional<SessionPhase> phase;
};

nlohmann::json to_json(const Turn& turn);
Turn turn_from_json(const nlohmann::json& j);

struct FactFeedback {
  std::string fact_id;
  bool liked = false;
};

struct Session {
  std::string id;
  SessionPhase phase = SessionPhase::kSearching;
  // Phase that an awaiting_fact_permission or awaiting_feedback detour returns to.
  SessionPhase resume_phase = SessionPhase::kSearching;
  std::optional<std::string> task_id;
  std::size_t current_step_index = 0;
  std::size_t steps_reached = 0;
  bool completed = false;
  PolicyState policy_state;
  std::vector<Turn> turn_log;
  std::optional<std::string> pending_fact;
  std::optional<std::string> last_shown_fact;
  std::optional<int> rating;
  std::vector<FactFeedback> fact_feedback;
  std::vector<std::string> last_results;
};

struct SessionOutcome {
  bool completed = false;
  std::size_t turn_count = 0;
  std::size_t facts_shown = 0;
  std::size_t facts_liked = 0;
  std::size_t facts_disliked = 0;
  std::optional<int> rating;
  std::size_t steps_reached = 0;
  std::optional<std::string> user_id;
};

nlohmann::json to_json(const SessionOutcome& outcome);

// Throws Error unless the session has ended.
SessionOutcome complete_session(const Session& session);

class SessionEndedError : public Error {
 public:
  using Error::Error;
};

struct EngineConfig {
  PolicyParams policy;
  bool facts_enabled = true;
  std::size_t max_results = 3;
};

class Engine {
 public:
  Engine(std::shared_ptr<const TaskCorpus> corpus, std::shared_ptr<const FactCatalog> catalog,
         EngineConfig config);

  Session start_session(std::string id) const;

  // Appends the user turn and the assistant reply; returns the reply.
  // Throws SessionEndedError on an ended session and Error on an empty
  // utterance.
  Turn handle_turn(Session& session, std::string_view utterance) const;

  // Title matches, best first, at most config.max_results.
  std::vector<const Task*> search(std::string_view query) const;

  const EngineConfig& config() const { return config_; }
  const TaskCorpus& corpus() const { return *corpus_; }
  const FactCatalog& catalog() const { return *catalog_; }

 private:
  struct Reply;

  void dispatch(Session& s, const Intent& intent, Reply& reply) const;
  void do_search(Session& s, const std::string& query, Reply& reply) const;
  void do_select(Session& s, const std::string& task_id, Reply& reply) const;
  void advance(Session& s, Reply& reply) const;
  void present_step(Session& s, Reply& reply) const;
  void show_pending_fact(Session& s, Reply& reply) const;
  void begin_exit(Session& s, Reply& reply) const;
  std::string resume_prompt(SessionPhase phase) const;
  std::vector<const Task*> results_of(const Session& s) const;

  std::shared_ptr<const TaskCorpus> corpus_;
  std::shared_ptr<const FactCatalog> catalog_;
  EngineConfig config_;
};

// Runs `utterances` through a fresh session.
Session replay_session(const Engine& engine, std::string id,
                       std::span<const std::string> utterances);

// Every user utterance in the log, in order.
std::vector<std::string> user_utterances(const Session& session);

nlohmann::json to_json(const Session& session);

// Human-readable transcript used for golden files.
std::string export_transcript(const Session& session);

// The sentence used to present a fact, with its attribution.
std::string fact_sentence(const CuratedFact& fact);

}  // namespace ctafacts

#endif  // CTAFACTS_ENGINE_H_
