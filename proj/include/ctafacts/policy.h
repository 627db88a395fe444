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

// Fact placement policy: when a fact may be surfaced, whether the user is
// asked first, how a declined offer caps the session, and when the one-time
// feedback question is due.
//
// The policy is a set of pure functions over (PolicyState, PolicyParams). A
// session owns its PolicyState and mutates it through the functions below.

#ifndef CTAFACTS_POLICY_H_
#define CTAFACTS_POLICY_H_

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctafacts/model.h"
#include "json.hpp"

namespace ctafacts {

enum class PlacementMode { kHybrid, kSearchOnly, kExecutionOnly };
enum class DialoguePhase { kSearch, kExecution };

std::string_view to_string(PlacementMode mode);
PlacementMode parse_placement_mode(std::string_view text);
std::string_view to_string(DialoguePhase phase);

class PolicyError : public Error {
 public:
  using Error::Error;
};

struct PolicyParams {
  unsigned max_facts = 3;
  unsigned min_turns_btw_facts = 3;
  unsigned voice_word_bound = 60;
  PlacementMode mode = PlacementMode::kHybrid;
  bool always_ask = false;
  bool never_ask = false;

  // Throws PolicyError on max_facts == 0 or always_ask && never_ask.
  void validate() const;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

PolicyParams policy_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PolicyParams& params);

struct PolicyState {
  unsigned facts_shown_count = 0;
  // Completed turns since the last fact; empty until the first fact.
  std::optional<unsigned> turns_since_last_fact;
  std::set<std::string> shown_fact_ids;
  bool feedback_sought = false;
  unsigned effective_max_facts = 1;

  static PolicyState initial(const PolicyParams& params);

  friend bool operator==(const PolicyState&, const PolicyState&) = default;
};

nlohmann::json to_json(const PolicyState& state);

// The individual conditions behind a show/no-show decision, kept for the
// per-turn trace.
struct ShowDecision {
  bool step_has_fact = false;
  bool under_cap = false;
  bool spacing_ok = false;
  bool voice_friendly = false;
  bool phase_permitted = false;

  bool show() const {
    return step_has_fact && under_cap && spacing_ok && voice_friendly && phase_permitted;
  }
};

nlohmann::json to_json(const ShowDecision& decision);

ShowDecision evaluate_show_fact(const PolicyState& state, const PolicyParams& params,
                                bool step_has_fact, std::size_t prospective_turn_word_count,
                                DialoguePhase phase);

inline bool show_fact_at_step(const PolicyState& state, const PolicyParams& params,
                              bool step_has_fact, std::size_t prospective_turn_word_count,
                              DialoguePhase phase) {
  return evaluate_show_fact(state, params, step_has_fact, prospective_turn_word_count, phase)
      .show();
}

// Throws PolicyError if the id was already shown this session.
void record_fact_shown(PolicyState& state, const std::string& fact_id);

// A declined offer caps the session at one fact in total.
void handle_fact_rejection(PolicyState& state);

bool should_seek_feedback(const PolicyState& state);
void mark_feedback_sought(PolicyState& state);

bool needs_permission(DialoguePhase phase, const PolicyParams& params);

// Advances the spacing counter for a completed turn that showed no fact.
void complete_turn(PolicyState& state);

// Read-only view of a fact store indexed by step and by task, each list in
// descending score order (ties by ascending id).
class FactCatalog {
 public:
  explicit FactCatalog(FactStore store);
  FactCatalog(const FactCatalog&) = delete;
  FactCatalog& operator=(const FactCatalog&) = delete;

  const FactStore& store() const { return store_; }
  const CuratedFact* find(std::string_view id) const;
  std::span<const CuratedFact* const> for_step(const StepRef& ref) const;
  std::span<const CuratedFact* const> for_task(const std::string& task_id) const;

 private:
  FactStore store_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<StepRef, std::vector<const CuratedFact*>> by_step_;
  std::map<std::string, std::vector<const CuratedFact*>> by_task_;
};

// Highest-scoring fact linked to the step that has not been shown yet.
const CuratedFact* select_fact(const StepRef& step, const FactCatalog& catalog,
                               const std::set<std::string>& shown_fact_ids);

// Same, over every step of a task. Used for search results.
const CuratedFact* select_fact_for_task(const std::string& task_id, const FactCatalog& catalog,
                                        const std::set<std::string>& shown_fact_ids);

}  // namespace ctafacts

#endif  // CTAFACTS_POLICY_H_
