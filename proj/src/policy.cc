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

#include "ctafacts/policy.h"

#include <algorithm>

namespace ctafacts {

using nlohmann::json;

std::string_view to_string(PlacementMode mode) {
  switch (mode) {
    case PlacementMode::kHybrid: return "hybrid";
    case PlacementMode::kSearchOnly: return "search_only";
    case PlacementMode::kExecutionOnly: return "execution_only";
  }
  return "hybrid";
}

PlacementMode parse_placement_mode(std::string_view text) {
  if (text == "hybrid") return PlacementMode::kHybrid;
  if (text == "search_only") return PlacementMode::kSearchOnly;
  if (text == "execution_only") return PlacementMode::kExecutionOnly;
  throw PolicyError("unknown placement mode '" + std::string(text) + "'");
}

std::string_view to_string(DialoguePhase phase) {
  return phase == DialoguePhase::kSearch ? "search" : "execution";
}

void PolicyParams::validate() const {
  if (max_facts < 1) throw PolicyError("max_facts must be at least 1");
  if (voice_word_bound < 1) throw PolicyError("voice_word_bound must be positive");
  if (always_ask && never_ask) throw PolicyError("always_ask and never_ask are exclusive");
}

PolicyParams policy_params_from_json(const json& j) {
  PolicyParams p;
  try {
    p.max_facts = j.value("max_facts", p.max_facts);
    p.min_turns_btw_facts = j.value("min_turns_btw_facts", p.min_turns_btw_facts);
    p.voice_word_bound = j.value("voice_word_bound", p.voice_word_bound);
    if (auto it = j.find("mode"); it != j.end()) {
      p.mode = parse_placement_mode(it->get<std::string>());
    }
    p.always_ask = j.value("always_ask", p.always_ask);
    p.never_ask = j.value("never_ask", p.never_ask);
  } catch (const json::exception& e) {
    throw PolicyError(std::string("invalid policy params: ") + e.what());
  }
  p.validate();
  return p;
}

json to_json(const PolicyParams& p) {
  return json{{"max_facts", p.max_facts},
              {"min_turns_btw_facts", p.min_turns_btw_facts},
              {"voice_word_bound", p.voice_word_bound},
              {"mode", std::string(to_string(p.mode))},
              {"always_ask", p.always_ask},
              {"never_ask", p.never_ask}};
}

PolicyState PolicyState::initial(const PolicyParams& params) {
  PolicyState s;
  s.effective_max_facts = params.max_facts;
  return s;
}

json to_json(const PolicyState& s) {
  return json{{"facts_shown_count", s.facts_shown_count},
              {"turns_since_last_fact",
               s.turns_since_last_fact ? json(*s.turns_since_last_fact) : json(nullptr)},
              {"shown_fact_ids", s.shown_fact_ids},
              {"feedback_sought", s.feedback_sought},
              {"effective_max_facts", s.effective_max_facts}};
}

json to_json(const ShowDecision& d) {
  return json{{"step_has_fact", d.step_has_fact},
              {"under_cap", d.under_cap},
              {"spacing_ok", d.spacing_ok},
              {"voice_friendly", d.voice_friendly},
              {"phase_permitted", d.phase_permitted},
              {"show", d.show()}};
}

ShowDecision evaluate_show_fact(const PolicyState& state, const PolicyParams& params,
                                bool step_has_fact, std::size_t prospective_turn_word_count,
                                DialoguePhase phase) {
  ShowDecision d;
  d.step_has_fact = step_has_fact;
  d.under_cap = state.facts_shown_count < state.effective_max_facts;
  d.spacing_ok = !state.turns_since_last_fact ||
                 *state.turns_since_last_fact >= params.min_turns_btw_facts;
  d.voice_friendly = prospective_turn_word_count <= params.voice_word_bound;
  d.phase_permitted = phase == DialoguePhase::kSearch
                          ? params.mode != PlacementMode::kExecutionOnly
                          : params.mode != PlacementMode::kSearchOnly;
  return d;
}

void record_fact_shown(PolicyState& state, const std::string& fact_id) {
  if (!state.shown_fact_ids.insert(fact_id).second) {
    throw PolicyError("fact '" + fact_id + "' was already shown in this session");
  }
  ++state.facts_shown_count;
  state.turns_since_last_fact = 0;
}

void handle_fact_rejection(PolicyState& state) {
  state.effective_max_facts = std::min(state.effective_max_facts, 1u);
}

bool should_seek_feedback(const PolicyState& state) {
  return state.facts_shown_count >= 1 && !state.feedback_sought;
}

void mark_feedback_sought(PolicyState& state) { state.feedback_sought = true; }

bool needs_permission(DialoguePhase phase, const PolicyParams& params) {
  if (params.always_ask) return true;
  if (params.never_ask) return false;
  return phase == DialoguePhase::kExecution;
}

void complete_turn(PolicyState& state) {
  if (state.turns_since_last_fact) ++*state.turns_since_last_fact;
}

FactCatalog::FactCatalog(FactStore store) : store_(std::move(store)) {
  for (std::size_t i = 0; i < store_.facts.size(); ++i) by_id_.emplace(store_.facts[i].id, i);
  for (const auto& fact : store_.facts) {
    for (const auto& ref : fact.linked_steps) {
      by_step_[ref].push_back(&fact);
      auto& task_list = by_task_[ref.task_id];
      if (std::find(task_list.begin(), task_list.end(), &fact) == task_list.end()) {
        task_list.push_back(&fact);
      }
    }
  }
  auto rank = [](const CuratedFact* a, const CuratedFact* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->id < b->id;
  };
  for (auto& [_, list] : by_step_) std::stable_sort(list.begin(), list.end(), rank);
  for (auto& [_, list] : by_task_) std::stable_sort(list.begin(), list.end(), rank);
}

const CuratedFact* FactCatalog::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &store_.facts[it->second];
}

std::span<const CuratedFact* const> FactCatalog::for_step(const StepRef& ref) const {
  auto it = by_step_.find(ref);
  if (it == by_step_.end()) return {};
  return it->second;
}

std::span<const CuratedFact* const> FactCatalog::for_task(const std::string& task_id) const {
  auto it = by_task_.find(task_id);
  if (it == by_task_.end()) return {};
  return it->second;
}

namespace {

const CuratedFact* first_unshown(std::span<const CuratedFact* const> ranked,
                                 const std::set<std::string>& shown) {
  for (const CuratedFact* f : ranked) {
    if (shown.count(f->id) == 0) return f;
  }
  return nullptr;
}

}  // namespace

const CuratedFact* select_fact(const StepRef& step, const FactCatalog& catalog,
                               const std::set<std::string>& shown_fact_ids) {
  return first_unshown(catalog.for_step(step), shown_fact_ids);
}

const CuratedFact* select_fact_for_task(const std::string& task_id, const FactCatalog& catalog,
                                        const std::set<std::string>& shown_fact_ids) {
  return first_unshown(catalog.for_task(task_id), shown_fact_ids);
}

}  // namespace ctafacts
