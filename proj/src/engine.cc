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

#include "ctafacts/engine.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "ctafacts/store_io.h"
#include "ctafacts/text.h"

namespace ctafacts {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const std::set<std::string>& exit_words() {
  static const std::set<std::string> words{"stop", "exit", "quit", "cancel"};
  return words;
}

const std::set<std::string>& affirmations() {
  static const std::set<std::string> words{"yes",  "yeah",       "yep",        "yup",
                                           "sure", "ok",         "okay",       "please",
                                           "alright", "absolutely", "definitely", "certainly"};
  return words;
}

const std::set<std::string>& negations() {
  static const std::set<std::string> words{"no",  "nope",  "nah",    "not",
                                           "never", "don't", "didn't", "negative"};
  return words;
}

// Words dropped from search queries and selections before title matching.
const std::set<std::string>& filler_words() {
  static const std::set<std::string> words{
      "a",    "an",   "the",  "some", "recipe", "recipes", "for",  "me",   "to",
      "make", "how",  "of",   "i",    "want",   "dish",    "let's", "lets", "select",
      "choose", "pick", "one", "i'll", "please", "option",  "number", "go",  "with",
      "that", "this", "cook", "like", "would",  "do"};
  return words;
}

std::optional<int> rating_in(const std::vector<std::string>& tokens) {
  static const std::vector<std::pair<std::string, int>> words{
      {"one", 1}, {"two", 2}, {"three", 3}, {"four", 4}, {"five", 5}};
  for (const auto& t : tokens) {
    if (t.size() == 1 && t[0] >= '1' && t[0] <= '5') return t[0] - '0';
    for (const auto& [w, n] : words) {
      if (t == w) return n;
    }
    if (!t.empty() && std::all_of(t.begin(), t.end(), ::isdigit)) return std::nullopt;
  }
  return std::nullopt;
}

std::optional<std::size_t> ordinal_in(const std::vector<std::string>& tokens) {
  static const std::vector<std::pair<std::string, std::size_t>> words{
      {"first", 1}, {"1st", 1}, {"1", 1}, {"second", 2}, {"2nd", 2}, {"2", 2},
      {"two", 2},   {"third", 3}, {"3rd", 3}, {"3", 3},   {"three", 3}};
  for (const auto& t : tokens) {
    for (const auto& [w, n] : words) {
      if (t == w) return n;
    }
  }
  // "one" on its own, or after "number"/"option".
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] != "one") continue;
    if (tokens.size() == 1) return 1;
    if (i > 0 && (tokens[i - 1] == "number" || tokens[i - 1] == "option")) return 1;
  }
  return std::nullopt;
}

std::vector<std::string> content_tokens(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    if (filler_words().count(t) == 0) out.push_back(t);
  }
  return out;
}

bool all_tokens_in(const std::vector<std::string>& needles,
                   const std::vector<std::string>& haystack) {
  return std::all_of(needles.begin(), needles.end(), [&](const std::string& n) {
    return std::any_of(haystack.begin(), haystack.end(),
                       [&](const std::string& h) { return text::plural_tolerant_equal(n, h); });
  });
}

std::optional<std::string> resolve_selection(const std::vector<std::string>& tokens,
                                             std::span<const Task* const> results) {
  if (auto n = ordinal_in(tokens)) {
    if (*n >= 1 && *n <= results.size()) return results[*n - 1]->id;
    return std::nullopt;
  }
  auto wanted = content_tokens(tokens);
  if (wanted.empty()) return std::nullopt;
  for (const Task* task : results) {
    if (all_tokens_in(wanted, text::word_tokens(task->title))) return task->id;
  }
  return std::nullopt;
}

DialoguePhase dialogue_phase_of(SessionPhase phase) {
  return phase == SessionPhase::kSearching ? DialoguePhase::kSearch : DialoguePhase::kExecution;
}

std::optional<Speaker> parse_speaker(std::string_view s) {
  if (s == "user") return Speaker::kUser;
  if (s == "assistant") return Speaker::kAssistant;
  return std::nullopt;
}

json to_json(const DisplayPayload& d) {
  json j = json::object();
  if (d.step) {
    j["step"] = json{{"task_id", d.step->task_id},
                     {"index", d.step->index},
                     {"step_count", d.step->step_count},
                     {"text", d.step->text}};
  }
  if (d.fact_card) {
    j["fact_card"] = json{{"fact_id", d.fact_card->fact_id},
                          {"text", d.fact_card->text},
                          {"source_url", d.fact_card->source_url},
                          {"provider", d.fact_card->provider}};
  }
  if (!d.results.empty()) j["results"] = d.results;
  return j;
}

DisplayPayload display_from_json(const json& j) {
  DisplayPayload d;
  if (auto it = j.find("step"); it != j.end()) {
    d.step = StepCard{it->at("task_id").get<std::string>(), it->at("index").get<std::size_t>(),
                      it->at("step_count").get<std::size_t>(), it->at("text").get<std::string>()};
  }
  if (auto it = j.find("fact_card"); it != j.end()) {
    d.fact_card = FactCard{it->at("fact_id").get<std::string>(), it->at("text").get<std::string>(),
                           it->at("source_url").get<std::string>(),
                           it->at("provider").get<std::string>()};
  }
  if (auto it = j.find("results"); it != j.end()) {
    d.results = it->get<std::vector<std::string>>();
  }
  return d;
}

json to_json(const PolicyTrace& t) {
  json j = to_json(t.decision);
  j["turn_index"] = t.turn_index;
  j["phase"] = std::string(to_string(t.phase));
  j["fact_id"] = t.fact_id;
  j["prospective_word_count"] = t.prospective_word_count;
  j["outcome"] = t.outcome;
  return j;
}

PolicyTrace trace_from_json(const json& j) {
  PolicyTrace t;
  t.turn_index = j.at("turn_index").get<std::size_t>();
  t.phase = j.at("phase").get<std::string>() == "search" ? DialoguePhase::kSearch
                                                         : DialoguePhase::kExecution;
  t.fact_id = j.value("fact_id", "");
  t.prospective_word_count = j.value("prospective_word_count", std::size_t{0});
  t.decision.step_has_fact = j.at("step_has_fact").get<bool>();
  t.decision.under_cap = j.at("under_cap").get<bool>();
  t.decision.spacing_ok = j.at("spacing_ok").get<bool>();
  t.decision.voice_friendly = j.at("voice_friendly").get<bool>();
  t.decision.phase_permitted = j.at("phase_permitted").get<bool>();
  t.outcome = j.at("outcome").get<std::string>();
  return t;
}

}  // namespace

std::string_view to_string(SessionPhase phase) {
  switch (phase) {
    case SessionPhase::kSearching: return "searching";
    case SessionPhase::kAwaitingFactPermission: return "awaiting_fact_permission";
    case SessionPhase::kExecuting: return "executing";
    case SessionPhase::kAwaitingFeedback: return "awaiting_feedback";
    case SessionPhase::kAwaitingRating: return "awaiting_rating";
    case SessionPhase::kEnded: return "ended";
  }
  return "ended";
}

SessionPhase parse_session_phase(std::string_view text) {
  for (auto p : {SessionPhase::kSearching, SessionPhase::kAwaitingFactPermission,
                 SessionPhase::kExecuting, SessionPhase::kAwaitingFeedback,
                 SessionPhase::kAwaitingRating, SessionPhase::kEnded}) {
    if (to_string(p) == text) return p;
  }
  throw Error("unknown session phase '" + std::string(text) + "'");
}

std::string_view to_string(FactEvent event) {
  switch (event) {
    case FactEvent::kOffered: return "offered";
    case FactEvent::kShown: return "shown";
    case FactEvent::kRejected: return "rejected";
    case FactEvent::kLiked: return "liked";
    case FactEvent::kDisliked: return "disliked";
  }
  return "shown";
}

FactEvent parse_fact_event(std::string_view text) {
  for (auto e : {FactEvent::kOffered, FactEvent::kShown, FactEvent::kRejected, FactEvent::kLiked,
                 FactEvent::kDisliked}) {
    if (to_string(e) == text) return e;
  }
  throw Error("unknown fact event '" + std::string(text) + "'");
}

std::string_view intent_kind(const Intent& intent) {
  return std::visit(Overloaded{
                        [](const intent::Search&) { return "search"; },
                        [](const intent::Select&) { return "select"; },
                        [](const intent::NextStep&) { return "next_step"; },
                        [](const intent::Yes&) { return "yes"; },
                        [](const intent::No&) { return "no"; },
                        [](const intent::FeedbackAnswer&) { return "feedback_answer"; },
                        [](const intent::Rate&) { return "rate"; },
                        [](const intent::Exit&) { return "exit"; },
                        [](const intent::Other&) { return "other"; },
                    },
                    intent);
}

json to_json(const Intent& i) {
  json j{{"kind", std::string(intent_kind(i))}};
  if (auto* s = std::get_if<intent::Search>(&i)) j["query"] = s->query;
  if (auto* s = std::get_if<intent::Select>(&i)) j["task_id"] = s->task_id;
  if (auto* f = std::get_if<intent::FeedbackAnswer>(&i)) j["liked"] = f->liked;
  if (auto* r = std::get_if<intent::Rate>(&i)) j["rating"] = r->rating;
  return j;
}

Intent intent_from_json(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "search") return intent::Search{j.at("query").get<std::string>()};
  if (kind == "select") return intent::Select{j.at("task_id").get<std::string>()};
  if (kind == "next_step") return intent::NextStep{};
  if (kind == "yes") return intent::Yes{};
  if (kind == "no") return intent::No{};
  if (kind == "feedback_answer") return intent::FeedbackAnswer{j.at("liked").get<bool>()};
  if (kind == "rate") return intent::Rate{j.at("rating").get<int>()};
  if (kind == "exit") return intent::Exit{};
  if (kind == "other") return intent::Other{};
  throw Error("unknown intent kind '" + kind + "'");
}

Intent parse_intent(std::string_view utterance, SessionPhase phase,
                    std::span<const Task* const> results) {
  std::string lower = text::to_lower(text::trim(utterance));
  auto tokens = text::word_tokens(lower);
  if (tokens.empty()) return intent::Other{};

  if (exit_words().count(tokens.front()) > 0 || lower == "bye" || lower == "goodbye") {
    return intent::Exit{};
  }

  if (phase == SessionPhase::kAwaitingRating) {
    if (auto n = rating_in(tokens)) return intent::Rate{*n};
  }

  if (phase == SessionPhase::kSearching) {
    static const std::vector<std::string> prefixes{"search for", "search", "find me", "find",
                                                   "show me",    "look for", "look up"};
    for (const auto& prefix : prefixes) {
      if (!text::starts_with_word(lower, prefix)) continue;
      auto rest = text::word_tokens(lower.substr(prefix.size()));
      static const std::set<std::string> leading{"a", "an", "the", "some", "me", "for"};
      auto first = std::find_if(rest.begin(), rest.end(),
                                [](const std::string& t) { return leading.count(t) == 0; });
      std::vector<std::string> query(first, rest.end());
      if (!query.empty()) return intent::Search{text::join(query, " ")};
    }
    if (!results.empty()) {
      if (auto id = resolve_selection(tokens, results)) return intent::Select{*id};
    }
  }

  const std::string& first = tokens.front();
  bool yes = affirmations().count(first) > 0;
  bool no = negations().count(first) > 0;
  if (phase == SessionPhase::kAwaitingFeedback && (yes || no)) {
    return intent::FeedbackAnswer{yes};
  }
  if (yes) return intent::Yes{};
  if (no) return intent::No{};

  bool next = std::any_of(tokens.begin(), tokens.end(), [](const std::string& t) {
    return t == "next" || t == "continue";
  });
  if (next || lower == "go on" || lower == "done") return intent::NextStep{};
  return intent::Other{};
}

json to_json(const Turn& t) {
  json j{{"index", t.index},
         {"speaker", t.speaker == Speaker::kUser ? "user" : "assistant"},
         {"text", t.text}};
  if (t.display) j["display"] = to_json(*t.display);
  if (t.intent) j["intent"] = to_json(*t.intent);
  if (t.fact_event) j["fact_event"] = std::string(to_string(*t.fact_event));
  if (t.policy_trace) j["policy_trace"] = to_json(*t.policy_trace);
  if (t.phase) j["phase"] = std::string(to_string(*t.phase));
  return j;
}

Turn turn_from_json(const json& j) {
  try {
    Turn t;
    t.index = j.at("index").get<std::size_t>();
    auto speaker = parse_speaker(j.at("speaker").get<std::string>());
    if (!speaker) throw Error("unknown speaker");
    t.speaker = *speaker;
    t.text = j.at("text").get<std::string>();
    if (auto it = j.find("display"); it != j.end()) t.display = display_from_json(*it);
    if (auto it = j.find("intent"); it != j.end()) t.intent = intent_from_json(*it);
    if (auto it = j.find("fact_event"); it != j.end()) {
      t.fact_event = parse_fact_event(it->get<std::string>());
    }
    if (auto it = j.find("policy_trace"); it != j.end()) t.policy_trace = trace_from_json(*it);
    if (auto it = j.find("phase"); it != j.end()) {
      t.phase = parse_session_phase(it->get<std::string>());
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed turn record: ") + e.what());
  }
}

json to_json(const SessionOutcome& o) {
  json j{{"completed", o.completed},
         {"turn_count", o.turn_count},
         {"facts_shown", o.facts_shown},
         {"facts_liked", o.facts_liked},
         {"facts_disliked", o.facts_disliked},
         {"rating", o.rating ? json(*o.rating) : json(nullptr)},
         {"steps_reached", o.steps_reached}};
  if (o.user_id) j["user_id"] = *o.user_id;
  return j;
}

SessionOutcome complete_session(const Session& s) {
  if (s.phase != SessionPhase::kEnded) throw Error("session '" + s.id + "' has not ended");
  SessionOutcome o;
  o.completed = s.completed;
  o.turn_count = s.turn_log.size();
  o.facts_shown = s.policy_state.facts_shown_count;
  for (const auto& fb : s.fact_feedback) {
    if (fb.liked) {
      ++o.facts_liked;
    } else {
      ++o.facts_disliked;
    }
  }
  o.rating = s.rating;
  o.steps_reached = s.steps_reached;
  return o;
}

std::string fact_sentence(const CuratedFact& fact) {
  return "Here's an interesting fact from " + fact.provider + ": " + fact.text;
}

struct Engine::Reply {
  std::string text;
  DisplayPayload display;
  std::optional<FactEvent> event;
  std::optional<PolicyTrace> trace;
  bool fact_shown = false;

  void say(std::string_view s) {
    if (!text.empty()) text.push_back(' ');
    text.append(s);
  }
};

Engine::Engine(std::shared_ptr<const TaskCorpus> corpus,
               std::shared_ptr<const FactCatalog> catalog, EngineConfig config)
    : corpus_(std::move(corpus)), catalog_(std::move(catalog)), config_(std::move(config)) {
  if (!corpus_ || !catalog_) throw Error("engine needs a corpus and a fact catalog");
  config_.policy.validate();
}

Session Engine::start_session(std::string id) const {
  Session s;
  s.id = std::move(id);
  s.policy_state = PolicyState::initial(config_.policy);
  return s;
}

std::vector<const Task*> Engine::search(std::string_view query) const {
  auto tokens = text::word_tokens(query);
  auto wanted = content_tokens(tokens);
  if (wanted.empty()) wanted = tokens;
  if (wanted.empty()) return {};
  std::string joined = text::join(wanted, " ");

  std::vector<std::pair<int, const Task*>> ranked;
  for (const auto& task : corpus_->tasks) {
    auto title_tokens = text::word_tokens(task.title);
    std::string title = text::join(title_tokens, " ");
    int rank = -1;
    if (title == joined) {
      rank = 0;
    } else if (title.find(joined) != std::string::npos) {
      rank = 1;
    } else if (all_tokens_in(wanted, title_tokens)) {
      rank = 2;
    }
    if (rank >= 0) ranked.emplace_back(rank, &task);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<const Task*> out;
  for (const auto& [_, task] : ranked) {
    if (out.size() == config_.max_results) break;
    out.push_back(task);
  }
  return out;
}

std::vector<const Task*> Engine::results_of(const Session& s) const {
  std::vector<const Task*> out;
  for (const auto& id : s.last_results) {
    if (const Task* t = corpus_->find(id)) out.push_back(t);
  }
  return out;
}

std::string Engine::resume_prompt(SessionPhase phase) const {
  return phase == SessionPhase::kSearching ? "Which recipe would you like?"
                                           : "Say next when you're ready to continue.";
}

Turn Engine::handle_turn(Session& s, std::string_view utterance) const {
  if (s.phase == SessionPhase::kEnded) {
    throw SessionEndedError("session '" + s.id + "' has ended");
  }
  std::string said(text::trim(utterance));
  if (said.empty()) throw Error("utterance is empty");

  auto results = results_of(s);
  Intent intent = parse_intent(said, s.phase, results);
  // A reply that does not answer a pending question bypasses it; the
  // utterance is then read in the phase the question interrupted.
  if (s.phase == SessionPhase::kAwaitingFactPermission &&
      !std::holds_alternative<intent::Yes>(intent) &&
      !std::holds_alternative<intent::No>(intent)) {
    s.pending_fact.reset();
    s.phase = s.resume_phase;
    intent = parse_intent(said, s.phase, results);
  } else if (s.phase == SessionPhase::kAwaitingFeedback &&
             !std::holds_alternative<intent::FeedbackAnswer>(intent)) {
    s.phase = s.resume_phase;
    intent = parse_intent(said, s.phase, results);
  }

  Turn user;
  user.index = s.turn_log.size();
  user.speaker = Speaker::kUser;
  user.text = said;
  user.intent = intent;
  s.turn_log.push_back(std::move(user));

  Reply reply;
  dispatch(s, intent, reply);

  Turn assistant;
  assistant.index = s.turn_log.size();
  assistant.speaker = Speaker::kAssistant;
  assistant.text = std::move(reply.text);
  if (reply.display.step || reply.display.fact_card || !reply.display.results.empty()) {
    assistant.display = std::move(reply.display);
  }
  assistant.fact_event = reply.event;
  if (reply.trace) {
    reply.trace->turn_index = assistant.index;
    assistant.policy_trace = std::move(reply.trace);
  }
  assistant.phase = s.phase;
  if (!reply.fact_shown) complete_turn(s.policy_state);
  s.turn_log.push_back(assistant);
  return assistant;
}

void Engine::dispatch(Session& s, const Intent& intent, Reply& reply) const {
  switch (s.phase) {
    case SessionPhase::kSearching:
      if (auto* search = std::get_if<intent::Search>(&intent)) {
        do_search(s, search->query, reply);
      } else if (auto* select = std::get_if<intent::Select>(&intent)) {
        do_select(s, select->task_id, reply);
      } else if (std::holds_alternative<intent::Exit>(intent)) {
        begin_exit(s, reply);
      } else if (s.last_results.empty()) {
        reply.say("You can search for a recipe, for example: find pancakes.");
      } else {
        reply.say("You can pick a recipe by its number, or search for something else.");
      }
      return;

    case SessionPhase::kAwaitingFactPermission:
      if (std::holds_alternative<intent::Yes>(intent)) {
        show_pending_fact(s, reply);
      } else {
        handle_fact_rejection(s.policy_state);
        s.pending_fact.reset();
        s.phase = s.resume_phase;
        reply.event = FactEvent::kRejected;
        reply.say("No problem.");
        reply.say(resume_prompt(s.phase));
      }
      return;

    case SessionPhase::kExecuting:
      if (std::holds_alternative<intent::NextStep>(intent)) {
        advance(s, reply);
      } else if (std::holds_alternative<intent::Exit>(intent)) {
        begin_exit(s, reply);
      } else {
        reply.say("Say next to continue, or stop to end.");
      }
      return;

    case SessionPhase::kAwaitingFeedback: {
      bool liked = std::get<intent::FeedbackAnswer>(intent).liked;
      s.fact_feedback.push_back(FactFeedback{s.last_shown_fact.value_or(""), liked});
      s.phase = s.resume_phase;
      reply.event = liked ? FactEvent::kLiked : FactEvent::kDisliked;
      reply.say(liked ? "Glad you liked it!" : "Thanks for letting me know.");
      reply.say(resume_prompt(s.phase));
      return;
    }

    case SessionPhase::kAwaitingRating:
      if (auto* rate = std::get_if<intent::Rate>(&intent)) {
        s.rating = rate->rating;
        s.phase = SessionPhase::kEnded;
        reply.say("Thanks for rating this conversation " + std::to_string(rate->rating) +
                  ". Goodbye!");
      } else if (std::holds_alternative<intent::Exit>(intent) ||
                 std::holds_alternative<intent::No>(intent)) {
        s.phase = SessionPhase::kEnded;
        reply.say("Goodbye!");
      } else {
        reply.say("Please rate this conversation from 1 to 5, or say stop.");
      }
      return;

    case SessionPhase::kEnded:
      throw SessionEndedError("session '" + s.id + "' has ended");
  }
}

void Engine::do_search(Session& s, const std::string& query, Reply& reply) const {
  auto results = search(query);
  s.last_results.clear();
  for (const Task* t : results) s.last_results.push_back(t->id);
  if (results.empty()) {
    reply.say("Sorry, I couldn't find a recipe for " + query + ". Try another search.");
    return;
  }
  std::ostringstream out;
  out << "I found " << results.size() << (results.size() == 1 ? " recipe: " : " recipes: ");
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i > 0) out << ", ";
    out << i + 1 << ". " << results[i]->title;
    reply.display.results.push_back(results[i]->title);
  }
  out << ". Which one would you like?";
  reply.say(out.str());
  if (!config_.facts_enabled) return;

  const CuratedFact* fact =
      select_fact_for_task(results.front()->id, *catalog_, s.policy_state.shown_fact_ids);
  const bool ask = needs_permission(DialoguePhase::kSearch, config_.policy);
  std::size_t words = word_count(reply.text);
  if (fact != nullptr) {
    words = ask ? word_count(fact_sentence(*fact) + " " + resume_prompt(SessionPhase::kSearching))
                : word_count(reply.text + " " + fact_sentence(*fact));
  }
  PolicyTrace trace;
  trace.phase = DialoguePhase::kSearch;
  trace.fact_id = fact != nullptr ? fact->id : "";
  trace.prospective_word_count = words;
  trace.decision = evaluate_show_fact(s.policy_state, config_.policy, fact != nullptr, words,
                                      DialoguePhase::kSearch);
  trace.outcome = "none";
  if (trace.decision.show()) {
    if (ask) {
      reply.say("Would you like to hear an interesting fact about " + fact->entity.name +
                " first?");
      s.pending_fact = fact->id;
      s.resume_phase = SessionPhase::kSearching;
      s.phase = SessionPhase::kAwaitingFactPermission;
      reply.event = FactEvent::kOffered;
      trace.outcome = "offered";
    } else {
      reply.say(fact_sentence(*fact));
      record_fact_shown(s.policy_state, fact->id);
      s.last_shown_fact = fact->id;
      reply.display.fact_card = FactCard{fact->id, fact->text, fact->source_url, fact->provider};
      reply.event = FactEvent::kShown;
      reply.fact_shown = true;
      trace.outcome = "shown";
    }
  }
  reply.trace = std::move(trace);
}

void Engine::do_select(Session& s, const std::string& task_id, Reply& reply) const {
  const Task* task = corpus_->find(task_id);
  if (task == nullptr) {
    reply.say("Sorry, I couldn't open that recipe. Which one would you like?");
    return;
  }
  s.task_id = task->id;
  s.current_step_index = 0;
  s.steps_reached = 1;
  s.phase = SessionPhase::kExecuting;
  reply.say("Great choice! Let's make " + task->title + ".");
  present_step(s, reply);
}

void Engine::advance(Session& s, Reply& reply) const {
  const Task* task = s.task_id ? corpus_->find(*s.task_id) : nullptr;
  if (task == nullptr) throw Error("session '" + s.id + "' is executing without a task");
  if (s.current_step_index + 1 < task->steps.size()) {
    ++s.current_step_index;
    s.steps_reached = std::max(s.steps_reached, s.current_step_index + 1);
    present_step(s, reply);
    return;
  }
  s.completed = true;
  s.phase = SessionPhase::kAwaitingRating;
  reply.say("That was the last step. You've finished " + task->title +
            "! How would you rate this conversation from 1 to 5?");
}

void Engine::present_step(Session& s, Reply& reply) const {
  const Task& task = *corpus_->find(*s.task_id);
  const TaskStep& step = task.steps[s.current_step_index];
  std::ostringstream line;
  line << "Step " << s.current_step_index + 1 << " of " << task.steps.size() << ": "
       << step.text;
  reply.say(line.str());
  reply.display.step = StepCard{task.id, step.index, task.steps.size(), step.text};
  if (!config_.facts_enabled) return;

  if (should_seek_feedback(s.policy_state)) {
    reply.say("By the way, did you find that fact interesting?");
    mark_feedback_sought(s.policy_state);
    s.resume_phase = SessionPhase::kExecuting;
    s.phase = SessionPhase::kAwaitingFeedback;
    return;
  }

  const CuratedFact* fact = select_fact(StepRef{task.id, step.index}, *catalog_,
                                        s.policy_state.shown_fact_ids);
  const bool ask = needs_permission(DialoguePhase::kExecution, config_.policy);
  std::size_t words = word_count(reply.text);
  if (fact != nullptr) {
    words = ask ? word_count(fact_sentence(*fact) + " " + resume_prompt(SessionPhase::kExecuting))
                : word_count(reply.text + " " + fact_sentence(*fact));
  }
  PolicyTrace trace;
  trace.phase = DialoguePhase::kExecution;
  trace.fact_id = fact != nullptr ? fact->id : "";
  trace.prospective_word_count = words;
  trace.decision = evaluate_show_fact(s.policy_state, config_.policy, fact != nullptr, words,
                                      DialoguePhase::kExecution);
  trace.outcome = "none";
  if (trace.decision.show()) {
    if (ask) {
      reply.say("Would you like to hear an interesting fact about " + fact->entity.name + "?");
      s.pending_fact = fact->id;
      s.resume_phase = SessionPhase::kExecuting;
      s.phase = SessionPhase::kAwaitingFactPermission;
      reply.event = FactEvent::kOffered;
      trace.outcome = "offered";
    } else {
      reply.say(fact_sentence(*fact));
      record_fact_shown(s.policy_state, fact->id);
      s.last_shown_fact = fact->id;
      reply.display.fact_card = FactCard{fact->id, fact->text, fact->source_url, fact->provider};
      reply.event = FactEvent::kShown;
      reply.fact_shown = true;
      trace.outcome = "shown";
    }
  }
  reply.trace = std::move(trace);
}

void Engine::show_pending_fact(Session& s, Reply& reply) const {
  const CuratedFact* fact = s.pending_fact ? catalog_->find(*s.pending_fact) : nullptr;
  s.pending_fact.reset();
  s.phase = s.resume_phase;
  const DialoguePhase phase = dialogue_phase_of(s.phase);
  const bool available =
      fact != nullptr && s.policy_state.shown_fact_ids.count(fact->id) == 0;
  std::string body = available ? fact_sentence(*fact) + " " + resume_prompt(s.phase)
                               : resume_prompt(s.phase);

  PolicyTrace trace;
  trace.phase = phase;
  trace.fact_id = fact != nullptr ? fact->id : "";
  trace.prospective_word_count = word_count(body);
  trace.decision = evaluate_show_fact(s.policy_state, config_.policy, available,
                                      trace.prospective_word_count, phase);
  if (trace.decision.show()) {
    reply.say(body);
    record_fact_shown(s.policy_state, fact->id);
    s.last_shown_fact = fact->id;
    reply.display.fact_card = FactCard{fact->id, fact->text, fact->source_url, fact->provider};
    reply.event = FactEvent::kShown;
    reply.fact_shown = true;
    trace.outcome = "shown";
  } else {
    reply.say("Let's keep going.");
    reply.say(resume_prompt(s.phase));
    trace.outcome = "none";
  }
  reply.trace = std::move(trace);
}

void Engine::begin_exit(Session& s, Reply& reply) const {
  s.phase = SessionPhase::kAwaitingRating;
  reply.say("Okay, let's stop here. Before you go, how would you rate this conversation from 1 "
            "to 5?");
}

Session replay_session(const Engine& engine, std::string id,
                       std::span<const std::string> utterances) {
  Session s = engine.start_session(std::move(id));
  for (const auto& u : utterances) engine.handle_turn(s, u);
  return s;
}

std::vector<std::string> user_utterances(const Session& session) {
  std::vector<std::string> out;
  for (const auto& t : session.turn_log) {
    if (t.speaker == Speaker::kUser) out.push_back(t.text);
  }
  return out;
}

json to_json(const Session& s) {
  json turns = json::array();
  for (const auto& t : s.turn_log) turns.push_back(to_json(t));
  json feedback = json::array();
  for (const auto& f : s.fact_feedback) {
    feedback.push_back(json{{"fact_id", f.fact_id}, {"liked", f.liked}});
  }
  json j{{"session_id", s.id},
         {"phase", std::string(to_string(s.phase))},
         {"task_id", s.task_id ? json(*s.task_id) : json(nullptr)},
         {"current_step_index", s.current_step_index},
         {"policy_state", to_json(s.policy_state)},
         {"rating", s.rating ? json(*s.rating) : json(nullptr)},
         {"fact_feedback", feedback},
         {"turns", turns}};
  if (s.phase == SessionPhase::kEnded) j["outcome"] = to_json(complete_session(s));
  return j;
}

std::string export_transcript(const Session& s) {
  std::ostringstream out;
  for (const auto& t : s.turn_log) {
    if (t.speaker == Speaker::kUser) {
      out << "#" << t.index << " user: " << t.text << "\n";
      continue;
    }
    out << "#" << t.index << " assistant [" << to_string(t.phase.value_or(s.phase))
        << "]: " << t.text << "\n";
    if (t.fact_event) {
      out << "    fact " << to_string(*t.fact_event);
      if (t.display && t.display->fact_card) {
        const auto& card = *t.display->fact_card;
        out << ": " << card.fact_id << " (" << card.provider << ") " << card.source_url;
      }
      out << "\n";
    }
    if (t.policy_trace) {
      const auto& p = *t.policy_trace;
      out << "    policy " << to_string(p.phase) << " fact=" << (p.fact_id.empty() ? "-" : p.fact_id)
          << " words=" << p.prospective_word_count << " has_fact=" << p.decision.step_has_fact
          << " under_cap=" << p.decision.under_cap << " spacing=" << p.decision.spacing_ok
          << " voice=" << p.decision.voice_friendly << " phase=" << p.decision.phase_permitted
          << " -> " << p.outcome << "\n";
    }
  }
  return out.str();
}

}  // namespace ctafacts
