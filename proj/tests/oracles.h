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

// Reference implementations the tests compare the library against. These are
// written from the rules directly and share no code with src/.

#ifndef CTAFACTS_TESTS_ORACLES_H_
#define CTAFACTS_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ctafacts/curation.h"
#include "ctafacts/policy.h"

namespace ctafacts::testing {

// Brute-force weighted sum over the four weighted labels, spelled out.
inline double oracle_score(int novelty, int specificity, int conciseness, int informativeness,
                           double w_novelty, double w_specificity, double w_conciseness,
                           double w_informativeness) {
  double total = 0.0;
  if (novelty) total += w_novelty;
  if (specificity) total += w_specificity;
  if (conciseness) total += w_conciseness;
  if (informativeness) total += w_informativeness;
  return total;
}

inline double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(dot / std::sqrt(na * nb));
}

struct OracleItem {
  std::string id;
  double score = 0.0;
  std::vector<double> vec;
};

// Full pairwise matrix, then a greedy replay in (score desc, id asc) order.
inline std::vector<std::string> oracle_dedup(const std::vector<OracleItem>& items,
                                             double threshold) {
  const std::size_t n = items.size();
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sim[i][j] = oracle_cosine(items[i].vec, items[j].vec);
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (items[a].score != items[b].score) return items[a].score > items[b].score;
    return items[a].id < items[b].id;
  });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool ok = true;
    for (std::size_t k : kept) {
      if (sim[i][k] >= threshold) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(i);
  }
  std::vector<std::string> ids;
  for (std::size_t k : kept) ids.push_back(items[k].id);
  return ids;
}

inline std::vector<double> random_unit_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

// Every (task, step) whose entity list holds the fact's entity, by scanning the
// whole cross product.
inline std::vector<std::string> oracle_links(const Entity& entity, const TaskCorpus& corpus) {
  std::vector<std::string> out;
  for (const auto& task : corpus.tasks) {
    for (const auto& step : task.steps) {
      for (const auto& e : step.entities) {
        if (e.name == entity.name && e.type == entity.type) {
          out.push_back(task.id + ":" + std::to_string(step.index));
          break;
        }
      }
    }
  }
  return out;
}

// One turn as seen by the invariant checker.
struct TraceTurn {
  DialoguePhase phase = DialoguePhase::kSearch;
  bool shown = false;
  std::string fact_id;
  bool rejected = false;
  bool feedback_asked = false;
};

struct InvariantReport {
  std::size_t cap = 0;
  std::size_t spacing = 0;
  std::size_t repeats = 0;
  std::size_t feedback = 0;
  std::size_t mode = 0;

  std::size_t total() const { return cap + spacing + repeats + feedback + mode; }
};

// Checks the five session invariants over a turn trace.
inline InvariantReport check_invariants(const std::vector<TraceTurn>& turns,
                                        const PolicyParams& params) {
  InvariantReport r;
  std::size_t shown = 0;
  std::optional<std::size_t> shown_at_rejection;
  std::optional<std::size_t> last_shown_turn;
  std::set<std::string> ids;
  std::size_t feedback = 0;
  for (std::size_t t = 0; t < turns.size(); ++t) {
    const auto& turn = turns[t];
    if (turn.feedback_asked) ++feedback;
    if (turn.rejected && !shown_at_rejection) shown_at_rejection = shown;
    if (!turn.shown) continue;
    ++shown;
    if (shown > params.max_facts) ++r.cap;
    if (shown_at_rejection) {
      std::size_t c = *shown_at_rejection;
      std::size_t bound = (c >= 1 ? 0 : 1 - c) + c;
      if (shown > bound) ++r.cap;
    }
    if (last_shown_turn && t - *last_shown_turn - 1 < params.min_turns_btw_facts) ++r.spacing;
    last_shown_turn = t;
    if (!ids.insert(turn.fact_id).second) ++r.repeats;
    if (params.mode == PlacementMode::kSearchOnly && turn.phase == DialoguePhase::kExecution) {
      ++r.mode;
    }
    if (params.mode == PlacementMode::kExecutionOnly && turn.phase == DialoguePhase::kSearch) {
      ++r.mode;
    }
  }
  if (feedback > 1) r.feedback = feedback - 1;
  return r;
}

// Drives the policy functions through one random session of `turns` turns.
// Each turn has a random phase, candidate fact, word count and user reaction
// (accept, reject or bypass an offer; answer or skip a feedback question).
inline std::vector<TraceTurn> random_policy_session(std::mt19937_64& rng,
                                                    const PolicyParams& params,
                                                    std::size_t turns) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> pool(0, 11);
  std::uniform_int_distribution<int> words(5, 90);
  std::uniform_int_distribution<int> reaction(0, 2);
  PolicyState state = PolicyState::initial(params);
  std::vector<TraceTurn> trace;
  std::optional<std::string> pending;
  for (std::size_t t = 0; t < turns; ++t) {
    TraceTurn turn;
    turn.phase = coin(rng) ? DialoguePhase::kSearch : DialoguePhase::kExecution;
    bool shown_now = false;
    if (pending) {
      // This turn answers the outstanding offer.
      int r = reaction(rng);
      if (r == 0) {
        const bool ok = show_fact_at_step(state, params, state.shown_fact_ids.count(*pending) == 0,
                                          static_cast<std::size_t>(words(rng)), turn.phase);
        if (ok) {
          record_fact_shown(state, *pending);
          turn.shown = true;
          turn.fact_id = *pending;
          shown_now = true;
        }
      } else if (r == 1) {
        handle_fact_rejection(state);
        turn.rejected = true;
      }
      pending.reset();
    } else {
      std::string id = "f" + std::to_string(pool(rng));
      const bool has_fact = coin(rng) && state.shown_fact_ids.count(id) == 0;
      const bool ok = show_fact_at_step(state, params, has_fact,
                                        static_cast<std::size_t>(words(rng)), turn.phase);
      if (ok) {
        if (needs_permission(turn.phase, params)) {
          pending = id;
        } else {
          record_fact_shown(state, id);
          turn.shown = true;
          turn.fact_id = id;
          shown_now = true;
        }
      } else if (!shown_now && should_seek_feedback(state) && coin(rng)) {
        mark_feedback_sought(state);
        turn.feedback_asked = true;
      }
    }
    if (!shown_now) complete_turn(state);
    trace.push_back(turn);
  }
  return trace;
}

inline PolicyParams random_policy_params(std::mt19937_64& rng) {
  std::uniform_int_distribution<unsigned> max_facts(1, 5);
  std::uniform_int_distribution<unsigned> min_turns(0, 5);
  std::uniform_int_distribution<unsigned> bound(20, 80);
  std::uniform_int_distribution<int> mode(0, 2);
  std::uniform_int_distribution<int> ask(0, 2);
  PolicyParams p;
  p.max_facts = max_facts(rng);
  p.min_turns_btw_facts = min_turns(rng);
  p.voice_word_bound = bound(rng);
  p.mode = static_cast<PlacementMode>(mode(rng));
  int a = ask(rng);
  p.always_ask = a == 1;
  p.never_ask = a == 2;
  return p;
}

}  // namespace ctafacts::testing

#endif  // CTAFACTS_TESTS_ORACLES_H_
