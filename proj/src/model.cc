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

#include "ctafacts/model.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "ctafacts/text.h"

namespace ctafacts {

std::string_view to_string(EntityType type) {
  switch (type) {
    case EntityType::kIngredient: return "ingredient";
    case EntityType::kRecipe: return "recipe";
    case EntityType::kTool: return "tool";
  }
  return "unknown";
}

EntityType parse_entity_type(std::string_view text) {
  if (text == "ingredient") return EntityType::kIngredient;
  if (text == "recipe") return EntityType::kRecipe;
  if (text == "tool") return EntityType::kTool;
  throw Error("unknown entity type '" + std::string(text) + "'");
}

Entity make_entity(std::string_view name, EntityType type) {
  std::string normalized = text::to_lower(text::trim(name));
  if (normalized.empty()) throw Error("entity name is empty");
  return Entity{std::move(normalized), type};
}

bool is_canonical_entity_name(std::string_view name) {
  return !name.empty() && text::trim(name) == name && text::to_lower(name) == name;
}

std::string_view to_string(Feature feature) {
  switch (feature) {
    case Feature::kConciseness: return "conciseness";
    case Feature::kSpecificity: return "specificity";
    case Feature::kNovelty: return "novelty";
    case Feature::kRelevance: return "relevance";
    case Feature::kInformativeness: return "informativeness";
  }
  return "unknown";
}

int FeatureLabels::get(Feature feature) const {
  switch (feature) {
    case Feature::kConciseness: return conciseness;
    case Feature::kSpecificity: return specificity;
    case Feature::kNovelty: return novelty;
    case Feature::kRelevance: return relevance;
    case Feature::kInformativeness: return informativeness;
  }
  return 0;
}

void FeatureLabels::set(Feature feature, int value) {
  switch (feature) {
    case Feature::kConciseness: conciseness = value; break;
    case Feature::kSpecificity: specificity = value; break;
    case Feature::kNovelty: novelty = value; break;
    case Feature::kRelevance: relevance = value; break;
    case Feature::kInformativeness: informativeness = value; break;
  }
}

bool FeatureLabels::is_binary() const {
  return std::all_of(kAllFeatures.begin(), kAllFeatures.end(), [this](Feature f) {
    int v = get(f);
    return v == 0 || v == 1;
  });
}

double FeatureWeights::get(Feature feature) const {
  switch (feature) {
    case Feature::kNovelty: return novelty;
    case Feature::kSpecificity: return specificity;
    case Feature::kConciseness: return conciseness;
    case Feature::kInformativeness: return informativeness;
    case Feature::kRelevance: return 0.0;
  }
  return 0.0;
}

double FeatureWeights::sum() const {
  return novelty + specificity + conciseness + informativeness;
}

bool FeatureWeights::is_normalized(double tolerance) const {
  for (Feature f : kWeightedFeatures) {
    if (!(get(f) >= 0.0)) return false;
  }
  return std::abs(sum() - 1.0) <= tolerance;
}

double weighted_label_sum(const FeatureLabels& labels, const FeatureWeights& weights) {
  double total = 0.0;
  for (Feature f : kWeightedFeatures) total += weights.get(f) * labels.get(f);
  return total;
}

std::string StepRef::str() const {
  return task_id + ":" + std::to_string(step_index);
}

StepRef StepRef::parse(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw Error("malformed step reference '" + std::string(text) + "'");
  }
  std::string_view digits = text.substr(colon + 1);
  std::size_t index = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) {
    throw Error("malformed step index in '" + std::string(text) + "'");
  }
  return StepRef{std::string(text.substr(0, colon)), index};
}

const CuratedFact* FactStore::find(std::string_view id) const {
  for (const auto& fact : facts) {
    if (fact.id == id) return &fact;
  }
  return nullptr;
}

const Task* TaskCorpus::find(std::string_view id) const {
  for (const auto& task : tasks) {
    if (task.id == id) return &task;
  }
  return nullptr;
}

const TaskStep* TaskCorpus::step(const StepRef& ref) const {
  const Task* task = find(ref.task_id);
  if (task == nullptr || ref.step_index >= task->steps.size()) return nullptr;
  return &task->steps[ref.step_index];
}

std::size_t word_count(std::string_view s) {
  return text::split_whitespace(s).size();
}

std::size_t ValidationReport::count(std::string_view kind) const {
  return static_cast<std::size_t>(std::count_if(
      violations.begin(), violations.end(),
      [kind](const Violation& v) { return v.kind == kind; }));
}

ValidationReport validate_store(std::span<const CuratedFact> facts,
                                const FeatureWeights& weights,
                                std::optional<std::size_t> embedding_dim) {
  ValidationReport report;
  report.record_count = facts.size();
  auto add = [&](std::size_t record, const CuratedFact& fact, std::string kind,
                 std::string message) {
    report.violations.push_back(
        Violation{record, fact.id, std::move(kind), std::move(message)});
  };

  if (!weights.is_normalized()) {
    report.violations.push_back(
        Violation{0, "", "bad weights", "feature weights must be nonnegative and sum to 1"});
  }

  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    const CuratedFact& fact = facts[i];
    const std::size_t record = i + 1;
    if (fact.id.empty()) add(record, fact, "missing id", "fact id is empty");
    if (!fact.id.empty() && !seen.insert(fact.id).second) {
      add(record, fact, "duplicate id", "fact id '" + fact.id + "' repeats");
    }
    if (word_count(fact.text) < kMinFactWords) {
      add(record, fact, "too short", "fact text has fewer than 3 words");
    }
    if (!is_canonical_entity_name(fact.entity.name)) {
      add(record, fact, "bad entity", "entity name must be non-empty, trimmed, lowercase");
    }
    if (text::trim(fact.source_url).empty()) {
      add(record, fact, "missing source", "source_url is empty");
    }
    if (!fact.labels.is_binary()) {
      add(record, fact, "bad label domain", "every feature label must be 0 or 1");
    }
    if (fact.labels.relevance != 1) {
      add(record, fact, "irrelevant", "curated facts must carry relevance = 1");
    }
    if (!(fact.score >= 0.0 && fact.score <= 1.0)) {
      add(record, fact, "score range", "score must lie in [0, 1]");
    }
    double expected = weighted_label_sum(fact.labels, weights);
    if (!(std::abs(fact.score - expected) <= kScoreTolerance)) {
      std::ostringstream msg;
      msg << "score " << fact.score << " differs from weighted label sum " << expected;
      add(record, fact, "score mismatch", msg.str());
    }
    if (fact.embedding) {
      if (embedding_dim && fact.embedding->size() != *embedding_dim) {
        std::ostringstream msg;
        msg << "embedding has " << fact.embedding->size() << " components, store declares "
            << *embedding_dim;
        add(record, fact, "embedding dimension", msg.str());
      }
      for (double x : *fact.embedding) {
        if (!std::isfinite(x)) {
          add(record, fact, "embedding value", "embedding holds a non-finite value");
          break;
        }
      }
    }
  }
  return report;
}

ValidationReport validate_store(const FactStore& store) {
  return validate_store(store.facts, store.weights, store.embedding_dim);
}

ValidationReport validate_corpus(const TaskCorpus& corpus) {
  ValidationReport report;
  report.record_count = corpus.tasks.size();
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < corpus.tasks.size(); ++i) {
    const Task& task = corpus.tasks[i];
    auto add = [&](std::string kind, std::string message) {
      report.violations.push_back(
          Violation{i + 1, task.id, std::move(kind), std::move(message)});
    };
    if (task.id.empty()) add("missing id", "task id is empty");
    if (!task.id.empty() && !seen.insert(task.id).second) {
      add("duplicate id", "task id '" + task.id + "' repeats");
    }
    if (text::trim(task.title).empty()) add("missing title", "task title is empty");
    if (task.steps.empty()) add("no steps", "a task needs at least one step");
    for (std::size_t s = 0; s < task.steps.size(); ++s) {
      if (task.steps[s].index != s) {
        add("step index", "step indices must be contiguous from 0");
        break;
      }
    }
    for (const auto& step : task.steps) {
      for (const auto& entity : step.entities) {
        if (!is_canonical_entity_name(entity.name)) {
          add("bad entity", "entity '" + entity.name + "' is not canonical");
        }
      }
    }
  }
  return report;
}

StoreStats store_stats(std::span<const CuratedFact> facts) {
  if (facts.empty()) throw Error("store is empty; mean fact length is undefined");
  std::set<std::pair<EntityType, std::string>> entities;
  std::set<std::string> providers;
  std::size_t words = 0;
  for (const auto& fact : facts) {
    entities.emplace(fact.entity.type, fact.entity.name);
    providers.insert(fact.provider);
    words += word_count(fact.text);
  }
  StoreStats stats;
  stats.fact_count = facts.size();
  stats.entity_count = entities.size();
  stats.provider_count = providers.size();
  stats.mean_length_words = static_cast<double>(words) / static_cast<double>(facts.size());
  stats.mean_length_rounded = std::lround(stats.mean_length_words);
  return stats;
}

}  // namespace ctafacts
