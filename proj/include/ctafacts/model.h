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

#ifndef CTAFACTS_MODEL_H_
#define CTAFACTS_MODEL_H_

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ctafacts {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EntityType { kIngredient, kRecipe, kTool };

std::string_view to_string(EntityType type);
EntityType parse_entity_type(std::string_view text);

// An ingredient, recipe or tool mentioned by task steps and facts. Names are
// canonical: trimmed and lowercase.
struct Entity {
  std::string name;
  EntityType type = EntityType::kIngredient;

  friend bool operator==(const Entity&, const Entity&) = default;
  friend auto operator<=>(const Entity&, const Entity&) = default;
};

// Builds an entity with a normalized name. Throws Error on an empty name.
Entity make_entity(std::string_view name, EntityType type);

// True if `name` is already in canonical form.
bool is_canonical_entity_name(std::string_view name);

enum class Feature {
  kConciseness,
  kSpecificity,
  kNovelty,
  kRelevance,
  kInformativeness,
};

std::string_view to_string(Feature feature);

// The features that carry weight, in annotator-preferred rank order.
// Relevance is a gate and never contributes to the score.
inline constexpr std::array<Feature, 4> kWeightedFeatures = {
    Feature::kNovelty, Feature::kSpecificity, Feature::kConciseness,
    Feature::kInformativeness};

inline constexpr std::array<Feature, 5> kAllFeatures = {
    Feature::kConciseness, Feature::kSpecificity, Feature::kNovelty,
    Feature::kRelevance, Feature::kInformativeness};

// Per-feature annotations. Values are kept as integers so that out-of-domain
// values read from disk survive until validation reports them.
struct FeatureLabels {
  int conciseness = 0;
  int specificity = 0;
  int novelty = 0;
  int relevance = 0;
  int informativeness = 0;

  int get(Feature feature) const;
  void set(Feature feature, int value);
  bool is_binary() const;

  friend bool operator==(const FeatureLabels&, const FeatureLabels&) = default;
};

struct FeatureWeights {
  double novelty = 0.0;
  double specificity = 0.0;
  double conciseness = 0.0;
  double informativeness = 0.0;

  double get(Feature feature) const;
  double sum() const;
  // Nonnegative and summing to one within `tolerance`.
  bool is_normalized(double tolerance = 1e-9) const;

  friend bool operator==(const FeatureWeights&, const FeatureWeights&) = default;
};

// Sum of weight * label over the weighted features. No relevance gate.
double weighted_label_sum(const FeatureLabels& labels,
                          const FeatureWeights& weights);

// A (task, step) pair. Serialized as "<task_id>:<step_index>".
struct StepRef {
  std::string task_id;
  std::size_t step_index = 0;

  std::string str() const;
  static StepRef parse(std::string_view text);

  friend bool operator==(const StepRef&, const StepRef&) = default;
  friend auto operator<=>(const StepRef&, const StepRef&) = default;
};

struct CuratedFact {
  std::string id;
  std::string text;
  Entity entity;
  std::string source_url;
  std::string provider;
  FeatureLabels labels;
  double score = 0.0;
  std::optional<std::vector<double>> embedding;
  std::vector<StepRef> linked_steps;
  // Annotators' overall judgement, kept alongside the schema score.
  std::optional<bool> overall_interesting;

  friend bool operator==(const CuratedFact&, const CuratedFact&) = default;
};

struct TaskStep {
  std::size_t index = 0;
  std::string text;
  std::vector<Entity> entities;

  friend bool operator==(const TaskStep&, const TaskStep&) = default;
};

struct Task {
  std::string id;
  std::string title;
  std::vector<TaskStep> steps;

  friend bool operator==(const Task&, const Task&) = default;
};

// A curated fact collection together with the weights its scores were
// computed under.
struct FactStore {
  FeatureWeights weights;
  std::optional<std::size_t> embedding_dim;
  std::vector<CuratedFact> facts;

  const CuratedFact* find(std::string_view id) const;
};

struct TaskCorpus {
  std::vector<Task> tasks;

  const Task* find(std::string_view id) const;
  const TaskStep* step(const StepRef& ref) const;
};

// Whitespace-delimited token count; punctuation stays attached.
std::size_t word_count(std::string_view text);

struct Violation {
  std::size_t record = 0;  // 1-based ordinal within the file body
  std::string id;
  std::string kind;
  std::string message;
};

struct ValidationReport {
  std::size_t record_count = 0;
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(std::string_view kind) const;
};

inline constexpr double kScoreTolerance = 1e-6;
inline constexpr std::size_t kMinFactWords = 3;

ValidationReport validate_store(std::span<const CuratedFact> facts,
                                const FeatureWeights& weights,
                                std::optional<std::size_t> embedding_dim = {});
ValidationReport validate_store(const FactStore& store);

ValidationReport validate_corpus(const TaskCorpus& corpus);

struct StoreStats {
  std::size_t fact_count = 0;
  std::size_t entity_count = 0;
  std::size_t provider_count = 0;
  double mean_length_words = 0.0;
  long mean_length_rounded = 0;
};

// Throws Error on an empty store.
StoreStats store_stats(std::span<const CuratedFact> facts);

}  // namespace ctafacts

#endif  // CTAFACTS_MODEL_H_
