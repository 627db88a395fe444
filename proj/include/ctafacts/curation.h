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

// Turns annotated candidate facts into a curated, deduplicated store whose
// facts are linked to the task steps that mention their entity.
//
// Stage order per sentence: split -> relevance gate -> entity match -> label
// acquisition -> interestingness threshold -> dedup -> step linking.

#ifndef CTAFACTS_CURATION_H_
#define CTAFACTS_CURATION_H_

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctafacts/model.h"
#include "json.hpp"

namespace ctafacts {

enum class GrammaticalRole { kSubject, kObject, kOther };

GrammaticalRole parse_role(std::string_view text);
std::string_view to_string(GrammaticalRole role);

struct RoleToken {
  std::string token;
  GrammaticalRole role = GrammaticalRole::kOther;
};

// A raw fact before curation. Dependency roles come from the ingestion
// annotations, one token list per sentence.
struct CandidateFact {
  std::string id;
  std::string raw_text;
  std::string source_url;
  std::string provider;
  std::optional<std::vector<std::vector<RoleToken>>> token_annotations;
  std::optional<std::vector<double>> embedding;
  std::optional<FeatureLabels> annotator_labels;
  std::optional<bool> overall_interesting;
};

struct CurationConfig {
  double similarity_threshold = 0.85;
  double relevance_threshold = 0.2;
  double interestingness_threshold = 0.5;
  std::size_t conciseness_max_words = 30;
  // How often annotators picked each weighted feature as most important.
  std::map<Feature, unsigned> importance_counts;
  std::set<std::string> domain_lexicon;
  std::set<std::string> stop_words;
  std::set<std::string> abbreviations;
  // Per-feature inter-annotator agreement. Metadata only.
  std::map<Feature, double> annotator_agreement;

  // Throws Error if the configuration breaks an invariant.
  void validate() const;
};

std::set<std::string> default_abbreviations();

CurationConfig curation_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CurationConfig& config);

// Sentence boundaries fall after '.', '!' or '?' (plus any closing quotes or
// brackets) when followed by whitespace and an uppercase letter, unless the
// token ending there is a listed abbreviation.
std::vector<std::string> split_sentences(std::string_view raw_text,
                                         const std::set<std::string>& abbreviations);
std::vector<std::string> split_sentences(std::string_view raw_text);

// Fraction of non-stop-word tokens that appear in the lexicon.
double score_relevance(std::string_view sentence, const std::set<std::string>& lexicon,
                       const std::set<std::string>& stop_words = {});

// First entity, in sentence order, whose token span contains a subject or
// object. Spans match case-insensitively, tolerating a trailing "s"/"es".
std::optional<Entity> match_entity(const std::vector<RoleToken>& tokens,
                                   const std::vector<Entity>& entities);

FeatureWeights compute_feature_weights(const std::map<Feature, unsigned>& importance_counts);

// Throws Error if the labels are not relevant.
double score_interestingness(const FeatureLabels& labels, const FeatureWeights& weights);

// Throws Error on a dimension mismatch or a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Greedy dedup in descending score order, ties by ascending id. Returns the
// retained facts in that order.
std::vector<CuratedFact> dedup_facts(std::vector<CuratedFact> facts, double threshold);

using StepLinks = std::map<StepRef, std::vector<std::string>>;

// Fills in `linked_steps` for every fact and returns the per-step fact ids,
// each list sorted by descending score.
StepLinks link_facts_to_steps(std::vector<CuratedFact>& facts, const TaskCorpus& corpus);

// Externally supplied per-sentence scores and labels, keyed by unit id.
struct ExternalAnnotations {
  std::unordered_map<std::string, double> relevance;
  std::unordered_map<std::string, FeatureLabels> labels;
};

// Reads line-delimited {"id": ..., "relevance": x} and/or
// {"id": ..., "labels": {...}} records.
void load_external_annotations(std::istream& in, ExternalAnnotations& out);

struct PipelineReport {
  std::size_t candidates = 0;
  std::size_t sentences = 0;
  std::size_t relevance_dropped = 0;
  std::size_t entity_dropped = 0;
  std::size_t quarantined = 0;
  std::size_t interestingness_dropped = 0;
  std::size_t dedup_dropped = 0;
  std::size_t stored = 0;
  std::size_t unlinked = 0;
  bool dedup_skipped = false;
  std::vector<std::string> quarantined_ids;
  std::vector<std::string> unlinked_ids;
  FeatureWeights weights;
  CurationConfig config;

  std::size_t dropped_total() const {
    return relevance_dropped + entity_dropped + interestingness_dropped + dedup_dropped;
  }
};

nlohmann::json to_json(const PipelineReport& report);

// Called after each stage with the stage name and the surviving records.
using StageDump = std::function<void(std::string_view stage, const nlohmann::json& records)>;

struct PipelineResult {
  FactStore store;
  PipelineReport report;
};

PipelineResult run_pipeline(const std::vector<CandidateFact>& candidates,
                            const CurationConfig& config, const TaskCorpus& corpus,
                            const ExternalAnnotations& external = {},
                            const StageDump& dump = {});

CandidateFact candidate_from_json(const nlohmann::json& j, std::size_t record);
std::vector<CandidateFact> parse_candidates(std::istream& in);

// Raised with the name of the pipeline stage that failed.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error("stage '" + stage + "': " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace ctafacts

#endif  // CTAFACTS_CURATION_H_
