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

#include "ctafacts/curation.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <sstream>

#include "ctafacts/store_io.h"
#include "ctafacts/text.h"

namespace ctafacts {

using nlohmann::json;

namespace {

Feature parse_feature(std::string_view name) {
  for (Feature f : kAllFeatures) {
    if (to_string(f) == name) return f;
  }
  throw Error("unknown feature '" + std::string(name) + "'");
}

bool is_weighted(Feature f) {
  return std::find(kWeightedFeatures.begin(), kWeightedFeatures.end(), f) !=
         kWeightedFeatures.end();
}

bool is_closer(char c) {
  return c == '"' || c == '\'' || c == ')' || c == ']';
}

// Lowercased token with surrounding punctuation removed.
std::string normalize_token(std::string_view token) {
  std::size_t begin = 0;
  std::size_t end = token.size();
  while (begin < end && !std::isalnum(static_cast<unsigned char>(token[begin]))) ++begin;
  while (end > begin && !std::isalnum(static_cast<unsigned char>(token[end - 1]))) --end;
  return text::to_lower(token.substr(begin, end - begin));
}

std::set<std::string> lowercase_set(const json& j, const char* field) {
  std::set<std::string> out;
  if (!j.is_array()) throw Error(std::string("config field '") + field + "' must be an array");
  for (const auto& v : j) out.insert(text::to_lower(v.get<std::string>()));
  return out;
}

// One sentence of one candidate, tracked through the stages.
struct Unit {
  std::string id;
  std::size_t candidate = 0;
  std::size_t sentence_index = 0;
  std::string sentence;
  double relevance = 0.0;
  std::optional<Entity> entity;
  FeatureLabels labels;
  double score = 0.0;
};

json unit_record(const Unit& u) {
  json j{{"id", u.id}, {"sentence", u.sentence}, {"relevance", u.relevance}};
  if (u.entity) j["entity"] = to_json(*u.entity);
  j["labels"] = to_json(u.labels);
  j["score"] = u.score;
  return j;
}

json unit_records(const std::vector<Unit>& units) {
  json out = json::array();
  for (const auto& u : units) out.push_back(unit_record(u));
  return out;
}

json fact_records(const std::vector<CuratedFact>& facts) {
  json out = json::array();
  for (const auto& f : facts) out.push_back(to_json(f));
  return out;
}

bool score_then_id(const CuratedFact& a, const CuratedFact& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

}  // namespace

GrammaticalRole parse_role(std::string_view text) {
  if (text == "subject") return GrammaticalRole::kSubject;
  if (text == "object") return GrammaticalRole::kObject;
  if (text == "other") return GrammaticalRole::kOther;
  throw Error("unknown grammatical role '" + std::string(text) + "'");
}

std::string_view to_string(GrammaticalRole role) {
  switch (role) {
    case GrammaticalRole::kSubject: return "subject";
    case GrammaticalRole::kObject: return "object";
    case GrammaticalRole::kOther: return "other";
  }
  return "other";
}

std::set<std::string> default_abbreviations() {
  return {"mr.",  "mrs.", "ms.",  "dr.",   "st.",  "jr.",   "sr.",  "vs.",
          "e.g.", "i.e.", "etc.", "approx.", "no.", "u.s.", "mt.", "oz.",
          "lb.",  "lbs.", "tsp.", "tbsp.", "inc.", "co.",  "fig.", "ca."};
}

void CurationConfig::validate() const {
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
    throw Error("similarity_threshold must lie in (0, 1]");
  }
  if (!(relevance_threshold >= 0.0 && relevance_threshold <= 1.0)) {
    throw Error("relevance_threshold must lie in [0, 1]");
  }
  if (!(interestingness_threshold >= 0.0 && interestingness_threshold <= 1.0)) {
    throw Error("interestingness_threshold must lie in [0, 1]");
  }
  if (conciseness_max_words == 0) throw Error("conciseness_max_words must be positive");
  unsigned total = 0;
  for (const auto& [feature, count] : importance_counts) {
    if (!is_weighted(feature)) {
      throw Error("importance count given for unweighted feature '" +
                  std::string(to_string(feature)) + "'");
    }
    total += count;
  }
  if (total == 0) throw Error("importance_counts must not be all zero");
}

CurationConfig curation_config_from_json(const json& j) {
  CurationConfig config;
  config.abbreviations = default_abbreviations();
  try {
    config.similarity_threshold = j.value("similarity_threshold", config.similarity_threshold);
    config.relevance_threshold = j.value("relevance_threshold", config.relevance_threshold);
    config.interestingness_threshold =
        j.value("interestingness_threshold", config.interestingness_threshold);
    config.conciseness_max_words =
        j.value("conciseness_max_words", config.conciseness_max_words);
    if (auto it = j.find("importance_counts"); it != j.end()) {
      for (const auto& [name, count] : it->items()) {
        config.importance_counts[parse_feature(name)] = count.get<unsigned>();
      }
    }
    if (auto it = j.find("domain_lexicon"); it != j.end()) {
      config.domain_lexicon = lowercase_set(*it, "domain_lexicon");
    }
    if (auto it = j.find("stop_words"); it != j.end()) {
      config.stop_words = lowercase_set(*it, "stop_words");
    }
    if (auto it = j.find("abbreviations"); it != j.end()) {
      config.abbreviations = lowercase_set(*it, "abbreviations");
    }
    if (auto it = j.find("annotator_agreement"); it != j.end()) {
      for (const auto& [name, value] : it->items()) {
        config.annotator_agreement[parse_feature(name)] = value.get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("invalid curation config: ") + e.what());
  }
  config.validate();
  return config;
}

json to_json(const CurationConfig& config) {
  json counts = json::object();
  for (const auto& [f, c] : config.importance_counts) counts[std::string(to_string(f))] = c;
  json agreement = json::object();
  for (const auto& [f, a] : config.annotator_agreement) {
    agreement[std::string(to_string(f))] = a;
  }
  return json{{"similarity_threshold", config.similarity_threshold},
              {"relevance_threshold", config.relevance_threshold},
              {"interestingness_threshold", config.interestingness_threshold},
              {"conciseness_max_words", config.conciseness_max_words},
              {"importance_counts", counts},
              {"domain_lexicon", config.domain_lexicon},
              {"stop_words", config.stop_words},
              {"annotator_agreement", agreement}};
}

std::vector<std::string> split_sentences(std::string_view raw,
                                         const std::set<std::string>& abbreviations) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t end = i + 1;
    while (end < raw.size() && is_closer(raw[end])) ++end;
    std::size_t next = end;
    while (next < raw.size() && std::isspace(static_cast<unsigned char>(raw[next]))) ++next;
    if (next == end || next >= raw.size()) continue;
    if (!std::isupper(static_cast<unsigned char>(raw[next]))) continue;
    if (c == '.') {
      std::size_t word_begin = i;
      while (word_begin > start &&
             !std::isspace(static_cast<unsigned char>(raw[word_begin - 1]))) {
        --word_begin;
      }
      std::string word = text::to_lower(raw.substr(word_begin, i + 1 - word_begin));
      if (abbreviations.count(word) > 0) continue;
    }
    auto sentence = text::trim(raw.substr(start, end - start));
    if (!sentence.empty()) out.emplace_back(sentence);
    start = next;
    i = next - 1;
  }
  auto rest = text::trim(raw.substr(std::min(start, raw.size())));
  if (!rest.empty()) out.emplace_back(rest);
  if (out.empty()) out.emplace_back(raw);
  return out;
}

std::vector<std::string> split_sentences(std::string_view raw_text) {
  return split_sentences(raw_text, default_abbreviations());
}

double score_relevance(std::string_view sentence, const std::set<std::string>& lexicon,
                       const std::set<std::string>& stop_words) {
  if (lexicon.empty()) throw Error("relevance lexicon is empty");
  auto tokens = text::word_tokens(sentence);
  if (tokens.empty()) throw Error("cannot score an empty sentence");
  std::size_t kept = 0;
  std::size_t hits = 0;
  for (const auto& token : tokens) {
    if (stop_words.count(token) > 0) continue;
    ++kept;
    if (lexicon.count(token) > 0) ++hits;
  }
  if (kept == 0) return 0.0;
  return static_cast<double>(hits) / static_cast<double>(kept);
}

std::optional<Entity> match_entity(const std::vector<RoleToken>& tokens,
                                   const std::vector<Entity>& entities) {
  std::vector<std::string> words;
  words.reserve(tokens.size());
  for (const auto& t : tokens) words.push_back(normalize_token(t.token));

  struct Pattern {
    const Entity* entity;
    std::vector<std::string> words;
  };
  std::vector<Pattern> patterns;
  for (const auto& e : entities) {
    auto parts = text::split_whitespace(text::to_lower(e.name));
    if (!parts.empty()) patterns.push_back(Pattern{&e, std::move(parts)});
  }
  // Longest span wins when two entities start at the same token.
  std::stable_sort(patterns.begin(), patterns.end(), [](const Pattern& a, const Pattern& b) {
    return a.words.size() > b.words.size();
  });

  for (std::size_t start = 0; start < words.size(); ++start) {
    for (const auto& p : patterns) {
      if (start + p.words.size() > words.size()) continue;
      bool match = true;
      bool has_role = false;
      for (std::size_t k = 0; k < p.words.size(); ++k) {
        if (!text::plural_tolerant_equal(words[start + k], p.words[k])) {
          match = false;
          break;
        }
        auto role = tokens[start + k].role;
        if (role == GrammaticalRole::kSubject || role == GrammaticalRole::kObject) {
          has_role = true;
        }
      }
      if (match && has_role) return *p.entity;
    }
  }
  return std::nullopt;
}

FeatureWeights compute_feature_weights(const std::map<Feature, unsigned>& importance_counts) {
  double total = 0.0;
  for (const auto& [feature, count] : importance_counts) {
    if (!is_weighted(feature)) {
      throw Error("feature '" + std::string(to_string(feature)) + "' carries no weight");
    }
    total += count;
  }
  if (total <= 0.0) throw Error("importance counts are all zero");
  auto weight = [&](Feature f) {
    auto it = importance_counts.find(f);
    return it == importance_counts.end() ? 0.0 : it->second / total;
  };
  FeatureWeights w;
  w.novelty = weight(Feature::kNovelty);
  w.specificity = weight(Feature::kSpecificity);
  w.conciseness = weight(Feature::kConciseness);
  w.informativeness = weight(Feature::kInformativeness);
  return w;
}

double score_interestingness(const FeatureLabels& labels, const FeatureWeights& weights) {
  if (labels.relevance != 1) throw Error("not scoreable; gated out as irrelevant");
  return weighted_label_sum(labels, weights);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("embedding dimensions differ");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error("cosine similarity of a zero vector is undefined");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<CuratedFact> dedup_facts(std::vector<CuratedFact> facts, double threshold) {
  std::optional<std::size_t> dim;
  for (const auto& f : facts) {
    if (!f.embedding) throw Error("fact '" + f.id + "' has no embedding");
    if (dim && f.embedding->size() != *dim) throw Error("embedding dimensions differ");
    dim = f.embedding->size();
    if (std::all_of(f.embedding->begin(), f.embedding->end(),
                    [](double x) { return x == 0.0; })) {
      throw Error("fact '" + f.id + "' has a zero embedding");
    }
  }
  std::stable_sort(facts.begin(), facts.end(), score_then_id);
  std::vector<CuratedFact> kept;
  for (auto& candidate : facts) {
    bool distinct = std::all_of(kept.begin(), kept.end(), [&](const CuratedFact& k) {
      return cosine_similarity(*candidate.embedding, *k.embedding) < threshold;
    });
    if (distinct) kept.push_back(std::move(candidate));
  }
  return kept;
}

StepLinks link_facts_to_steps(std::vector<CuratedFact>& facts, const TaskCorpus& corpus) {
  StepLinks links;
  for (auto& fact : facts) {
    fact.linked_steps.clear();
    for (const auto& task : corpus.tasks) {
      for (const auto& step : task.steps) {
        bool mentions = std::find(step.entities.begin(), step.entities.end(), fact.entity) !=
                        step.entities.end();
        if (mentions) fact.linked_steps.push_back(StepRef{task.id, step.index});
      }
    }
  }
  std::vector<const CuratedFact*> ranked;
  for (const auto& f : facts) ranked.push_back(&f);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const CuratedFact* a, const CuratedFact* b) { return score_then_id(*a, *b); });
  for (const CuratedFact* f : ranked) {
    for (const auto& ref : f->linked_steps) links[ref].push_back(f->id);
  }
  return links;
}

void load_external_annotations(std::istream& in, ExternalAnnotations& out) {
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    ++record;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(record, "<line>", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw ParseError(record, "id", "missing candidate id");
    }
    std::string id = j["id"].get<std::string>();
    if (auto it = j.find("relevance"); it != j.end()) {
      if (!it->is_number()) throw ParseError(record, "relevance", "expected a number");
      out.relevance[id] = it->get<double>();
    }
    if (auto it = j.find("labels"); it != j.end()) {
      out.labels[id] = labels_from_json(*it, record);
    }
  }
}

json to_json(const PipelineReport& r) {
  return json{{"candidates", r.candidates},
              {"sentences", r.sentences},
              {"relevance_dropped", r.relevance_dropped},
              {"entity_dropped", r.entity_dropped},
              {"quarantined", r.quarantined},
              {"interestingness_dropped", r.interestingness_dropped},
              {"dedup_dropped", r.dedup_dropped},
              {"dedup_skipped", r.dedup_skipped},
              {"stored", r.stored},
              {"unlinked", r.unlinked},
              {"quarantined_ids", r.quarantined_ids},
              {"unlinked_ids", r.unlinked_ids},
              {"weights", to_json(r.weights)},
              {"config", to_json(r.config)}};
}

PipelineResult run_pipeline(const std::vector<CandidateFact>& candidates,
                            const CurationConfig& config, const TaskCorpus& corpus,
                            const ExternalAnnotations& external, const StageDump& dump) {
  try {
    config.validate();
  } catch (const Error& e) {
    throw StageError("config", e.what());
  }
  PipelineResult result;
  PipelineReport& report = result.report;
  report.config = config;
  report.candidates = candidates.size();
  report.weights = compute_feature_weights(config.importance_counts);
  result.store.weights = report.weights;
  auto emit = [&](std::string_view stage, const json& records) {
    if (dump) dump(stage, records);
  };

  // Split.
  std::vector<Unit> units;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& cand = candidates[c];
    if (text::trim(cand.raw_text).empty()) {
      throw StageError("split", "candidate '" + cand.id + "' has empty text");
    }
    auto sentences = split_sentences(cand.raw_text, config.abbreviations);
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      Unit u;
      u.id = sentences.size() == 1 ? cand.id : cand.id + "-s" + std::to_string(s + 1);
      u.candidate = c;
      u.sentence_index = s;
      u.sentence = std::move(sentences[s]);
      units.push_back(std::move(u));
    }
  }
  report.sentences = units.size();
  emit("split", unit_records(units));

  // Relevance gate.
  {
    std::vector<Unit> kept;
    for (auto& u : units) {
      if (auto it = external.relevance.find(u.id); it != external.relevance.end()) {
        u.relevance = it->second;
      } else {
        try {
          u.relevance = score_relevance(u.sentence, config.domain_lexicon, config.stop_words);
        } catch (const Error& e) {
          throw StageError("relevance", "'" + u.id + "': " + e.what());
        }
      }
      if (u.relevance >= config.relevance_threshold) {
        kept.push_back(std::move(u));
      } else {
        ++report.relevance_dropped;
      }
    }
    units = std::move(kept);
  }
  emit("relevance", unit_records(units));

  // Entity match on subject/object spans.
  {
    std::vector<Entity> entities;
    for (const auto& task : corpus.tasks) {
      for (const auto& step : task.steps) {
        for (const auto& e : step.entities) {
          if (std::find(entities.begin(), entities.end(), e) == entities.end()) {
            entities.push_back(e);
          }
        }
      }
    }
    std::vector<Unit> kept;
    for (auto& u : units) {
      const auto& cand = candidates[u.candidate];
      if (cand.token_annotations && u.sentence_index < cand.token_annotations->size()) {
        u.entity = match_entity((*cand.token_annotations)[u.sentence_index], entities);
      }
      if (u.entity) {
        kept.push_back(std::move(u));
      } else {
        ++report.entity_dropped;
      }
    }
    units = std::move(kept);
  }
  emit("entity", unit_records(units));

  // Label acquisition.
  {
    std::vector<Unit> kept;
    for (auto& u : units) {
      const auto& cand = candidates[u.candidate];
      std::optional<FeatureLabels> labels;
      if (auto it = external.labels.find(u.id); it != external.labels.end()) {
        labels = it->second;
      } else if (cand.annotator_labels) {
        labels = cand.annotator_labels;
      }
      if (!labels) {
        // Only conciseness can be derived here; the remaining judgements need
        // annotators, so the sentence waits in quarantine.
        ++report.quarantined;
        report.quarantined_ids.push_back(u.id);
        continue;
      }
      if (!labels->is_binary()) {
        throw StageError("labels", "'" + u.id + "' has a non-binary label");
      }
      if (labels->relevance != 1) {
        ++report.relevance_dropped;
        continue;
      }
      u.labels = *labels;
      kept.push_back(std::move(u));
    }
    units = std::move(kept);
  }
  emit("labels", unit_records(units));

  // Interestingness threshold.
  std::vector<CuratedFact> facts;
  for (auto& u : units) {
    u.score = score_interestingness(u.labels, report.weights);
    if (u.score < config.interestingness_threshold) {
      ++report.interestingness_dropped;
      continue;
    }
    const auto& cand = candidates[u.candidate];
    CuratedFact f;
    f.id = u.id;
    f.text = u.sentence;
    f.entity = *u.entity;
    f.source_url = cand.source_url;
    f.provider = cand.provider;
    f.labels = u.labels;
    f.score = u.score;
    f.embedding = cand.embedding;
    f.overall_interesting = cand.overall_interesting;
    facts.push_back(std::move(f));
  }
  emit("interestingness", fact_records(facts));

  // Dedup.
  std::size_t with_embedding = static_cast<std::size_t>(std::count_if(
      facts.begin(), facts.end(), [](const CuratedFact& f) { return f.embedding.has_value(); }));
  if (with_embedding == 0) {
    report.dedup_skipped = !facts.empty();
    std::stable_sort(facts.begin(), facts.end(), score_then_id);
  } else {
    std::size_t before = facts.size();
    try {
      facts = dedup_facts(std::move(facts), config.similarity_threshold);
    } catch (const Error& e) {
      throw StageError("dedup", e.what());
    }
    report.dedup_dropped = before - facts.size();
    result.store.embedding_dim = facts.front().embedding->size();
  }
  emit("dedup", fact_records(facts));

  // Link.
  link_facts_to_steps(facts, corpus);
  for (const auto& f : facts) {
    if (f.linked_steps.empty()) {
      ++report.unlinked;
      report.unlinked_ids.push_back(f.id);
    }
  }
  emit("link", fact_records(facts));

  report.stored = facts.size();
  result.store.facts = std::move(facts);
  return result;
}

CandidateFact candidate_from_json(const json& j, std::size_t record) {
  if (!j.is_object()) throw ParseError(record, "<record>", "expected an object");
  auto str = [&](const char* field, bool required) -> std::string {
    auto it = j.find(field);
    if (it == j.end()) {
      if (required) throw ParseError(record, field, "missing");
      return {};
    }
    if (!it->is_string()) throw ParseError(record, field, "expected a string");
    return it->get<std::string>();
  };
  CandidateFact c;
  c.id = str("id", true);
  c.raw_text = str("raw_text", true);
  c.source_url = str("source_url", false);
  c.provider = str("provider", false);
  if (auto it = j.find("token_annotations"); it != j.end() && !it->is_null()) {
    std::vector<std::vector<RoleToken>> sentences;
    try {
      for (const auto& sentence : *it) {
        std::vector<RoleToken> tokens;
        for (const auto& pair : sentence) {
          tokens.push_back(RoleToken{pair.at(0).get<std::string>(),
                                     parse_role(pair.at(1).get<std::string>())});
        }
        sentences.push_back(std::move(tokens));
      }
    } catch (const std::exception& e) {
      throw ParseError(record, "token_annotations", e.what());
    }
    c.token_annotations = std::move(sentences);
  }
  if (auto it = j.find("embedding"); it != j.end() && !it->is_null()) {
    try {
      c.embedding = it->get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ParseError(record, "embedding", e.what());
    }
  }
  if (auto it = j.find("annotator_labels"); it != j.end() && !it->is_null()) {
    c.annotator_labels = labels_from_json(*it, record);
  }
  if (auto it = j.find("overall_interesting"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw ParseError(record, "overall_interesting", "expected a boolean");
    c.overall_interesting = it->get<bool>();
  }
  return c;
}

std::vector<CandidateFact> parse_candidates(std::istream& in) {
  std::vector<CandidateFact> out;
  std::string line;
  std::size_t record = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(record + 1, "<line>", std::string("invalid JSON: ") + e.what());
    }
    if (first && j.is_object() && j.contains("format_version")) {
      first = false;
      continue;
    }
    first = false;
    ++record;
    out.push_back(candidate_from_json(j, record));
  }
  return out;
}

}  // namespace ctafacts
