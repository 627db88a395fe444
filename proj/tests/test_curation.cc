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

#include <fstream>
#include <random>
#include <sstream>

#include "ctafacts/curation.h"
#include "ctafacts/store_io.h"
#include "ctafacts/text.h"
#include "doctest.h"
#include "oracles.h"
#include "test_support.h"

using namespace ctafacts;
using namespace ctafacts::testing;

namespace {

std::vector<RoleToken> tokens(std::initializer_list<std::pair<const char*, GrammaticalRole>> list) {
  std::vector<RoleToken> out;
  for (const auto& [t, r] : list) out.push_back(RoleToken{t, r});
  return out;
}

constexpr auto S = GrammaticalRole::kSubject;
constexpr auto O = GrammaticalRole::kObject;
constexpr auto X = GrammaticalRole::kOther;

CurationConfig base_config() {
  CurationConfig c;
  c.abbreviations = default_abbreviations();
  c.importance_counts = {{Feature::kNovelty, 4},
                         {Feature::kSpecificity, 3},
                         {Feature::kConciseness, 2},
                         {Feature::kInformativeness, 1}};
  c.domain_lexicon = {"baking", "soda", "sweet", "potato", "potatoes", "dye", "cake"};
  return c;
}

TaskCorpus small_corpus() {
  TaskCorpus corpus;
  Task a{"biscuits", "Biscuits", {}};
  a.steps.push_back(TaskStep{0, "Whisk flour and baking soda.", {Entity{"baking soda", EntityType::kIngredient}}});
  a.steps.push_back(TaskStep{1, "Bake.", {Entity{"oven", EntityType::kTool}}});
  a.steps.push_back(TaskStep{2, "Dust with more baking soda.", {Entity{"baking soda", EntityType::kIngredient}}});
  Task b{"cake", "Cake", {}};
  b.steps.push_back(TaskStep{0, "Add the baking soda.", {Entity{"baking soda", EntityType::kIngredient}}});
  b.steps.push_back(TaskStep{1, "Roast the sweet potato.", {Entity{"sweet potato", EntityType::kIngredient}}});
  corpus.tasks = {a, b};
  return corpus;
}

CuratedFact fact_with(std::string id, double score, std::vector<double> vec) {
  CuratedFact f;
  f.id = std::move(id);
  f.text = "A fact here.";
  f.score = score;
  f.embedding = std::move(vec);
  return f;
}

}  // namespace

TEST_SUITE("curation") {
  TEST_CASE("split: abbreviation in the stop-list suppresses a boundary") {
    CHECK(split_sentences("A. B was here.", {"a."}).size() == 1);
    CHECK(split_sentences("A. B was here.", std::set<std::string>{}).size() == 2);
  }

  TEST_CASE("split: two terminal periods give two sentences") {
    auto s = split_sentences("Crepes are thin. They fold well.");
    REQUIRE(s.size() == 2);
    CHECK(s[0] == "Crepes are thin.");
    CHECK(s[1] == "They fold well.");
  }

  TEST_CASE("split: single sentence stays whole") {
    CHECK(split_sentences("cotton candy was invented in 1897 by a dentist.").size() == 1);
    CHECK(split_sentences("Mix 1.5 cups of flour. Then rest.").size() == 2);
    CHECK(split_sentences("Really? Yes! Done.").size() == 3);
  }

  TEST_CASE("split preserves non-whitespace characters in order (property)") {
    std::mt19937_64 rng(11);
    const std::string alphabet = "abcXYZ.!? \t\"')e";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<int> len(1, 60);
    auto strip = [](const std::string& s) {
      std::string out;
      for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out += c;
      }
      return out;
    };
    for (int i = 0; i < 2000; ++i) {
      std::string raw;
      for (int k = len(rng); k > 0; --k) raw += alphabet[pick(rng)];
      if (strip(raw).empty()) raw += "x";
      auto parts = split_sentences(raw);
      CHECK(strip(text::join(parts, " ")) == strip(raw));
    }
  }

  TEST_CASE("relevance: full overlap, no overlap and the 1/8 case") {
    std::set<std::string> lexicon{"sausage", "sausages", "cook", "recipe"};
    CHECK(score_relevance("cook sausage recipe", lexicon, {}) == 1.0);
    CHECK(score_relevance("the stock market rose", lexicon, {}) == 0.0);
    // sausages | play a key role in australian politics -> 1 of 8 tokens.
    CHECK(score_relevance("sausages play a key role in australian politics", lexicon, {}) ==
          doctest::Approx(1.0 / 8.0));
  }

  TEST_CASE("relevance: stop words leave the denominator") {
    std::set<std::string> lexicon{"sausages"};
    CHECK(score_relevance("sausages play a key role", lexicon, {"a"}) == doctest::Approx(0.25));
  }

  TEST_CASE("relevance errors") {
    CHECK_THROWS_AS(score_relevance("", {"x"}, {}), Error);
    CHECK_THROWS_AS(score_relevance("some words", {}, {}), Error);
  }

  TEST_CASE("entity: plural span tagged subject matches a singular entity") {
    std::vector<Entity> entities{{"sweet potato", EntityType::kIngredient}};
    auto t = tokens({{"sweet", S}, {"potatoes", S}, {"can", X}, {"be", X}, {"used", X},
                     {"as", X}, {"dye", X}});
    auto m = match_entity(t, entities);
    REQUIRE(m);
    CHECK(m->name == "sweet potato");
  }

  TEST_CASE("entity: span with only 'other' roles does not match") {
    std::vector<Entity> entities{{"sweet potato", EntityType::kIngredient}};
    auto t = tokens({{"dye", S}, {"from", X}, {"sweet", X}, {"potatoes", X}});
    CHECK_FALSE(match_entity(t, entities));
  }

  TEST_CASE("entity: the earlier entity in sentence order wins") {
    std::vector<Entity> entities{{"flour", EntityType::kIngredient},
                                 {"egg", EntityType::kIngredient}};
    auto first_subject = match_entity(tokens({{"egg", S}, {"binds", X}, {"flour", O}}), entities);
    REQUIRE(first_subject);
    CHECK(first_subject->name == "egg");
    auto first_object = match_entity(tokens({{"flour", O}, {"absorbs", X}, {"egg", S}}), entities);
    REQUIRE(first_object);
    CHECK(first_object->name == "flour");
  }

  TEST_CASE("feature weights from counts") {
    using F = Feature;
    auto w = compute_feature_weights({{F::kNovelty, 4}, {F::kSpecificity, 3},
                                      {F::kConciseness, 2}, {F::kInformativeness, 1}});
    CHECK(w.novelty == doctest::Approx(0.4));
    CHECK(w.specificity == doctest::Approx(0.3));
    CHECK(w.conciseness == doctest::Approx(0.2));
    CHECK(w.informativeness == doctest::Approx(0.1));

    auto even = compute_feature_weights({{F::kNovelty, 1}, {F::kSpecificity, 1},
                                         {F::kConciseness, 1}, {F::kInformativeness, 1}});
    CHECK(even.novelty == 0.25);
    CHECK(even.informativeness == 0.25);

    auto single = compute_feature_weights({{F::kNovelty, 1}, {F::kSpecificity, 0},
                                           {F::kConciseness, 0}, {F::kInformativeness, 0}});
    CHECK(single.novelty == 1.0);
    CHECK(single.specificity == 0.0);

    CHECK_THROWS_AS(compute_feature_weights({{F::kNovelty, 0}, {F::kSpecificity, 0},
                                             {F::kConciseness, 0}, {F::kInformativeness, 0}}),
                    Error);
    CHECK_THROWS_AS(compute_feature_weights({{F::kRelevance, 3}, {F::kNovelty, 1}}), Error);
  }

  TEST_CASE("interestingness examples") {
    FeatureWeights w{0.4, 0.3, 0.2, 0.1};
    CHECK(score_interestingness(FeatureLabels{1, 1, 1, 1, 1}, w) == doctest::Approx(1.0));
    CHECK(score_interestingness(FeatureLabels{0, 0, 0, 1, 0}, w) == 0.0);
    // novelty, specificity and informativeness set; conciseness not.
    CHECK(score_interestingness(FeatureLabels{0, 1, 1, 1, 1}, w) == doctest::Approx(0.8));
    CHECK_THROWS_AS(score_interestingness(FeatureLabels{1, 1, 1, 0, 1}, w), Error);
  }

  TEST_CASE("interestingness is monotone in each weighted label (property)") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> bit(0, 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
      double a = unit(rng), b = unit(rng), c = unit(rng), d = unit(rng);
      double t = a + b + c + d;
      FeatureWeights w{a / t, b / t, c / t, d / t};
      FeatureLabels l{bit(rng), bit(rng), bit(rng), 1, bit(rng)};
      double base = score_interestingness(l, w);
      for (Feature f : kWeightedFeatures) {
        if (l.get(f) == 1) continue;
        FeatureLabels up = l;
        up.set(f, 1);
        CHECK(score_interestingness(up, w) >= base);
      }
    }
  }

  TEST_CASE("cosine similarity") {
    std::vector<double> a{1, 0}, b{0, 1}, c{2, 0};
    CHECK(cosine_similarity(a, b) == 0.0);
    CHECK(cosine_similarity(a, c) == doctest::Approx(1.0));
    std::vector<double> zero{0, 0}, three{1, 2, 3};
    CHECK_THROWS_AS(cosine_similarity(a, zero), Error);
    CHECK_THROWS_AS(cosine_similarity(a, three), Error);
  }

  TEST_CASE("dedup: identical vectors keep the higher score") {
    auto kept = dedup_facts({fact_with("low", 0.8, {1, 1}), fact_with("high", 0.9, {1, 1})}, 0.85);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].id == "high");
  }

  TEST_CASE("dedup: orthogonal vectors are both kept") {
    auto kept = dedup_facts({fact_with("a", 0.8, {1, 0}), fact_with("b", 0.9, {0, 1})}, 0.85);
    CHECK(kept.size() == 2);
  }

  TEST_CASE("dedup: zero vector throws") {
    CHECK_THROWS_AS(dedup_facts({fact_with("a", 0.8, {0, 0})}, 0.85), Error);
  }

  TEST_CASE("dedup matches the brute-force greedy replay on 10 random vectors") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> score(0, 4);
      std::vector<CuratedFact> facts;
      std::vector<OracleItem> items;
      for (int i = 0; i < 10; ++i) {
        // Low dimension so near-duplicates actually occur.
        auto v = random_unit_vector(rng, 3);
        double s = score(rng) / 4.0;
        std::string id = "f" + std::to_string(i);
        facts.push_back(fact_with(id, s, v));
        items.push_back(OracleItem{id, s, v});
      }
      auto kept = dedup_facts(facts, 0.85);
      std::vector<std::string> ids;
      for (const auto& f : kept) ids.push_back(f.id);
      CHECK(ids == oracle_dedup(items, 0.85));
      for (std::size_t i = 0; i < kept.size(); ++i) {
        for (std::size_t j = i + 1; j < kept.size(); ++j) {
          CHECK(oracle_cosine(*kept[i].embedding, *kept[j].embedding) < 0.85);
        }
      }
      // The top fact always survives.
      CHECK(ids.front() == oracle_dedup(items, 0.85).front());
      CHECK(dedup_facts(facts, 0.85).size() == kept.size());
    }
  }

  TEST_CASE("link: baking soda fact links to every baking soda step") {
    TaskCorpus corpus = small_corpus();
    CuratedFact soda;
    soda.id = "soda";
    soda.entity = Entity{"baking soda", EntityType::kIngredient};
    soda.score = 0.9;
    CuratedFact tin;
    tin.id = "tin";
    tin.entity = Entity{"baking tin", EntityType::kTool};
    CuratedFact soda2 = soda;
    soda2.id = "soda2";
    soda2.score = 0.95;
    std::vector<CuratedFact> facts{soda, tin, soda2};
    auto links = link_facts_to_steps(facts, corpus);
    // Entity in 3 steps across 2 tasks -> 3 links, same as the cross-product scan.
    std::vector<std::string> refs;
    for (const auto& r : facts[0].linked_steps) refs.push_back(r.str());
    CHECK(refs == oracle_links(soda.entity, corpus));
    CHECK(refs.size() == 3);
    CHECK(facts[1].linked_steps.empty());
    // Per-step lists by descending score.
    CHECK(links[StepRef{"cake", 0}] == std::vector<std::string>{"soda2", "soda"});
  }

  TEST_CASE("link: bundled store links agree with the cross-product scan") {
    auto corpus = fixture_corpus();
    for (const auto& f : fixture_catalog()->store().facts) {
      std::vector<std::string> refs;
      for (const auto& r : f.linked_steps) refs.push_back(r.str());
      CHECK(refs == oracle_links(f.entity, *corpus));
    }
  }

  TEST_CASE("pipeline: no candidates") {
    auto result = run_pipeline({}, base_config(), small_corpus());
    CHECK(result.store.facts.empty());
    CHECK(result.report.candidates == 0);
    CHECK(result.report.sentences == 0);
    CHECK(result.report.dropped_total() == 0);
    CHECK(result.report.quarantined == 0);
  }

  TEST_CASE("pipeline: one annotated relevant candidate is stored and linked") {
    CandidateFact c;
    c.id = "c1";
    c.raw_text = "Baking soda must be replaced every month.";
    c.source_url = "https://tasty.co/baking-soda";
    c.provider = "tasty.co";
    c.token_annotations = std::vector<std::vector<RoleToken>>{
        tokens({{"Baking", S}, {"soda", S}, {"must", X}, {"be", X}, {"replaced", X},
                {"every", X}, {"month", X}})};
    c.annotator_labels = FeatureLabels{1, 1, 1, 1, 1};
    auto result = run_pipeline({c}, base_config(), small_corpus());
    REQUIRE(result.store.facts.size() == 1);
    const auto& f = result.store.facts[0];
    CHECK(f.id == "c1");
    CHECK(f.entity.name == "baking soda");
    CHECK(f.score == doctest::Approx(1.0));
    CHECK(f.linked_steps.size() == 3);
    CHECK(result.report.stored == 1);
    CHECK(result.report.dedup_skipped);
    CHECK(validate_store(result.store).ok());
  }

  TEST_CASE("pipeline: entity miss is counted at the entity stage") {
    CandidateFact c;
    c.id = "c1";
    c.raw_text = "Baking soda is cake magic.";
    c.token_annotations = std::vector<std::vector<RoleToken>>{
        tokens({{"Baking", X}, {"soda", X}, {"is", X}, {"cake", S}, {"magic", X}})};
    c.annotator_labels = FeatureLabels{1, 1, 1, 1, 1};
    auto result = run_pipeline({c}, base_config(), small_corpus());
    CHECK(result.store.facts.empty());
    CHECK(result.report.entity_dropped == 1);
  }

  TEST_CASE("pipeline: unlabeled sentences are quarantined, not scored") {
    CandidateFact c;
    c.id = "c1";
    c.raw_text = "Baking soda is cake magic.";
    c.token_annotations = std::vector<std::vector<RoleToken>>{
        tokens({{"Baking", S}, {"soda", S}, {"is", X}, {"cake", X}, {"magic", X}})};
    auto result = run_pipeline({c}, base_config(), small_corpus());
    CHECK(result.store.facts.empty());
    CHECK(result.report.quarantined == 1);
    CHECK(result.report.quarantined_ids == std::vector<std::string>{"c1"});
  }

  TEST_CASE("pipeline: external relevance and labels override") {
    CandidateFact c;
    c.id = "c1";
    c.raw_text = "Sweet potatoes dye fabric. Nothing else matters here.";
    c.token_annotations = std::vector<std::vector<RoleToken>>{
        tokens({{"Sweet", S}, {"potatoes", S}, {"dye", X}, {"fabric", X}}),
        tokens({{"Nothing", S}, {"else", X}, {"matters", X}, {"here", X}})};
    ExternalAnnotations ext;
    ext.relevance["c1-s2"] = 0.0;
    ext.labels["c1-s1"] = FeatureLabels{1, 1, 1, 1, 1};
    auto result = run_pipeline({c}, base_config(), small_corpus(), ext);
    REQUIRE(result.store.facts.size() == 1);
    CHECK(result.store.facts[0].id == "c1-s1");
    CHECK(result.report.relevance_dropped == 1);
  }

  TEST_CASE("pipeline: mixed embeddings are a stage error") {
    CandidateFact a;
    a.id = "a";
    a.raw_text = "Baking soda works.";
    a.token_annotations = std::vector<std::vector<RoleToken>>{
        tokens({{"Baking", S}, {"soda", S}, {"works", X}})};
    a.annotator_labels = FeatureLabels{1, 1, 1, 1, 1};
    a.embedding = std::vector<double>{1, 0};
    CandidateFact b = a;
    b.id = "b";
    b.embedding.reset();
    try {
      run_pipeline({a, b}, base_config(), small_corpus());
      FAIL("expected a stage error");
    } catch (const StageError& e) {
      CHECK(e.stage() == "dedup");
    }
  }

  TEST_CASE("pipeline conservation over random candidates (property)") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> bit(0, 1);
    std::uniform_int_distribution<int> sentences(1, 3);
    const std::vector<std::string> words{"baking", "soda", "sweet", "potatoes", "dye",
                                         "market", "stock", "the", "is", "fun"};
    std::uniform_int_distribution<std::size_t> word(0, words.size() - 1);
    for (int round = 0; round < 200; ++round) {
      std::vector<CandidateFact> cands;
      int n = std::uniform_int_distribution<int>(0, 8)(rng);
      for (int i = 0; i < n; ++i) {
        CandidateFact c;
        c.id = "c" + std::to_string(i);
        c.source_url = "https://example.org/" + c.id;
        c.provider = "example.org";
        std::vector<std::vector<RoleToken>> ann;
        std::string raw;
        for (int s = sentences(rng); s > 0; --s) {
          std::vector<RoleToken> toks;
          std::string sentence;
          for (int k = 0; k < 5; ++k) {
            std::string w = words[word(rng)];
            toks.push_back(RoleToken{w, bit(rng) ? S : X});
            sentence += (k == 0 ? std::string(1, static_cast<char>(std::toupper(w[0]))) + w.substr(1)
                                : " " + w);
          }
          raw += (raw.empty() ? "" : " ") + sentence + ".";
          ann.push_back(std::move(toks));
        }
        c.raw_text = raw;
        c.token_annotations = ann;
        if (bit(rng)) {
          c.annotator_labels = FeatureLabels{bit(rng), bit(rng), bit(rng), bit(rng), bit(rng)};
        }
        c.embedding = random_unit_vector(rng, 2);
        cands.push_back(std::move(c));
      }
      auto result = run_pipeline(cands, base_config(), small_corpus());
      const auto& r = result.report;
      CHECK(r.sentences == r.stored + r.dropped_total() + r.quarantined);
      CHECK(r.stored == result.store.facts.size());
      CHECK(validate_store(result.store).ok());
    }
  }

  TEST_CASE("bundled candidates curate into a valid store") {
    std::ifstream in(data_dir() / "candidates.jsonl");
    auto cands = parse_candidates(in);
    auto config = curation_config_from_json(read_json_file(data_dir() / "curation_config.json"));
    std::vector<std::string> stages;
    auto result = run_pipeline(cands, config, *fixture_corpus(), {},
                               [&](std::string_view stage, const nlohmann::json&) {
                                 stages.emplace_back(stage);
                               });
    CHECK(stages == std::vector<std::string>{"split", "relevance", "entity", "labels",
                                             "interestingness", "dedup", "link"});
    CHECK(validate_store(result.store).ok());
    const auto& r = result.report;
    CHECK(r.sentences == r.stored + r.dropped_total() + r.quarantined);
    CHECK(r.stored >= 1);
    CHECK(r.dedup_dropped >= 1);
  }
}
