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

// Line-delimited file formats for the fact store and the task corpus.
//
// Both files start with a header record carrying "format_version": 1. The fact
// store header also declares the feature weights and, optionally, the
// embedding dimension:
//
//   {"format_version":1,"embedding_dim":8,"weights":{"novelty":0.4,...}}
//   {"id":"f1","text":"...","entity":{"name":"sweet potato","type":"ingredient"},
//    "source_url":"...","provider":"facts.net","labels":{...},"score":0.8,
//    "embedding":[...],"linked_step_ids":["t1:0"],"overall_interesting":true}
//
// The corpus carries one task per line with its steps nested.

#ifndef CTAFACTS_STORE_IO_H_
#define CTAFACTS_STORE_IO_H_

#include <filesystem>
#include <iosfwd>
#include <string>

#include "ctafacts/model.h"
#include "json.hpp"

namespace ctafacts {

inline constexpr int kFormatVersion = 1;

// Raised for unparseable records. `record` is 0 for the header line and
// 1-based for body records.
class ParseError : public Error {
 public:
  ParseError(std::size_t record, std::string field, const std::string& message);

  std::size_t record() const { return record_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t record_;
  std::string field_;
};

nlohmann::json to_json(const Entity& entity);
nlohmann::json to_json(const FeatureLabels& labels);
nlohmann::json to_json(const FeatureWeights& weights);
nlohmann::json to_json(const CuratedFact& fact);
nlohmann::json to_json(const Task& task);

// These throw ParseError with `record` set to the given ordinal.
Entity entity_from_json(const nlohmann::json& j, std::size_t record);
FeatureLabels labels_from_json(const nlohmann::json& j, std::size_t record);
FeatureWeights weights_from_json(const nlohmann::json& j, std::size_t record);
CuratedFact fact_from_json(const nlohmann::json& j, std::size_t record);
Task task_from_json(const nlohmann::json& j, std::size_t record);

FactStore parse_fact_store(std::istream& in);
void write_fact_store(std::ostream& out, const FactStore& store);
FactStore read_fact_store(const std::filesystem::path& path);
void save_fact_store(const std::filesystem::path& path, const FactStore& store);

TaskCorpus parse_corpus(std::istream& in);
void write_corpus(std::ostream& out, const TaskCorpus& corpus);
TaskCorpus read_corpus(const std::filesystem::path& path);

// Reads a whole JSON document from a file; throws Error naming the path.
nlohmann::json read_json_file(const std::filesystem::path& path);

// Writes `contents` to a sibling temporary and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace ctafacts

#endif  // CTAFACTS_STORE_IO_H_
