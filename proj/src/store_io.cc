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

#include "ctafacts/store_io.h"

#include <fstream>
#include <sstream>

#include "ctafacts/text.h"

namespace ctafacts {

using nlohmann::json;

namespace {

std::string describe(std::size_t record, const std::string& field,
                     const std::string& message) {
  std::ostringstream out;
  if (record == 0) {
    out << "header";
  } else {
    out << "record " << record;
  }
  out << ", field '" << field << "': " << message;
  return out.str();
}

const json& require(const json& j, const char* field, std::size_t record) {
  if (!j.is_object()) throw ParseError(record, field, "record is not an object");
  auto it = j.find(field);
  if (it == j.end()) throw ParseError(record, field, "missing");
  return *it;
}

std::string require_string(const json& j, const char* field, std::size_t record) {
  const json& v = require(j, field, record);
  if (!v.is_string()) throw ParseError(record, field, "expected a string");
  return v.get<std::string>();
}

double require_number(const json& j, const char* field, std::size_t record) {
  const json& v = require(j, field, record);
  if (!v.is_number()) throw ParseError(record, field, "expected a number");
  return v.get<double>();
}

std::size_t require_index(const json& j, const char* field, std::size_t record) {
  const json& v = require(j, field, record);
  if (!v.is_number_unsigned()) throw ParseError(record, field, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

// Skips blank lines; returns false at end of input.
bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!text::trim(line).empty()) return true;
  }
  return false;
}

json parse_line(const std::string& line, std::size_t record) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(record, "<line>", std::string("invalid JSON: ") + e.what());
  }
}

json read_header(std::istream& in) {
  std::string line;
  if (!next_line(in, line)) throw ParseError(0, "format_version", "missing header line");
  json header = parse_line(line, 0);
  const json& version = require(header, "format_version", 0);
  if (!version.is_number_integer() || version.get<int>() != kFormatVersion) {
    throw ParseError(0, "format_version", "unsupported format version");
  }
  return header;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

ParseError::ParseError(std::size_t record, std::string field, const std::string& message)
    : Error(describe(record, field, message)), record_(record), field_(std::move(field)) {}

json to_json(const Entity& entity) {
  return json{{"name", entity.name}, {"type", std::string(to_string(entity.type))}};
}

json to_json(const FeatureLabels& labels) {
  json j = json::object();
  for (Feature f : kAllFeatures) j[std::string(to_string(f))] = labels.get(f);
  return j;
}

json to_json(const FeatureWeights& weights) {
  json j = json::object();
  for (Feature f : kWeightedFeatures) j[std::string(to_string(f))] = weights.get(f);
  return j;
}

json to_json(const CuratedFact& fact) {
  json j{{"id", fact.id},
         {"text", fact.text},
         {"entity", to_json(fact.entity)},
         {"source_url", fact.source_url},
         {"provider", fact.provider},
         {"labels", to_json(fact.labels)},
         {"score", fact.score}};
  if (fact.embedding) j["embedding"] = *fact.embedding;
  json links = json::array();
  for (const auto& ref : fact.linked_steps) links.push_back(ref.str());
  j["linked_step_ids"] = std::move(links);
  if (fact.overall_interesting) j["overall_interesting"] = *fact.overall_interesting;
  return j;
}

json to_json(const Task& task) {
  json steps = json::array();
  for (const auto& step : task.steps) {
    json entities = json::array();
    for (const auto& e : step.entities) entities.push_back(to_json(e));
    steps.push_back(json{{"index", step.index}, {"text", step.text}, {"entities", entities}});
  }
  return json{{"id", task.id}, {"title", task.title}, {"steps", steps}};
}

Entity entity_from_json(const json& j, std::size_t record) {
  Entity entity;
  entity.name = require_string(j, "name", record);
  try {
    entity.type = parse_entity_type(require_string(j, "type", record));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(record, "entity.type", e.what());
  }
  return entity;
}

FeatureLabels labels_from_json(const json& j, std::size_t record) {
  FeatureLabels labels;
  for (Feature f : kAllFeatures) {
    std::string name(to_string(f));
    const json& v = require(j, name.c_str(), record);
    if (v.is_boolean()) {
      labels.set(f, v.get<bool>() ? 1 : 0);
    } else if (v.is_number_integer()) {
      labels.set(f, v.get<int>());
    } else {
      throw ParseError(record, "labels." + name, "expected an integer label");
    }
  }
  return labels;
}

FeatureWeights weights_from_json(const json& j, std::size_t record) {
  FeatureWeights w;
  w.novelty = require_number(j, "novelty", record);
  w.specificity = require_number(j, "specificity", record);
  w.conciseness = require_number(j, "conciseness", record);
  w.informativeness = require_number(j, "informativeness", record);
  return w;
}

CuratedFact fact_from_json(const json& j, std::size_t record) {
  CuratedFact fact;
  fact.id = require_string(j, "id", record);
  fact.text = require_string(j, "text", record);
  fact.entity = entity_from_json(require(j, "entity", record), record);
  fact.source_url = require_string(j, "source_url", record);
  fact.provider = require_string(j, "provider", record);
  fact.labels = labels_from_json(require(j, "labels", record), record);
  fact.score = require_number(j, "score", record);
  if (auto it = j.find("embedding"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseError(record, "embedding", "expected an array");
    std::vector<double> values;
    for (const auto& x : *it) {
      if (!x.is_number()) throw ParseError(record, "embedding", "expected numbers");
      values.push_back(x.get<double>());
    }
    fact.embedding = std::move(values);
  }
  if (auto it = j.find("linked_step_ids"); it != j.end()) {
    if (!it->is_array()) throw ParseError(record, "linked_step_ids", "expected an array");
    for (const auto& ref : *it) {
      if (!ref.is_string()) throw ParseError(record, "linked_step_ids", "expected strings");
      try {
        fact.linked_steps.push_back(StepRef::parse(ref.get<std::string>()));
      } catch (const Error& e) {
        throw ParseError(record, "linked_step_ids", e.what());
      }
    }
  }
  if (auto it = j.find("overall_interesting"); it != j.end() && !it->is_null()) {
    if (it->is_boolean()) {
      fact.overall_interesting = it->get<bool>();
    } else if (it->is_number_integer()) {
      fact.overall_interesting = it->get<int>() != 0;
    } else {
      throw ParseError(record, "overall_interesting", "expected a boolean");
    }
  }
  return fact;
}

Task task_from_json(const json& j, std::size_t record) {
  Task task;
  task.id = require_string(j, "id", record);
  task.title = require_string(j, "title", record);
  const json& steps = require(j, "steps", record);
  if (!steps.is_array()) throw ParseError(record, "steps", "expected an array");
  for (const auto& s : steps) {
    TaskStep step;
    step.index = require_index(s, "index", record);
    step.text = require_string(s, "text", record);
    if (auto it = s.find("entities"); it != s.end()) {
      if (!it->is_array()) throw ParseError(record, "steps.entities", "expected an array");
      for (const auto& e : *it) step.entities.push_back(entity_from_json(e, record));
    }
    task.steps.push_back(std::move(step));
  }
  return task;
}

FactStore parse_fact_store(std::istream& in) {
  FactStore store;
  json header = read_header(in);
  store.weights = weights_from_json(require(header, "weights", 0), 0);
  if (auto it = header.find("embedding_dim"); it != header.end() && !it->is_null()) {
    if (!it->is_number_unsigned()) {
      throw ParseError(0, "embedding_dim", "expected a nonnegative integer");
    }
    store.embedding_dim = it->get<std::size_t>();
  }
  std::string line;
  std::size_t record = 0;
  while (next_line(in, line)) {
    ++record;
    store.facts.push_back(fact_from_json(parse_line(line, record), record));
  }
  return store;
}

void write_fact_store(std::ostream& out, const FactStore& store) {
  json header{{"format_version", kFormatVersion}, {"weights", to_json(store.weights)}};
  if (store.embedding_dim) header["embedding_dim"] = *store.embedding_dim;
  out << header.dump() << '\n';
  for (const auto& fact : store.facts) out << to_json(fact).dump() << '\n';
}

FactStore read_fact_store(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return parse_fact_store(in);
}

void save_fact_store(const std::filesystem::path& path, const FactStore& store) {
  std::ostringstream out;
  write_fact_store(out, store);
  write_file_atomic(path, out.str());
}

TaskCorpus parse_corpus(std::istream& in) {
  read_header(in);
  TaskCorpus corpus;
  std::string line;
  std::size_t record = 0;
  while (next_line(in, line)) {
    ++record;
    corpus.tasks.push_back(task_from_json(parse_line(line, record), record));
  }
  return corpus;
}

void write_corpus(std::ostream& out, const TaskCorpus& corpus) {
  out << json{{"format_version", kFormatVersion}}.dump() << '\n';
  for (const auto& task : corpus.tasks) out << to_json(task).dump() << '\n';
}

TaskCorpus read_corpus(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return parse_corpus(in);
}

json read_json_file(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    auto out = open_for_write(tmp);
    out << contents;
    out.flush();
    if (!out) throw Error("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace ctafacts
