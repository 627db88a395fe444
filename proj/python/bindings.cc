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

// Python extension. Structured results cross the boundary as JSON text and
// are decoded by the ctafacts package.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

#include "ctafacts/curation.h"
#include "ctafacts/engine.h"
#include "ctafacts/simulation.h"
#include "ctafacts/store_io.h"

namespace py = pybind11;
using namespace ctafacts;
using nlohmann::json;

namespace {

Feature feature_named(const std::string& name) {
  for (Feature f : kWeightedFeatures) {
    if (to_string(f) == name) return f;
  }
  throw Error("unknown weighted feature '" + name + "'");
}

// Engine plus the shared store and corpus it reads.
class PyEngine {
 public:
  PyEngine(const std::string& store_path, const std::string& corpus_path,
           const std::string& policy_json, bool facts_enabled)
      : corpus_(std::make_shared<const TaskCorpus>(read_corpus(corpus_path))),
        catalog_(std::make_shared<const FactCatalog>(read_fact_store(store_path))) {
    EngineConfig config;
    config.policy = policy_params_from_json(json::parse(policy_json));
    config.policy.validate();
    config.facts_enabled = facts_enabled;
    engine_ = std::make_unique<Engine>(corpus_, catalog_, config);
  }

  Session start(const std::string& id) const { return engine_->start_session(id); }

  std::string turn(Session& s, const std::string& utterance) const {
    return to_json(engine_->handle_turn(s, utterance)).dump();
  }

  std::shared_ptr<const TaskCorpus> corpus() const { return corpus_; }
  std::shared_ptr<const FactCatalog> catalog() const { return catalog_; }

 private:
  std::shared_ptr<const TaskCorpus> corpus_;
  std::shared_ptr<const FactCatalog> catalog_;
  std::unique_ptr<Engine> engine_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Task assistant with interesting-fact placement";

  py::register_exception<Error>(m, "Error");

  m.def("validate_store", [](const std::string& path) {
    auto store = read_fact_store(path);
    auto report = validate_store(store);
    py::list violations;
    for (const auto& v : report.violations) {
      py::dict d;
      d["record"] = v.record;
      d["id"] = v.id;
      d["kind"] = v.kind;
      d["message"] = v.message;
      violations.append(d);
    }
    py::dict out;
    out["records"] = report.record_count;
    out["violations"] = violations;
    return out;
  });

  m.def("store_stats", [](const std::string& path) {
    auto store = read_fact_store(path);
    auto s = store_stats(store.facts);
    py::dict out;
    out["fact_count"] = s.fact_count;
    out["entity_count"] = s.entity_count;
    out["provider_count"] = s.provider_count;
    out["mean_length_words"] = s.mean_length_words;
    return out;
  });

  m.def("compute_feature_weights", [](const std::map<std::string, unsigned>& counts) {
    std::map<Feature, unsigned> c;
    for (const auto& [name, n] : counts) c[feature_named(name)] = n;
    return to_json(compute_feature_weights(c)).dump();
  });

  m.def("score_interestingness",
        [](const std::string& labels_json, const std::string& weights_json) {
          return score_interestingness(labels_from_json(json::parse(labels_json), 0),
                                       weights_from_json(json::parse(weights_json), 0));
        });

  m.def("split_sentences", [](const std::string& text) { return split_sentences(text); });

  m.def("curate", [](const std::string& candidates_path, const std::string& config_json,
                     const std::string& corpus_path) {
    std::ifstream in(candidates_path);
    if (!in) throw Error("cannot open '" + candidates_path + "'");
    auto candidates = parse_candidates(in);
    auto config = curation_config_from_json(json::parse(config_json));
    auto result = run_pipeline(candidates, config, read_corpus(corpus_path));
    json facts = json::array();
    for (const auto& f : result.store.facts) facts.push_back(to_json(f));
    return json{{"facts", facts}, {"report", to_json(result.report)}}.dump();
  });

  m.def("welch_t_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    auto r = welch_t_test(a, b);
    return py::make_tuple(r.t, r.df, r.p_value);
  });

  py::class_<Session>(m, "Session")
      .def_property_readonly("id", [](const Session& s) { return s.id; })
      .def_property_readonly("phase",
                             [](const Session& s) { return std::string(to_string(s.phase)); })
      .def("to_json", [](const Session& s) { return to_json(s).dump(); })
      .def("transcript", [](const Session& s) { return export_transcript(s); });

  py::class_<PyEngine>(m, "Engine")
      .def(py::init<const std::string&, const std::string&, const std::string&, bool>(),
           py::arg("store_path"), py::arg("corpus_path"), py::arg("policy_json") = "{}",
           py::arg("facts_enabled") = true)
      .def("start_session", &PyEngine::start, py::arg("session_id"))
      .def("turn", &PyEngine::turn, py::arg("session"), py::arg("utterance"))
      .def(
          "run_ab",
          [](const PyEngine& e, const std::string& model_json, std::size_t n_per_arm,
             std::uint64_t base_seed) {
            ABConfig config;
            config.model = user_model_from_json(json::parse(model_json));
            config.n_per_arm = n_per_arm;
            config.base_seed = base_seed;
            py::gil_scoped_release release;
            return to_json(run_ab(config, e.corpus(), e.catalog())).dump();
          },
          py::arg("user_model_json"), py::arg("n_per_arm") = 500, py::arg("base_seed") = 42);
}
