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

// cta: curate, validate and inspect fact stores, run simulations, serve the
// conversation API, or chat with a local engine.
//
// Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctafacts/curation.h"
#include "ctafacts/engine.h"
#include "ctafacts/model.h"
#include "ctafacts/service.h"
#include "ctafacts/simulation.h"
#include "ctafacts/store_io.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ctafacts;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shared flags; a subcommand reads the ones it needs.
struct Options {
  std::string config;
  std::string store;
  std::string corpus;
  std::string candidates;
  std::string out;
  std::string report;
  std::string dump_stages;
  std::string relevance;
  std::string labels;
  std::string arms;
  std::string listen;
  std::string session_dir;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string format = "table";
  bool allow_degraded = false;
  bool transcript = false;
};

struct LoadedConfig {
  json doc = json::object();
  fs::path dir;
};

LoadedConfig load_config(const std::string& path) {
  LoadedConfig c;
  if (path.empty()) return c;
  c.doc = read_json_file(path);
  if (!c.doc.is_object()) throw UsageError("config " + path + " is not a JSON object");
  c.dir = fs::path(path).parent_path();
  return c;
}

// Flag value, else a config key resolved against the config directory.
std::string path_from(const std::string& flag, const LoadedConfig& config, const char* key) {
  if (!flag.empty()) return flag;
  if (auto it = config.doc.find(key); it != config.doc.end() && it->is_string()) {
    fs::path p = it->get<std::string>();
    return (p.is_relative() && !config.dir.empty() ? config.dir / p : p).string();
  }
  return {};
}

std::string require_path(const std::string& flag, const LoadedConfig& config, const char* key,
                         const char* flag_name) {
  std::string p = path_from(flag, config, key);
  if (p.empty()) {
    throw UsageError(std::string("missing ") + flag_name + " (or \"" + key + "\" in --config)");
  }
  return p;
}

PolicyParams policy_from(const LoadedConfig& config) {
  if (auto it = config.doc.find("policy"); it != config.doc.end()) {
    return policy_params_from_json(*it);
  }
  return PolicyParams{};
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_json_output(const std::string& path, const json& doc) {
  if (path.empty()) return;
  write_file_atomic(path, doc.dump(2) + "\n");
}

void print_violations(const ValidationReport& report, std::ostream& out) {
  for (const auto& v : report.violations) {
    out << "  record " << v.record << (v.id.empty() ? "" : " (" + v.id + ")") << ": " << v.kind
        << ": " << v.message << "\n";
  }
}

// ---- curate ----

int run_curate(const Options& opt) {
  LoadedConfig config = load_config(opt.config);
  const std::string candidates_path =
      require_path(opt.candidates, config, "candidates_path", "--candidates");
  const std::string corpus_path = require_path(opt.corpus, config, "corpus_path", "--corpus");
  if (opt.out.empty()) throw UsageError("missing --out");

  json curation_doc = config.doc.contains("curation") ? config.doc["curation"] : config.doc;
  CurationConfig curation = curation_config_from_json(curation_doc);
  TaskCorpus corpus = read_corpus(corpus_path);

  std::ifstream in(candidates_path);
  if (!in) throw Error("cannot open " + candidates_path);
  std::vector<CandidateFact> candidates = parse_candidates(in);

  ExternalAnnotations external;
  for (const std::string& path : {opt.relevance, opt.labels}) {
    if (path.empty()) continue;
    std::ifstream ann(path);
    if (!ann) throw Error("cannot open " + path);
    load_external_annotations(ann, external);
  }

  StageDump dump;
  if (!opt.dump_stages.empty()) {
    fs::create_directories(opt.dump_stages);
    dump = [dir = fs::path(opt.dump_stages)](std::string_view stage, const json& records) {
      std::string body;
      for (const auto& r : records) body += r.dump() + "\n";
      write_file_atomic(dir / (std::string(stage) + ".jsonl"), body);
    };
  }

  PipelineResult result = run_pipeline(candidates, curation, corpus, external, dump);
  ValidationReport check = validate_store(result.store);
  save_fact_store(opt.out, result.store);
  write_json_output(opt.report, to_json(result.report));

  const auto& r = result.report;
  std::cout << "candidates " << r.candidates << ", sentences " << r.sentences << ", stored "
            << r.stored << "\n"
            << "dropped: relevance " << r.relevance_dropped << ", entity " << r.entity_dropped
            << ", interestingness " << r.interestingness_dropped << ", dedup "
            << r.dedup_dropped << (r.dedup_skipped ? " (skipped, no embeddings)" : "") << "\n"
            << "quarantined " << r.quarantined << ", unlinked " << r.unlinked << "\n";
  if (!check.ok()) {
    std::cerr << "curated store failed validation:\n";
    print_violations(check, std::cerr);
    return kFailed;
  }
  return kOk;
}

// ---- validate / stats ----

int run_validate(const Options& opt) {
  LoadedConfig config = load_config(opt.config);
  const std::string store_path = require_path(opt.store, config, "fact_store_path", "--store");
  FactStore store;
  try {
    store = read_fact_store(store_path);
  } catch (const ParseError& e) {
    std::cerr << store_path << ": " << e.what() << "\n";
    return kFailed;
  }
  ValidationReport report = validate_store(store);
  std::optional<ValidationReport> corpus_report;
  const std::string corpus_path = path_from(opt.corpus, config, "corpus_path");
  std::size_t dangling = 0;
  if (!corpus_path.empty()) {
    TaskCorpus corpus = read_corpus(corpus_path);
    corpus_report = validate_corpus(corpus);
    for (const auto& f : store.facts) {
      for (const auto& ref : f.linked_steps) {
        if (!corpus.step(ref)) {
          std::cerr << "  fact " << f.id << " links to unknown step " << ref.str() << "\n";
          ++dangling;
        }
      }
    }
  }
  std::cout << "records " << report.record_count << "\n";
  std::cout << "violations " << report.violations.size() << "\n";
  print_violations(report, std::cout);
  if (corpus_report) {
    std::cout << "corpus tasks " << corpus_report->record_count << ", violations "
              << corpus_report->violations.size() << ", dangling links " << dangling << "\n";
    print_violations(*corpus_report, std::cout);
  }
  bool ok = report.ok() && (!corpus_report || corpus_report->ok()) && dangling == 0;
  return ok ? kOk : kFailed;
}

int run_stats(const Options& opt) {
  LoadedConfig config = load_config(opt.config);
  const std::string store_path = require_path(opt.store, config, "fact_store_path", "--store");
  FactStore store = read_fact_store(store_path);
  StoreStats s = store_stats(store.facts);
  if (opt.format == "json") {
    std::cout << json{{"fact_count", s.fact_count},
                      {"entity_count", s.entity_count},
                      {"provider_count", s.provider_count},
                      {"mean_length_words", s.mean_length_words},
                      {"mean_length_rounded", s.mean_length_rounded}}
                     .dump(2)
              << "\n";
    return kOk;
  }
  std::cout << "facts " << s.fact_count << "\n"
            << "entities " << s.entity_count << "\n"
            << "providers " << s.provider_count << "\n"
            << "mean length " << std::fixed << std::setprecision(2) << s.mean_length_words
            << " words (rounded " << s.mean_length_rounded << ")\n";
  return kOk;
}

// ---- simulate ----

struct Loaded {
  std::shared_ptr<const TaskCorpus> corpus;
  std::shared_ptr<const FactCatalog> catalog;
};

Loaded load_data(const Options& opt, const LoadedConfig& config) {
  const std::string store_path = require_path(opt.store, config, "fact_store_path", "--store");
  const std::string corpus_path = require_path(opt.corpus, config, "corpus_path", "--corpus");
  Loaded d;
  d.corpus = std::make_shared<TaskCorpus>(read_corpus(corpus_path));
  d.catalog = std::make_shared<FactCatalog>(read_fact_store(store_path));
  return d;
}

int run_simulate(const Options& opt) {
  LoadedConfig config = load_config(opt.config);
  Loaded data = load_data(opt, config);
  json sim = config.doc.value("simulation", json::object());

  UserModel model;
  if (auto it = sim.find("user_model"); it != sim.end()) {
    if (it->is_string()) {
      fs::path p = it->get<std::string>();
      if (p.is_relative() && !config.dir.empty()) p = config.dir / p;
      model = user_model_from_json(read_json_file(p));
    } else {
      model = user_model_from_json(*it);
    }
  }
  EngineConfig base;
  base.policy = policy_from(config);

  std::vector<std::string> arms = split_list(opt.arms);
  if (arms.empty()) {
    arms = sim.value("arms", std::vector<std::string>{"control", "treatment"});
  }
  if (arms.size() != 2) throw UsageError("--arms takes exactly two names, control first");
  ABConfig ab;
  ab.model = model;
  ab.n_per_arm = opt.n.value_or(sim.value("n_per_arm", std::size_t{500}));
  ab.base_seed = opt.seed.value_or(sim.value("base_seed", std::uint64_t{42}));
  ab.threads = opt.threads.value_or(sim.value("threads", 1u));
  try {
    ab.control = arm_from_name(arms[0], base);
    ab.treatment = arm_from_name(arms[1], base);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (ab.n_per_arm == 0) throw UsageError("--n must be positive");

  if (ab.n_per_arm == 1) {
    // One paired session per arm, with full transcripts.
    const std::uint64_t seed = mix_seed(ab.base_seed, 0);
    const Task& task = pick_task(*data.corpus, model, seed);
    json doc{{"base_seed", ab.base_seed}, {"task_id", task.id}, {"arms", json::object()}};
    for (const ArmSpec* arm : {&ab.control, &ab.treatment}) {
      Engine engine(data.corpus, data.catalog, arm->config);
      SimulatedSession s = simulate_session(model, engine, task, seed);
      doc["arms"][arm->name] = json{{"outcome", to_json(s.outcome)},
                                    {"transcript", export_transcript(s.session)}};
      if (opt.format != "json") {
        std::cout << "== " << arm->name << "\n"
                  << export_transcript(s.session) << to_json(s.outcome).dump() << "\n";
      }
    }
    if (opt.format == "json") std::cout << doc.dump(2) << "\n";
    write_json_output(opt.report, doc);
    return kOk;
  }

  ABReport report = run_ab(ab, data.corpus, data.catalog);
  json doc = to_json(report);
  doc["user_model"] = to_json(model);
  if (opt.format == "json") {
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << format_table(report);
  }
  write_json_output(opt.report, doc);
  return kOk;
}

// ---- serve / chat ----

HttpServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

ServiceConfig service_config_for(const Options& opt, const LoadedConfig& config) {
  ServiceConfig sc = service_config_from_json(config.doc, config.dir);
  apply_env_overrides(sc);
  if (!opt.store.empty()) sc.fact_store_path = opt.store;
  if (!opt.corpus.empty()) sc.corpus_path = opt.corpus;
  if (!opt.session_dir.empty()) sc.session_dir = opt.session_dir;
  if (!opt.listen.empty()) parse_listen_address(opt.listen, sc.host, sc.port);
  if (sc.fact_store_path.empty()) throw UsageError("missing --store (or fact_store_path)");
  if (sc.corpus_path.empty()) throw UsageError("missing --corpus (or corpus_path)");
  return sc;
}

int run_serve(const Options& opt) {
  LoadedConfig config = load_config(opt.config);
  ServiceConfig sc = service_config_for(opt, config);
  ConversationService service(sc);
  if (!service.ready() && !opt.allow_degraded) {
    std::cerr << "startup failed: " << service.load_error() << "\n";
    return kFailed;
  }
  HttpServer server(service);
  int port = server.bind(sc.host, sc.port);
  std::cerr << json{{"event", "listening"},
                    {"host", sc.host},
                    {"port", port},
                    {"ready", service.ready()},
                    {"resumed", service.resumed_count()}}
                   .dump()
            << "\n";
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  server.listen();
  g_server = nullptr;
  return kOk;
}

int run_chat(const Options& opt) {
  LoadedConfig config = load_config(opt.config);
  Loaded data = load_data(opt, config);
  EngineConfig ec;
  ec.policy = policy_from(config);
  ec.facts_enabled = config.doc.value("facts_enabled", true);
  Engine engine(data.corpus, data.catalog, ec);
  Session session = engine.start_session("local");
  std::cout << "Hi! What would you like to cook today?\n";
  std::string line;
  while (session.phase != SessionPhase::kEnded && std::cout << "> " << std::flush &&
         std::getline(std::cin, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Turn reply = engine.handle_turn(session, line);
    std::cout << reply.text << "\n";
    if (reply.display && reply.display->fact_card) {
      const auto& card = *reply.display->fact_card;
      std::cout << "  [source: " << card.provider << " " << card.source_url << "]\n";
    }
  }
  if (opt.transcript) std::cout << "\n" << export_transcript(session);
  if (session.phase == SessionPhase::kEnded) {
    std::cout << to_json(complete_session(session)).dump() << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task assistant with interesting facts"};
  app.require_subcommand(1);
  Options opt;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "JSON config file");
  };

  auto* curate = app.add_subcommand("curate", "Run the curation pipeline");
  add_config(curate);
  curate->add_option("--candidates", opt.candidates, "Candidate facts (JSONL)");
  curate->add_option("--corpus", opt.corpus, "Task corpus (JSONL)");
  curate->add_option("--out", opt.out, "Output fact store (JSONL)");
  curate->add_option("--report", opt.report, "Write the pipeline report (JSON)");
  curate->add_option("--dump-stages", opt.dump_stages, "Directory for per-stage records");
  curate->add_option("--relevance", opt.relevance, "External relevance scores (JSONL)");
  curate->add_option("--labels", opt.labels, "External feature labels (JSONL)");

  auto* validate = app.add_subcommand("validate", "Check a fact store");
  add_config(validate);
  validate->add_option("--store", opt.store, "Fact store (JSONL)");
  validate->add_option("--corpus", opt.corpus, "Also check links against this corpus");

  auto* stats = app.add_subcommand("stats", "Summarize a fact store");
  add_config(stats);
  stats->add_option("--store", opt.store, "Fact store (JSONL)");
  stats->add_option("--format", opt.format, "table or json")->check(CLI::IsMember({"table", "json"}));

  auto* simulate = app.add_subcommand("simulate", "Run a simulated A/B comparison");
  add_config(simulate);
  simulate->add_option("--store", opt.store, "Fact store (JSONL)");
  simulate->add_option("--corpus", opt.corpus, "Task corpus (JSONL)");
  simulate->add_option("--arms", opt.arms, "control,treatment arm names");
  simulate->add_option("--n", opt.n, "Sessions per arm");
  simulate->add_option("--seed", opt.seed, "Base seed");
  simulate->add_option("--threads", opt.threads, "Worker threads");
  simulate->add_option("--report", opt.report, "Write the report (JSON)");
  simulate->add_option("--format", opt.format, "table or json")
      ->check(CLI::IsMember({"table", "json"}));

  auto* serve = app.add_subcommand("serve", "Serve the conversation API");
  add_config(serve);
  serve->add_option("--listen", opt.listen, "host:port");
  serve->add_option("--store", opt.store, "Fact store (JSONL)");
  serve->add_option("--corpus", opt.corpus, "Task corpus (JSONL)");
  serve->add_option("--session-dir", opt.session_dir, "Session files directory");
  serve->add_flag("--allow-degraded", opt.allow_degraded,
                  "Keep serving (503) if the store fails to load");

  auto* chat = app.add_subcommand("chat", "Chat with a local engine on the terminal");
  add_config(chat);
  chat->add_option("--store", opt.store, "Fact store (JSONL)");
  chat->add_option("--corpus", opt.corpus, "Task corpus (JSONL)");
  chat->add_flag("--transcript", opt.transcript, "Print the transcript at the end");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*curate) return run_curate(opt);
    if (*validate) return run_validate(opt);
    if (*stats) return run_stats(opt);
    if (*simulate) return run_simulate(opt);
    if (*serve) return run_serve(opt);
    if (*chat) return run_chat(opt);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
