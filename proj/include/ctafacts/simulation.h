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

// Seeded simulated users driving the conversation engine, and an A/B runner
// comparing a facts-off control arm against a facts-on treatment arm.
//
// Every random decision is drawn from a counter-based stream keyed by the
// session seed and a decision tag, so session i consumes the same numbers in
// both arms wherever both arms reach the same decision (abandonment at step
// k, the n-th offer, the n-th fact, the final rating).

#ifndef CTAFACTS_SIMULATION_H_
#define CTAFACTS_SIMULATION_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctafacts/engine.h"
#include "json.hpp"

namespace ctafacts {

struct UserModel {
  double p_accept_fact = 0.7;
  double p_like_fact = 0.66;
  double base_abandon_hazard = 0.1;
  // Hazard multiplier for the next `relief_window` steps after a liked fact.
  double fact_engagement_relief = 1.0;
  unsigned relief_window = 3;
  double base_rating_mean = 3.0;
  double rating_boost_per_liked_fact = 0.0;
  double rating_noise_sd = 1.0;
  std::uint64_t seed = 0;
  // Naive return-visit model; off unless enabled.
  bool simulate_repeat_users = false;
  double p_return_base = 0.2;
  double p_return_boost_per_liked_fact = 0.0;

  void validate() const;
};

UserModel user_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const UserModel& model);

// Counter-based uniform stream: draw(i) depends only on (seed, tag, i).
class DrawStream {
 public:
  DrawStream(std::uint64_t seed, std::uint64_t tag) : seed_(seed), tag_(tag) {}

  double at(std::uint64_t counter) const;
  double next() { return at(counter_++); }

 private:
  std::uint64_t seed_;
  std::uint64_t tag_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

struct SimulatedSession {
  Session session;
  SessionOutcome outcome;
  // Facts the simulated user enjoyed, whether or not they were asked.
  std::size_t liked_reactions = 0;
  bool returns = false;
};

SimulatedSession simulate_session(const UserModel& model, const Engine& engine, const Task& task,
                                  std::uint64_t seed);

// Task assigned to the session with this seed; the same in every arm.
const Task& pick_task(const TaskCorpus& corpus, const UserModel& model, std::uint64_t seed);

struct Metrics {
  std::size_t n_sessions = 0;
  double mean_turns = 0.0;
  double completion_rate = 0.0;
  std::optional<double> mean_rating;
  // Liked over facts that received an answer to the feedback question.
  std::optional<double> fact_like_rate;
  std::size_t facts_shown = 0;
  std::size_t facts_answered = 0;
  double mean_steps_reached = 0.0;
  std::optional<double> repeat_user_rate;
};

nlohmann::json to_json(const Metrics& metrics);

// Throws Error on empty input.
Metrics compute_metrics(std::span<const SessionOutcome> outcomes);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

// Two-sided Welch t-test. Throws Error if either sample has fewer than two
// values.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct ArmSpec {
  std::string name;
  EngineConfig config;
};

// "control" disables facts; "treatment"/"hybrid" keep the base policy;
// "search_only", "execution_only", "always_ask" and "never_ask" adjust it.
ArmSpec arm_from_name(const std::string& name, const EngineConfig& base);

struct ABConfig {
  UserModel model;
  std::size_t n_per_arm = 500;
  std::uint64_t base_seed = 42;
  ArmSpec control{"control", EngineConfig{.policy = {}, .facts_enabled = false}};
  ArmSpec treatment{"treatment", EngineConfig{}};
  unsigned threads = 1;
};

struct ArmResult {
  std::string name;
  Metrics metrics;
  std::vector<SessionOutcome> outcomes;
};

struct ABReport {
  ArmResult control;
  ArmResult treatment;
  std::optional<double> delta_turns;
  std::optional<double> delta_completion;
  std::optional<double> delta_rating;
  WelchResult turns_test;
  WelchResult rating_test;
  std::size_t n_per_arm = 0;
  std::uint64_t base_seed = 0;
};

nlohmann::json to_json(const ABReport& report);
std::string format_table(const ABReport& report);

// Relative change (treatment - control) / control; empty if control is 0.
std::optional<double> relative_delta(double control, double treatment);

// Throws Error if n_per_arm < 2.
ABReport run_ab(const ABConfig& config, std::shared_ptr<const TaskCorpus> corpus,
                std::shared_ptr<const FactCatalog> catalog);

// Runs n sessions of one arm; session i uses seed mix_seed(base_seed, i).
ArmResult run_arm(const ArmSpec& arm, const UserModel& model, std::size_t n,
                  std::uint64_t base_seed, std::shared_ptr<const TaskCorpus> corpus,
                  std::shared_ptr<const FactCatalog> catalog, unsigned threads = 1);

}  // namespace ctafacts

#endif  // CTAFACTS_SIMULATION_H_
