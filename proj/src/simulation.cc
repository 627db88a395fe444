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

#include "ctafacts/simulation.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

namespace ctafacts {

using nlohmann::json;

namespace {

enum DrawTag : std::uint64_t {
  kAbandonTag = 1,
  kAcceptTag = 2,
  kLikeTag = 3,
  kRatingTag = 4,
  kReturnTag = 5,
  kTaskTag = 6,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

double mean_of(std::span<const double> xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

double variance_of(std::span<const double> xs, double mean) {
  double total = 0.0;
  for (double x : xs) total += (x - mean) * (x - mean);
  return total / static_cast<double>(xs.size() - 1);
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::vector<double> turns_of(const std::vector<SessionOutcome>& outcomes) {
  std::vector<double> out;
  for (const auto& o : outcomes) out.push_back(static_cast<double>(o.turn_count));
  return out;
}

std::vector<double> ratings_of(const std::vector<SessionOutcome>& outcomes) {
  std::vector<double> out;
  for (const auto& o : outcomes) {
    if (o.rating) out.push_back(*o.rating);
  }
  return out;
}

WelchResult safe_welch(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) return WelchResult{0.0, 0.0, 1.0};
  return welch_t_test(a, b);
}

}  // namespace

void UserModel::validate() const {
  if (!is_probability(p_accept_fact) || !is_probability(p_like_fact) ||
      !is_probability(base_abandon_hazard) || !is_probability(p_return_base)) {
    throw Error("user model probabilities must lie in [0, 1]");
  }
  if (!(fact_engagement_relief > 0.0 && fact_engagement_relief <= 1.0)) {
    throw Error("fact_engagement_relief must lie in (0, 1]");
  }
  if (!(base_rating_mean >= 1.0 && base_rating_mean <= 5.0)) {
    throw Error("base_rating_mean must lie in [1, 5]");
  }
  if (rating_boost_per_liked_fact < 0.0 || rating_noise_sd < 0.0 ||
      p_return_boost_per_liked_fact < 0.0) {
    throw Error("rating boost, rating noise and return boost must be nonnegative");
  }
}

UserModel user_model_from_json(const json& j) {
  UserModel m;
  try {
    m.p_accept_fact = j.value("p_accept_fact", m.p_accept_fact);
    m.p_like_fact = j.value("p_like_fact", m.p_like_fact);
    m.base_abandon_hazard = j.value("base_abandon_hazard", m.base_abandon_hazard);
    m.fact_engagement_relief = j.value("fact_engagement_relief", m.fact_engagement_relief);
    m.relief_window = j.value("relief_window_K", m.relief_window);
    m.base_rating_mean = j.value("base_rating_mean", m.base_rating_mean);
    m.rating_boost_per_liked_fact =
        j.value("rating_boost_per_liked_fact", m.rating_boost_per_liked_fact);
    m.rating_noise_sd = j.value("rating_noise_sd", m.rating_noise_sd);
    m.seed = j.value("seed", m.seed);
    m.simulate_repeat_users = j.value("simulate_repeat_users", m.simulate_repeat_users);
    m.p_return_base = j.value("p_return_base", m.p_return_base);
    m.p_return_boost_per_liked_fact =
        j.value("p_return_boost_per_liked_fact", m.p_return_boost_per_liked_fact);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid user model: ") + e.what());
  }
  m.validate();
  return m;
}

json to_json(const UserModel& m) {
  return json{{"p_accept_fact", m.p_accept_fact},
              {"p_like_fact", m.p_like_fact},
              {"base_abandon_hazard", m.base_abandon_hazard},
              {"fact_engagement_relief", m.fact_engagement_relief},
              {"relief_window_K", m.relief_window},
              {"base_rating_mean", m.base_rating_mean},
              {"rating_boost_per_liked_fact", m.rating_boost_per_liked_fact},
              {"rating_noise_sd", m.rating_noise_sd},
              {"seed", m.seed},
              {"simulate_repeat_users", m.simulate_repeat_users},
              {"p_return_base", m.p_return_base},
              {"p_return_boost_per_liked_fact", m.p_return_boost_per_liked_fact}};
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

double DrawStream::at(std::uint64_t counter) const {
  std::uint64_t bits = splitmix64(mix_seed(mix_seed(seed_, tag_), counter));
  // 53 random bits -> [0, 1).
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

SimulatedSession simulate_session(const UserModel& model, const Engine& engine, const Task& task,
                                  std::uint64_t seed) {
  model.validate();
  const std::uint64_t session_seed = mix_seed(model.seed, seed);
  DrawStream abandon(session_seed, kAbandonTag);
  DrawStream accept(session_seed, kAcceptTag);
  DrawStream like(session_seed, kLikeTag);
  DrawStream rating(session_seed, kRatingTag);
  DrawStream returning(session_seed, kReturnTag);

  SimulatedSession sim;
  Session& s = sim.session;
  s = engine.start_session("sim-" + std::to_string(seed));

  std::optional<std::size_t> decided_step;
  unsigned relief_left = 0;
  bool last_fact_liked = false;
  bool searched = false;
  // Each step costs a bounded number of turns; the guard only trips on an
  // engine bug.
  const std::size_t max_turns = 64 + 16 * task.steps.size();

  while (s.phase != SessionPhase::kEnded) {
    if (s.turn_log.size() > max_turns) throw Error("simulated session did not terminate");
    std::string say;
    switch (s.phase) {
      case SessionPhase::kSearching: {
        if (!searched) {
          say = "find " + task.title;
          searched = true;
          break;
        }
        auto it = std::find(s.last_results.begin(), s.last_results.end(), task.id);
        say = it == s.last_results.end()
                  ? "stop"
                  : std::to_string(std::distance(s.last_results.begin(), it) + 1);
        break;
      }
      case SessionPhase::kAwaitingFactPermission:
        say = accept.next() < model.p_accept_fact ? "yes" : "no";
        break;
      case SessionPhase::kAwaitingFeedback:
        say = last_fact_liked ? "yes" : "no";
        break;
      case SessionPhase::kExecuting: {
        if (decided_step != s.current_step_index) {
          decided_step = s.current_step_index;
          double hazard = model.base_abandon_hazard;
          if (relief_left > 0) {
            hazard *= model.fact_engagement_relief;
            --relief_left;
          }
          if (abandon.at(s.current_step_index) < hazard) {
            say = "stop";
            break;
          }
        }
        say = "next";
        break;
      }
      case SessionPhase::kAwaitingRating: {
        double u1 = 1.0 - rating.at(0);  // (0, 1]
        double u2 = rating.at(1);
        double noise = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        double raw = model.base_rating_mean +
                     model.rating_boost_per_liked_fact * static_cast<double>(sim.liked_reactions) +
                     model.rating_noise_sd * noise;
        long r = std::clamp(std::lround(raw), 1L, 5L);
        say = "rate " + std::to_string(r);
        break;
      }
      case SessionPhase::kEnded:
        break;
    }
    Turn reply = engine.handle_turn(s, say);
    if (reply.fact_event == FactEvent::kShown) {
      last_fact_liked = like.next() < model.p_like_fact;
      if (last_fact_liked) {
        ++sim.liked_reactions;
        relief_left = model.relief_window;
      }
    }
  }

  sim.outcome = complete_session(s);
  if (model.simulate_repeat_users) {
    double p = std::clamp(model.p_return_base + model.p_return_boost_per_liked_fact *
                                                    static_cast<double>(sim.liked_reactions),
                          0.0, 1.0);
    sim.returns = returning.at(0) < p;
  }
  return sim;
}

const Task& pick_task(const TaskCorpus& corpus, const UserModel& model, std::uint64_t seed) {
  if (corpus.tasks.empty()) throw Error("corpus has no tasks to simulate");
  DrawStream pick(mix_seed(model.seed, seed), kTaskTag);
  auto index = static_cast<std::size_t>(pick.at(0) * static_cast<double>(corpus.tasks.size()));
  return corpus.tasks[std::min(index, corpus.tasks.size() - 1)];
}

json to_json(const Metrics& m) {
  return json{{"n_sessions", m.n_sessions},
              {"mean_turns", m.mean_turns},
              {"completion_rate", m.completion_rate},
              {"mean_rating", optional_number(m.mean_rating)},
              {"fact_like_rate", optional_number(m.fact_like_rate)},
              {"facts_shown", m.facts_shown},
              {"facts_answered", m.facts_answered},
              {"mean_steps_reached", m.mean_steps_reached},
              {"repeat_user_rate", optional_number(m.repeat_user_rate)}};
}

Metrics compute_metrics(std::span<const SessionOutcome> outcomes) {
  if (outcomes.empty()) throw Error("no sessions to summarize");
  Metrics m;
  m.n_sessions = outcomes.size();
  double turns = 0.0;
  double steps = 0.0;
  std::size_t completed = 0;
  double rating_total = 0.0;
  std::size_t rated = 0;
  std::size_t liked = 0;
  std::map<std::string, std::size_t> per_user;
  for (const auto& o : outcomes) {
    turns += static_cast<double>(o.turn_count);
    steps += static_cast<double>(o.steps_reached);
    if (o.completed) ++completed;
    if (o.rating) {
      rating_total += *o.rating;
      ++rated;
    }
    m.facts_shown += o.facts_shown;
    m.facts_answered += o.facts_liked + o.facts_disliked;
    liked += o.facts_liked;
    if (o.user_id) ++per_user[*o.user_id];
  }
  const double n = static_cast<double>(outcomes.size());
  m.mean_turns = turns / n;
  m.mean_steps_reached = steps / n;
  m.completion_rate = static_cast<double>(completed) / n;
  if (rated > 0) m.mean_rating = rating_total / static_cast<double>(rated);
  if (m.facts_answered > 0) {
    m.fact_like_rate = static_cast<double>(liked) / static_cast<double>(m.facts_answered);
  }
  if (!per_user.empty()) {
    auto repeat = std::count_if(per_user.begin(), per_user.end(),
                                [](const auto& kv) { return kv.second >= 2; });
    m.repeat_user_rate = static_cast<double>(repeat) / static_cast<double>(per_user.size());
  }
  return m;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error("Welch's test needs two values per sample");
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  const double va = variance_of(a, ma) / static_cast<double>(a.size());
  const double vb = variance_of(b, mb) / static_cast<double>(b.size());
  WelchResult r;
  if (va + vb == 0.0) {
    r.p_value = ma == mb ? 1.0 : 0.0;
    r.t = ma == mb ? 0.0 : std::copysign(INFINITY, ma - mb);
    return r;
  }
  r.t = (ma - mb) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  boost::math::students_t dist(r.df);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

ArmSpec arm_from_name(const std::string& name, const EngineConfig& base) {
  ArmSpec arm{name, base};
  arm.config.facts_enabled = true;
  auto& policy = arm.config.policy;
  if (name == "control") {
    arm.config.facts_enabled = false;
  } else if (name == "treatment" || name == "hybrid") {
  } else if (name == "search_only") {
    policy.mode = PlacementMode::kSearchOnly;
  } else if (name == "execution_only") {
    policy.mode = PlacementMode::kExecutionOnly;
  } else if (name == "always_ask") {
    policy.always_ask = true;
    policy.never_ask = false;
  } else if (name == "never_ask") {
    policy.never_ask = true;
    policy.always_ask = false;
  } else {
    throw Error("unknown arm '" + name + "'");
  }
  policy.validate();
  return arm;
}

std::optional<double> relative_delta(double control, double treatment) {
  if (control == 0.0) return std::nullopt;
  return (treatment - control) / control;
}

ArmResult run_arm(const ArmSpec& arm, const UserModel& model, std::size_t n,
                  std::uint64_t base_seed, std::shared_ptr<const TaskCorpus> corpus,
                  std::shared_ptr<const FactCatalog> catalog, unsigned threads) {
  if (corpus->tasks.empty()) throw Error("corpus has no tasks to simulate");
  Engine engine(corpus, catalog, arm.config);
  std::vector<SessionOutcome> outcomes(n);
  std::vector<char> returns(n, 0);

  // Each session writes only its own slot, so scheduling cannot change the
  // result.
  auto run_one = [&](std::size_t i) {
    const std::uint64_t seed = mix_seed(base_seed, i);
    SimulatedSession sim = simulate_session(model, engine, pick_task(*corpus, model, seed), seed);
    outcomes[i] = std::move(sim.outcome);
    returns[i] = sim.returns ? 1 : 0;
  };

  threads = std::max(1u, threads);
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::vector<std::thread> workers;
    std::exception_ptr failure;
    std::mutex failure_mu;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t begin = std::min(n, w * chunk);
      const std::size_t end = std::min(n, begin + chunk);
      workers.emplace_back([&, begin, end] {
        try {
          for (std::size_t i = begin; i < end; ++i) run_one(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  ArmResult result;
  result.name = arm.name;
  result.metrics = compute_metrics(outcomes);
  if (model.simulate_repeat_users && n > 0) {
    result.metrics.repeat_user_rate =
        static_cast<double>(std::count(returns.begin(), returns.end(), 1)) /
        static_cast<double>(n);
  }
  result.outcomes = std::move(outcomes);
  return result;
}

ABReport run_ab(const ABConfig& config, std::shared_ptr<const TaskCorpus> corpus,
                std::shared_ptr<const FactCatalog> catalog) {
  if (config.n_per_arm < 2) throw Error("n_per_arm must be at least 2");
  config.model.validate();
  ABReport report;
  report.n_per_arm = config.n_per_arm;
  report.base_seed = config.base_seed;
  report.control = run_arm(config.control, config.model, config.n_per_arm, config.base_seed,
                           corpus, catalog, config.threads);
  report.treatment = run_arm(config.treatment, config.model, config.n_per_arm,
                             config.base_seed, corpus, catalog, config.threads);
  const Metrics& c = report.control.metrics;
  const Metrics& t = report.treatment.metrics;
  report.delta_turns = relative_delta(c.mean_turns, t.mean_turns);
  report.delta_completion = relative_delta(c.completion_rate, t.completion_rate);
  if (c.mean_rating && t.mean_rating) {
    report.delta_rating = relative_delta(*c.mean_rating, *t.mean_rating);
  }
  report.turns_test =
      safe_welch(turns_of(report.treatment.outcomes), turns_of(report.control.outcomes));
  report.rating_test =
      safe_welch(ratings_of(report.treatment.outcomes), ratings_of(report.control.outcomes));
  return report;
}

json to_json(const ABReport& r) {
  auto welch = [](const WelchResult& w) {
    return json{{"t", w.t}, {"df", w.df}, {"p_value", w.p_value}};
  };
  return json{{"n_per_arm", r.n_per_arm},
              {"base_seed", r.base_seed},
              {"arms",
               json{{r.control.name, to_json(r.control.metrics)},
                    {r.treatment.name, to_json(r.treatment.metrics)}}},
              {"control", r.control.name},
              {"treatment", r.treatment.name},
              {"deltas",
               json{{"mean_turns", optional_number(r.delta_turns)},
                    {"completion_rate", optional_number(r.delta_completion)},
                    {"mean_rating", optional_number(r.delta_rating)}}},
              {"significance", json{{"turns", welch(r.turns_test)}, {"rating", welch(r.rating_test)}}}};
}

std::string format_table(const ABReport& r) {
  auto num = [](std::optional<double> v, int precision = 3) {
    if (!v) return std::string("-");
    std::ostringstream out;
    out << std::fixed << std::setprecision(precision) << *v;
    return out.str();
  };
  auto pct = [](std::optional<double> v) {
    if (!v) return std::string("-");
    std::ostringstream out;
    out << std::showpos << std::fixed << std::setprecision(1) << *v * 100.0 << "%";
    return out.str();
  };
  const Metrics& c = r.control.metrics;
  const Metrics& t = r.treatment.metrics;
  std::ostringstream out;
  out << std::left << std::setw(18) << "metric" << std::setw(14) << r.control.name
      << std::setw(14) << r.treatment.name << std::setw(10) << "delta"
      << "p-value\n";
  auto row = [&](const std::string& name, std::optional<double> a, std::optional<double> b,
                 std::optional<double> delta, std::optional<double> p) {
    out << std::left << std::setw(18) << name << std::setw(14) << num(a) << std::setw(14)
        << num(b) << std::setw(10) << pct(delta) << num(p, 4) << "\n";
  };
  row("sessions", double(c.n_sessions), double(t.n_sessions), std::nullopt, std::nullopt);
  row("mean_turns", c.mean_turns, t.mean_turns, r.delta_turns, r.turns_test.p_value);
  row("completion_rate", c.completion_rate, t.completion_rate, r.delta_completion, std::nullopt);
  row("mean_rating", c.mean_rating, t.mean_rating, r.delta_rating, r.rating_test.p_value);
  row("fact_like_rate", c.fact_like_rate, t.fact_like_rate, std::nullopt, std::nullopt);
  row("facts_shown", double(c.facts_shown), double(t.facts_shown), std::nullopt, std::nullopt);
  if (c.repeat_user_rate || t.repeat_user_rate) {
    row("repeat_user_rate", c.repeat_user_rate, t.repeat_user_rate,
        relative_delta(c.repeat_user_rate.value_or(0.0), t.repeat_user_rate.value_or(0.0)),
        std::nullopt);
  }
  return out.str();
}

}  // namespace ctafacts
