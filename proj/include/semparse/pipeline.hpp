// Experiment profiles and the end-to-end pipeline: corpus and splits,
// supervised baseline, logging, simulated feedback and feedback learning.

#ifndef SEMPARSE_PIPELINE_HPP
#define SEMPARSE_PIPELINE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <semparse/counterfactual.hpp>

namespace semparse {

struct profile {
  std::string name;
  split_sizes sizes;
  std::uint64_t db_seed = 7;
  std::uint64_t corpus_seed = 11;
  std::uint64_t split_seed = 5;
  model_config model;
  train_config supervised;
  train_config feedback;
};

inline profile desk_profile() {
  profile p;
  p.name = "desk";
  p.sizes = {300, 200, 300, 1500};
  p.model = {32, 64, 0.1, 1};
  p.supervised.epochs = 150;
  p.supervised.beam_size = 12;
  p.supervised.max_output_length = 64;
  p.feedback = p.supervised;
  p.feedback.epochs = 15;
  return p;
}

inline profile full_profile() {
  profile p;
  p.name = "full";
  p.sizes = {2000, 1843, 2000, 22765};
  p.model = {1000, 1024, 0.01, 1};
  p.supervised.minibatch_size = 80;
  p.supervised.validation_interval = 100;
  p.supervised.max_output_length = 200;
  p.supervised.beam_size = 12;
  p.supervised.epochs = 50;
  p.feedback = p.supervised;
  p.feedback.epochs = 10;
  return p;
}

// Seconds-scale run for pipeline tests.
inline profile smoke_profile() {
  profile p = desk_profile();
  p.name = "smoke";
  p.sizes = {150, 40, 40, 80};
  p.model = {16, 32, 0.1, 1};
  p.supervised.epochs = 150;
  p.supervised.beam_size = 2;
  p.supervised.validation_interval = 100;
  p.supervised.max_output_length = 40;
  p.feedback = p.supervised;
  p.feedback.epochs = 2;
  p.feedback.validation_interval = 5;
  return p;
}

inline profile profile_named(const std::string& name) {
  if (name == "desk") return desk_profile();
  if (name == "full") return full_profile();
  if (name == "smoke") return smoke_profile();
  throw std::invalid_argument("unknown profile: " + name + " (expected desk, full or smoke)");
}

struct experiment_data {
  geo_db db;
  std::vector<corpus_example> corpus;
  splits data;
  eval_set dev, test;
};

inline experiment_data prepare(const profile& p) {
  experiment_data e;
  e.db = make_toy_db(p.db_seed);
  e.corpus = generate_corpus(e.db, p.sizes.total(), p.corpus_seed);
  e.data = split(e.corpus, p.sizes, p.split_seed);
  e.dev = eval_set::from(e.data.dev, e.db);
  e.test = eval_set::from(e.data.test, e.db);
  return e;
}

inline std::vector<std::string> questions_of(const std::vector<corpus_example>& examples) {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.question);
  return out;
}

// Logs the parser's outputs for `examples` and attaches simulated feedback
// against their gold queries.
inline log_result simulated_log(const parser_model& pi0, const std::vector<corpus_example>& examples,
                                const train_config& cfg) {
  auto log = create_log(pi0, questions_of(examples), cfg.beam_size, cfg.max_output_length);
  for (std::size_t i = 0; i < log.records.size(); ++i)
    log.records[i] = simulate_feedback(std::move(log.records[i]), linearize(examples[log.question_index[i]].gold));
  return log;
}

struct mean_sd {
  double mean = 0;
  double sd = 0;  // population
};

inline mean_sd summarize(const std::vector<double>& v) {
  mean_sd s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.sd += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(s.sd / static_cast<double>(v.size()));
  return s;
}

struct system_runs {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<double> test_f1;  // percent
  mean_sd summary() const { return summarize(test_f1); }
};

struct trend_report {
  double baseline_f1 = 0;  // percent
  std::size_t log_size = 0;
  std::size_t log_dropped = 0;
  std::size_t log_correct = 0;
  std::vector<system_runs> systems;

  const system_runs& system(const std::string& name) const {
    for (const auto& s : systems)
      if (s.name == name) return s;
    throw std::out_of_range("no runs for " + name);
  }
};

// Baseline once, simulated log once, then each objective once per seed. The
// seed varies the minibatch order of feedback learning.
inline trend_report run_trend(const profile& p, const std::vector<objective>& objectives,
                              const std::vector<std::uint64_t>& seeds,
                              const std::function<void(const std::string&)>& note = {}) {
  auto say = [&](const std::string& s) {
    if (note) note(s);
  };
  const auto e = prepare(p);
  trend_report r;
  auto base = train_supervised(to_parse_examples(e.data.sup), e.dev, e.db, p.supervised, p.model).model;
  r.baseline_f1 = 100 * evaluate(base, e.test, e.db, p.supervised.beam_size, p.supervised.max_output_length).scores.f1;
  say("baseline test F1 " + std::to_string(r.baseline_f1));

  const auto log = simulated_log(base, e.data.log, p.feedback);
  r.log_size = log.records.size();
  r.log_dropped = log.dropped;
  for (const auto& rec : log.records) r.log_correct += static_cast<std::size_t>(rec.seq_reward);
  say("log " + std::to_string(r.log_size) + " records, " + std::to_string(r.log_correct) + " fully correct, " +
      std::to_string(r.log_dropped) + " dropped");

  for (auto obj : objectives) {
    system_runs runs{std::string(to_string(obj)), seeds, {}};
    for (auto seed : seeds) {
      auto cfg = p.feedback;
      cfg.seed = seed;
      auto out = train_counterfactual(base, log.records, obj, e.dev, e.db, cfg);
      runs.test_f1.push_back(
          100 * evaluate(out.run.model, e.test, e.db, cfg.beam_size, cfg.max_output_length).scores.f1);
      say(runs.name + " seed " + std::to_string(seed) + " test F1 " + std::to_string(runs.test_f1.back()));
    }
    r.systems.push_back(std::move(runs));
  }
  return r;
}

}  // namespace semparse

#endif  // SEMPARSE_PIPELINE_HPP
