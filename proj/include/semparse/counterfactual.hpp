// Learning from logged bandit feedback: log creation, simulated feedback,
// the expected-reward objectives with their reweighted and token-level
// variants, and the warm-started training loop.

#ifndef SEMPARSE_COUNTERFACTUAL_HPP
#define SEMPARSE_COUNTERFACTUAL_HPP

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include <semparse/beam_search.hpp>
#include <semparse/training.hpp>

namespace semparse {

enum class feedback_source { human, simulated };

inline std::string_view to_string(feedback_source s) { return s == feedback_source::human ? "human" : "simulated"; }

inline feedback_source feedback_source_from_string(std::string_view s) {
  if (s == "human") return feedback_source::human;
  if (s == "simulated") return feedback_source::simulated;
  throw std::invalid_argument("unknown feedback source: " + std::string(s));
}

// One logged triple (question, output, reward) plus token-level rewards.
struct feedback_record {
  std::string question;
  linear_query tokens;
  double propensity = 1.0;
  int seq_reward = 0;
  std::vector<int> token_rewards;
  std::vector<std::size_t> covered;
  feedback_source source = feedback_source::simulated;
  std::optional<double> timing_seconds;

  bool operator==(const feedback_record&) const = default;
};

inline nlohmann::ordered_json to_json(const feedback_record& r) {
  nlohmann::ordered_json j;
  j["question"] = r.question;
  j["tokens"] = r.tokens.texts();
  j["propensity"] = r.propensity;
  j["seq_reward"] = r.seq_reward;
  j["token_rewards"] = r.token_rewards;
  j["covered"] = r.covered;
  j["source"] = to_string(r.source);
  j["timing_seconds"] = r.timing_seconds ? nlohmann::ordered_json(*r.timing_seconds) : nlohmann::ordered_json();
  return j;
}

inline feedback_record record_from_json(const nlohmann::json& j) {
  feedback_record r;
  r.question = j.at("question").get<std::string>();
  r.tokens = linear_query::from_texts(j.at("tokens").get<std::vector<std::string>>());
  r.propensity = j.at("propensity").get<double>();
  r.seq_reward = j.at("seq_reward").get<int>();
  r.token_rewards = j.at("token_rewards").get<std::vector<int>>();
  r.covered = j.at("covered").get<std::vector<std::size_t>>();
  r.source = feedback_source_from_string(j.at("source").get<std::string>());
  if (j.contains("timing_seconds") && !j.at("timing_seconds").is_null()) r.timing_seconds = j.at("timing_seconds").get<double>();
  if (!(r.propensity > 0 && r.propensity <= 1)) throw std::invalid_argument("propensity outside (0, 1]");
  if (r.token_rewards.size() != r.tokens.size()) throw std::invalid_argument("token reward count differs from token count");
  return r;
}

inline std::string to_line(const feedback_record& r) { return to_json(r).dump(); }

inline void write_log(std::ostream& out, std::span<const feedback_record> log) {
  for (const auto& r : log) out << to_line(r) << '\n';
}

inline std::vector<feedback_record> read_log(std::istream& in) {
  std::vector<feedback_record> log;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      log.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("feedback log line " + std::to_string(n) + ": " + e.what());
    }
  }
  return log;
}

inline void save_log(const std::string& path, std::span<const feedback_record> log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_log(out, log);
}

inline std::vector<feedback_record> load_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return read_log(in);
}

// ---------------------------------------------------------------------------
// Logging and feedback

struct log_result {
  std::vector<feedback_record> records;
  std::vector<std::size_t> question_index;  // position of each record's question in the input
  std::size_t dropped = 0;
};

// Parses every question with the deterministic logging policy and keeps the
// outputs that form a well-formed query.
inline log_result create_log(const parser_model& pi0, const std::vector<std::string>& questions, std::size_t beam_size,
                             std::size_t max_length) {
  log_result out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    auto y = decode(pi0, tokenize_question(questions[i]), beam_size, max_length);
    if (y.size() == 0 || !try_delinearize(y)) {
      ++out.dropped;
      continue;
    }
    feedback_record r;
    r.question = questions[i];
    r.token_rewards.assign(y.size(), 0);
    r.tokens = std::move(y);
    out.records.push_back(std::move(r));
    out.question_index.push_back(i);
  }
  return out;
}

inline feedback_record simulate_feedback(feedback_record r, const linear_query& gold) {
  r.source = feedback_source::simulated;
  r.seq_reward = r.tokens == gold ? 1 : 0;
  r.token_rewards.assign(r.tokens.size(), 0);
  for (std::size_t j = 0; j < r.tokens.size() && j < gold.size(); ++j) r.token_rewards[j] = r.tokens[j] == gold[j] ? 1 : 0;
  r.covered.clear();
  for (std::size_t j = 0; j < r.tokens.size(); ++j) r.covered.push_back(j);
  return r;
}

// Fully correct records as supervised pairs.
inline std::vector<parse_example> b2s_extract(std::span<const feedback_record> log) {
  std::vector<parse_example> out;
  for (const auto& r : log)
    if (r.seq_reward == 1) out.push_back({tokenize_question(r.question), r.tokens});
  return out;
}

// ---------------------------------------------------------------------------
// Objectives. Each returns the value and its gradient; all are maximized.

struct objective_value {
  double value = 0;
  VectorXd grad;
};

struct osl_state {
  VectorXd snapshot;  // w'
  double z = 1.0;     // (1/n) sum_t pi_w'(y_t | x_t) over the whole log
};

namespace detail {

inline parser_model::forward_pass forward_record(const parser_model& m, const feedback_record& r) {
  return m.forward(m.source_ids(tokenize_question(r.question)), m.target_ids(r.tokens));
}

inline double total(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

inline void check_z(double z) {
  if (!(z > 0) || !std::isfinite(z)) throw std::domain_error("reweighting denominator must be positive");
}

inline void check_batch(std::span<const feedback_record> batch) {
  if (batch.empty()) throw std::invalid_argument("empty minibatch");
}

}  // namespace detail

// (1/m) sum_t delta_t pi_w(y_t | x_t)
inline objective_value objective_dpm(const parser_model& m, std::span<const feedback_record> batch) {
  detail::check_batch(batch);
  objective_value r{0, VectorXd::Zero(m.num_parameters())};
  const double n = static_cast<double>(batch.size());
  for (const auto& rec : batch) {
    if (rec.seq_reward == 0) continue;
    const auto f = detail::forward_record(m, rec);
    const double p = std::exp(detail::total(f.logp));
    r.value += rec.seq_reward * p / n;
    std::vector<double> w(f.logp.size(), rec.seq_reward * p / n);
    m.backward(f, w, r.grad);
  }
  return r;
}

// sum_t delta_t pi_w / sum_t pi_w
inline objective_value objective_dpm_r(const parser_model& m, std::span<const feedback_record> log) {
  detail::check_batch(log);
  std::vector<parser_model::forward_pass> fs;
  std::vector<double> p;
  double s = 0, num = 0;
  for (const auto& rec : log) {
    fs.push_back(detail::forward_record(m, rec));
    p.push_back(std::exp(detail::total(fs.back().logp)));
    s += p.back();
    num += rec.seq_reward * p.back();
  }
  if (!(s > 0)) throw std::domain_error("all sequence probabilities are zero");
  objective_value r{num / s, VectorXd::Zero(m.num_parameters())};
  for (std::size_t t = 0; t < log.size(); ++t) {
    const double c = p[t] * (log[t].seq_reward * s - num) / (s * s);
    if (c == 0) continue;
    std::vector<double> w(fs[t].logp.size(), c);
    m.backward(fs[t], w, r.grad);
  }
  return r;
}

inline objective_value objective_dpm_osl(const parser_model& m, std::span<const feedback_record> batch,
                                         const osl_state& osl) {
  detail::check_z(osl.z);
  auto r = objective_dpm(m, batch);
  r.value /= osl.z;
  r.grad /= osl.z;
  return r;
}

// (1/m) sum_t sum_j delta_tj log pi_w(y_tj | y_t<j, x_t)
inline objective_value objective_dpm_t(const parser_model& m, std::span<const feedback_record> batch) {
  detail::check_batch(batch);
  objective_value r{0, VectorXd::Zero(m.num_parameters())};
  const double n = static_cast<double>(batch.size());
  for (const auto& rec : batch) {
    if (rec.token_rewards.size() != rec.tokens.size()) throw std::invalid_argument("token rewards missing");
    bool any = false;
    for (int d : rec.token_rewards) any = any || d != 0;
    if (!any) continue;
    const auto f = detail::forward_record(m, rec);
    std::vector<double> w(f.logp.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] = rec.token_rewards[j] / n;
      if (rec.token_rewards[j]) r.value += w[j] * f.logp[j];
    }
    m.backward(f, w, r.grad);
  }
  return r;
}

inline objective_value objective_dpm_t_osl(const parser_model& m, std::span<const feedback_record> batch,
                                           const osl_state& osl) {
  detail::check_z(osl.z);
  auto r = objective_dpm_t(m, batch);
  r.value /= osl.z;
  r.grad /= osl.z;
  return r;
}

inline osl_state refresh_osl(const parser_model& m, std::span<const feedback_record> log) {
  if (log.empty()) throw std::invalid_argument("empty log");
  osl_state s;
  s.snapshot = m.parameters();
  double sum = 0;
  for (const auto& rec : log) sum += std::exp(detail::total(detail::forward_record(m, rec).logp));
  s.z = sum / static_cast<double>(log.size());
  detail::check_z(s.z);
  return s;
}

// ---------------------------------------------------------------------------
// Training

enum class objective { b2s, dpm, dpm_osl, dpm_t, dpm_t_osl };

inline constexpr std::array<objective, 5> all_objectives{objective::b2s, objective::dpm, objective::dpm_osl,
                                                         objective::dpm_t, objective::dpm_t_osl};

inline std::string_view to_string(objective o) {
  switch (o) {
    case objective::b2s: return "B2S";
    case objective::dpm: return "DPM";
    case objective::dpm_osl: return "DPM+OSL";
    case objective::dpm_t: return "DPM+T";
    case objective::dpm_t_osl: return "DPM+T+OSL";
  }
  return "?";
}

inline objective objective_from_string(std::string_view s) {
  for (auto o : all_objectives)
    if (to_string(o) == s) return o;
  throw std::invalid_argument("unknown objective: " + std::string(s));
}

struct counterfactual_result {
  training_result run;
  std::vector<double> osl_z;  // denominator after each refresh
};

// Improves the warm-start model `pi0` on the feedback log. Validation and
// checkpoint selection follow the supervised loop; the reweighting
// denominator is recomputed over the full log after every validation.
inline counterfactual_result train_counterfactual(const parser_model& pi0, const std::vector<feedback_record>& log,
                                                  objective obj, const eval_set& dev, const geo_db& db,
                                                  const train_config& cfg) {
  if (log.empty()) throw std::invalid_argument("empty feedback log");
  auto validate = [&](const parser_model& m) {
    return evaluate(m, dev, db, cfg.beam_size, cfg.max_output_length).scores.f1;
  };
  counterfactual_result out;

  if (obj == objective::b2s) {
    const auto pairs = b2s_extract(log);
    if (pairs.empty()) throw std::invalid_argument("no fully correct records in the log");
    out.run = run_training(
        pi0, pairs.size(), cfg,
        [&](const parser_model& m, std::span<const std::size_t> idx) {
          std::vector<parse_example> batch;
          for (auto i : idx) batch.push_back(pairs[i]);
          return cross_entropy_loss(m, batch);
        },
        validate);
    return out;
  }

  const bool osl = obj == objective::dpm_osl || obj == objective::dpm_t_osl;
  osl_state state;
  std::vector<feedback_record> batch;
  out.run = run_training(
      pi0, log.size(), cfg,
      [&](const parser_model& m, std::span<const std::size_t> idx) {
        batch.clear();
        for (auto i : idx) batch.push_back(log[i]);
        objective_value v;
        switch (obj) {
          case objective::dpm: v = objective_dpm(m, batch); break;
          case objective::dpm_osl: v = objective_dpm_osl(m, batch, state); break;
          case objective::dpm_t: v = objective_dpm_t(m, batch); break;
          default: v = objective_dpm_t_osl(m, batch, state); break;
        }
        return loss_and_grad{-v.value, -v.grad};
      },
      validate,
      [&](const parser_model& m) {
        if (!osl) return;
        state = refresh_osl(m, log);
        out.osl_z.push_back(state.z);
      });
  return out;
}

}  // namespace semparse

#endif  // SEMPARSE_COUNTERFACTUAL_HPP
