// Statement-form feedback collection: serves one form per logged
// question-query pair, turns markings into token rewards, and appends the
// resulting feedback records. Every serve and submit is journaled so a
// session can be replayed exactly.

#ifndef SEMPARSE_FEEDBACK_SERVICE_HPP
#define SEMPARSE_FEEDBACK_SERVICE_HPP

#include <chrono>
#include <cmath>
#include <functional>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include <semparse/counterfactual.hpp>
#include <semparse/statements.hpp>
#include <semparse/tag_descriptions.hpp>

namespace semparse {

// Carries an HTTP-style status: 400 bad request, 404 not found, 409 conflict.
class service_error : public std::runtime_error {
 public:
  service_error(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

struct tooltip {
  std::string key;
  std::string value;  // empty for key-only descriptions
  std::string text;
};

struct form_session {
  std::string form_id;
  std::string question;
  statement_block block;
  std::vector<tooltip> tooltips;
  std::optional<double> served_at;
  std::optional<double> submitted_at;
};

struct progress_stats {
  std::size_t pending = 0;
  std::size_t submitted = 0;
  std::optional<double> mean_timing;
  std::optional<double> stddev_timing;  // population
};

struct journal_event {
  enum class kind { serve, submit };
  kind type = kind::serve;
  std::string form_id;
  double time = 0;
  std::vector<int> verdicts;  // submit only: 1 yes, 0 no, in statement order

  bool operator==(const journal_event&) const = default;
};

inline nlohmann::ordered_json to_json(const journal_event& e) {
  nlohmann::ordered_json j;
  j["event"] = e.type == journal_event::kind::serve ? "serve" : "submit";
  j["form_id"] = e.form_id;
  j["time"] = e.time;
  if (e.type == journal_event::kind::submit) j["verdicts"] = e.verdicts;
  return j;
}

inline journal_event journal_event_from_json(const nlohmann::json& j) {
  journal_event e;
  const auto ev = j.at("event").get<std::string>();
  if (ev == "serve") {
    e.type = journal_event::kind::serve;
  } else if (ev == "submit") {
    e.type = journal_event::kind::submit;
    e.verdicts = j.at("verdicts").get<std::vector<int>>();
  } else {
    throw std::invalid_argument("unknown journal event: " + ev);
  }
  e.form_id = j.at("form_id").get<std::string>();
  e.time = j.at("time").get<double>();
  return e;
}

inline std::vector<journal_event> read_journal(std::istream& in) {
  std::vector<journal_event> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    try {
      out.push_back(journal_event_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("journal line " + std::to_string(no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<tooltip> tooltips_for(const statement_block& block) {
  std::vector<tooltip> out;
  auto add = [&](const std::string& key, const std::string& value) {
    for (const auto& t : out)
      if (t.key == key && t.value == value) return;
    out.push_back({key, value, std::string(describe_tag(key, value.empty() ? std::nullopt : std::optional<std::string_view>(value)))});
  };
  for (const auto& s : block.statements) {
    for (const auto& p : s.payload) {
      if (p.is_literal()) continue;
      if (s.stype == statement_type::question_type) {
        if (p.key == "findkey") add(p.value, "");
        continue;
      }
      add(p.key, "");
      add(p.key, p.value);
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(const form_session& f) {
  nlohmann::ordered_json j;
  j["form_id"] = f.form_id;
  j["question"] = f.question;
  j["tokens"] = f.block.query.texts();
  j["statements"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < f.block.statements.size(); ++i) {
    const auto& s = f.block.statements[i];
    nlohmann::ordered_json sj;
    sj["index"] = i;
    sj["stype"] = to_string(s.stype);
    sj["display_text"] = s.display_text;
    sj["payload"] = nlohmann::ordered_json::array();
    for (const auto& p : s.payload) sj["payload"].push_back({{"key", p.key}, {"value", p.value}});
    sj["token_span"] = s.token_span;
    j["statements"].push_back(std::move(sj));
  }
  j["tooltips"] = nlohmann::ordered_json::array();
  for (const auto& t : f.tooltips) j["tooltips"].push_back({{"key", t.key}, {"value", t.value}, {"text", t.text}});
  return j;
}

inline nlohmann::ordered_json to_json(const progress_stats& p) {
  nlohmann::ordered_json j;
  j["pending"] = p.pending;
  j["submitted"] = p.submitted;
  j["mean_timing"] = p.mean_timing ? nlohmann::ordered_json(*p.mean_timing) : nlohmann::ordered_json();
  j["stddev_timing"] = p.stddev_timing ? nlohmann::ordered_json(*p.stddev_timing) : nlohmann::ordered_json();
  return j;
}

// Accepts {"verdicts": [{"statement": i, "verdict": "yes"|"no"}, ...]}.
inline marking marking_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("verdicts") || !j.at("verdicts").is_array())
    throw std::invalid_argument("marking needs a verdicts array");
  marking m;
  for (const auto& v : j.at("verdicts")) {
    const auto s = v.at("statement").get<std::size_t>();
    const auto text = v.at("verdict").get<std::string>();
    if (text != "yes" && text != "no") throw std::invalid_argument("verdict must be yes or no");
    m.verdicts.push_back({s, text == "yes" ? verdict::yes : verdict::no});
  }
  return m;
}

inline double steady_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

class feedback_service {
 public:
  using clock = std::function<double()>;

  // One form per logged record, in log order; form ids are "1", "2", ...
  explicit feedback_service(const std::vector<feedback_record>& logged, clock now = steady_seconds)
      : now_(std::move(now)) {
    for (std::size_t i = 0; i < logged.size(); ++i) {
      const auto ast = delinearize(logged[i].tokens);
      form_session f;
      f.form_id = std::to_string(i + 1);
      f.question = logged[i].question;
      f.block = generate_statements(ast, logged[i].question);
      f.tooltips = tooltips_for(f.block);
      index_.emplace(f.form_id, forms_.size());
      forms_.push_back(std::move(f));
    }
  }

  // Optional sinks; each record or event is written as one flushed line.
  void set_record_sink(std::ostream* out) { record_out_ = out; }
  void set_journal_sink(std::ostream* out) { journal_out_ = out; }

  std::size_t size() const noexcept { return forms_.size(); }

  // Next form in queue order: never-served forms first, then served forms
  // that were not submitted.
  std::optional<std::string> next_form_id() const {
    std::lock_guard lock(mu_);
    for (const auto& f : forms_)
      if (!f.served_at && !f.submitted_at) return f.form_id;
    for (const auto& f : forms_)
      if (!f.submitted_at) return f.form_id;
    return std::nullopt;
  }

  form_session serve_form(const std::string& id) { return serve_at(id, now_()); }

  feedback_record submit_marking(const std::string& id, const marking& m) { return submit_at(id, m, now_()); }

  progress_stats progress() const {
    std::lock_guard lock(mu_);
    progress_stats p;
    std::vector<double> times;
    for (const auto& f : forms_) {
      if (f.submitted_at) {
        ++p.submitted;
        times.push_back(*f.submitted_at - *f.served_at);
      } else {
        ++p.pending;
      }
    }
    if (!times.empty()) {
      double mean = 0;
      for (double t : times) mean += t;
      mean /= static_cast<double>(times.size());
      double var = 0;
      for (double t : times) var += (t - mean) * (t - mean);
      p.mean_timing = mean;
      p.stddev_timing = std::sqrt(var / static_cast<double>(times.size()));
    }
    return p;
  }

  const form_session& form(const std::string& id) const { return forms_[lookup(id)]; }
  std::vector<feedback_record> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }
  std::vector<journal_event> journal() const {
    std::lock_guard lock(mu_);
    return journal_;
  }

  // Re-applies journaled events with their recorded times.
  void replay(std::span<const journal_event> events) {
    for (const auto& e : events) {
      if (e.type == journal_event::kind::serve) {
        serve_at(e.form_id, e.time);
        continue;
      }
      marking m;
      for (std::size_t i = 0; i < e.verdicts.size(); ++i) m.verdicts.push_back({i, e.verdicts[i] ? verdict::yes : verdict::no});
      submit_at(e.form_id, m, e.time);
    }
  }

 private:
  std::size_t lookup(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw service_error(404, "unknown form " + id);
    return it->second;
  }

  form_session serve_at(const std::string& id, double t) {
    std::lock_guard lock(mu_);
    auto& f = forms_[lookup(id)];
    if (f.submitted_at) throw service_error(409, "form " + id + " was already submitted");
    f.served_at = t;
    log_event({journal_event::kind::serve, id, t, {}});
    return f;
  }

  feedback_record submit_at(const std::string& id, const marking& m, double t) {
    std::lock_guard lock(mu_);
    auto& f = forms_[lookup(id)];
    if (f.submitted_at) throw service_error(409, "form " + id + " was already submitted");
    if (!f.served_at) throw service_error(409, "form " + id + " was never served");
    token_rewards tr;
    try {
      tr = map_marking_to_token_rewards(f.block, m);
    } catch (const std::invalid_argument& e) {
      throw service_error(400, e.what());
    }
    f.submitted_at = std::max(t, *f.served_at);

    feedback_record r;
    r.question = f.question;
    r.tokens = f.block.query;
    r.propensity = 1.0;
    r.seq_reward = tr.sequence;
    r.token_rewards = tr.token;
    r.covered = tr.covered;
    r.source = feedback_source::human;
    r.timing_seconds = *f.submitted_at - *f.served_at;
    records_.push_back(r);
    if (record_out_) *record_out_ << to_line(r) << '\n' << std::flush;

    journal_event e{journal_event::kind::submit, id, t, std::vector<int>(f.block.statements.size(), 1)};
    for (const auto& v : m.verdicts) e.verdicts[v.statement_index] = v.value == verdict::yes ? 1 : 0;
    log_event(std::move(e));
    return r;
  }

  void log_event(journal_event e) {
    if (journal_out_) *journal_out_ << to_json(e).dump() << '\n' << std::flush;
    journal_.push_back(std::move(e));
  }

  clock now_;
  std::vector<form_session> forms_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<feedback_record> records_;
  std::vector<journal_event> journal_;
  std::ostream* record_out_ = nullptr;
  std::ostream* journal_out_ = nullptr;
  mutable std::mutex mu_;
};

}  // namespace semparse

#endif  // SEMPARSE_FEEDBACK_SERVICE_HPP
