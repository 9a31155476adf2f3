// Supervised cross-entropy training, dev evaluation and the shared
// minibatch/validation loop used by every learner.

#ifndef SEMPARSE_TRAINING_HPP
#define SEMPARSE_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <semparse/beam_search.hpp>
#include <semparse/corpus.hpp>
#include <semparse/geo.hpp>
#include <semparse/metrics.hpp>
#include <semparse/optimizer.hpp>
#include <semparse/parser_model.hpp>

namespace semparse {

struct train_config {
  std::size_t minibatch_size = 16;
  std::size_t validation_interval = 50;  // updates
  std::size_t max_output_length = 64;
  double clip_norm = 1.0;
  double rho = 0.95;
  double eps = 1e-6;
  double learning_rate = 1.0;
  std::size_t beam_size = 12;
  std::size_t epochs = 30;
  std::size_t patience = 0;  // validations without improvement before stopping; 0 disables
  std::uint64_t seed = 1;

  void check() const {
    if (minibatch_size < 1) throw std::invalid_argument("minibatch size must be at least 1");
    if (!(clip_norm > 0)) throw std::invalid_argument("clip norm must be positive");
    if (beam_size < 1) throw std::invalid_argument("beam size must be at least 1");
    if (validation_interval < 1) throw std::invalid_argument("validation interval must be at least 1");
  }
};

// Tokenized question with its target token sequence.
struct parse_example {
  std::vector<std::string> words;
  linear_query query;
};

inline std::vector<parse_example> to_parse_examples(const std::vector<corpus_example>& corpus) {
  std::vector<parse_example> out;
  out.reserve(corpus.size());
  for (const auto& e : corpus) out.push_back({tokenize_question(e.question), linearize(e.gold)});
  return out;
}

inline parser_model make_parser(const std::vector<parse_example>& data, model_config cfg) {
  std::vector<std::pair<std::vector<std::string>, linear_query>> pairs;
  for (const auto& e : data) pairs.emplace_back(e.words, e.query);
  return make_parser(pairs, cfg);
}

// Questions with gold answers, for answer-level evaluation.
struct eval_set {
  std::vector<std::vector<std::string>> questions;
  std::vector<answer> golds;

  static eval_set from(const std::vector<corpus_example>& corpus, const geo_db& db) {
    eval_set s;
    for (const auto& e : corpus) {
      s.questions.push_back(tokenize_question(e.question));
      s.golds.push_back(execute(e.gold, db));
    }
    return s;
  }
  std::size_t size() const noexcept { return questions.size(); }
};

struct evaluation {
  prf scores;
  std::vector<outcome> items;
  std::vector<linear_query> predictions;
};

inline evaluation evaluate(const parser_model& m, const eval_set& set, const geo_db& db, std::size_t beam_size,
                           std::size_t max_length) {
  evaluation ev;
  std::vector<answer> answers;
  answers.reserve(set.size());
  for (const auto& q : set.questions) {
    ev.predictions.push_back(decode(m, q, beam_size, max_length));
    answers.push_back(execute(ev.predictions.back(), db));
  }
  ev.items = outcomes(answers, set.golds);
  ev.scores = corpus_f1(std::span<const outcome>(ev.items));
  return ev;
}

struct loss_and_grad {
  double loss = 0;
  VectorXd grad;  // gradient of `loss`
};

// -(1/n) sum_t sum_j log pi(ybar_tj | ybar_t<j, x_t)
inline loss_and_grad cross_entropy_loss(const parser_model& m, std::span<const parse_example> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  loss_and_grad r;
  r.grad = VectorXd::Zero(m.num_parameters());
  const double n = static_cast<double>(batch.size());
  for (const auto& e : batch) {
    const auto f = m.forward(m.source_ids(e.words), m.target_ids(e.query));
    for (double lp : f.logp) r.loss -= lp / n;
    std::vector<double> w(f.logp.size(), -1.0 / n);
    m.backward(f, w, r.grad);
  }
  return r;
}

struct training_history {
  std::vector<std::size_t> validation_updates;
  std::vector<double> dev_f1;
  std::size_t updates = 0;
  std::size_t best_update = 0;
  double best_f1 = -1;
};

struct training_result {
  parser_model model;
  training_history history;
};

// Minibatch descent on `loss_grad(model, batch indices)`; validates at update
// 0 and every `validation_interval` updates and keeps the best-dev checkpoint.
// `on_validate` runs after each validation (used for reweighting refreshes).
inline training_result run_training(parser_model model, std::size_t n_items, const train_config& cfg,
                                    const std::function<loss_and_grad(const parser_model&, std::span<const std::size_t>)>& loss_grad,
                                    const std::function<double(const parser_model&)>& validate,
                                    const std::function<void(const parser_model&)>& on_validate = {}) {
  cfg.check();
  if (n_items == 0) throw std::invalid_argument("no training items");
  std::mt19937_64 rng(cfg.seed);
  adadelta opt(cfg.rho, cfg.eps, cfg.learning_rate);
  training_result best{model, {}};
  training_history& h = best.history;
  std::size_t stale = 0;

  auto run_validation = [&]() {
    const double f1 = validate(model);
    h.validation_updates.push_back(h.updates);
    h.dev_f1.push_back(f1);
    if (f1 > h.best_f1) {
      h.best_f1 = f1;
      h.best_update = h.updates;
      best.model = model;
      stale = 0;
    } else {
      ++stale;
    }
    if (on_validate) on_validate(model);
  };

  run_validation();
  std::vector<std::size_t> order(n_items);
  for (std::size_t i = 0; i < n_items; ++i) order[i] = i;
  bool stop = false;
  for (std::size_t epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    deterministic_shuffle(order, rng);
    for (std::size_t start = 0; start < n_items && !stop; start += cfg.minibatch_size) {
      const std::size_t end = std::min(n_items, start + cfg.minibatch_size);
      auto r = loss_grad(model, std::span<const std::size_t>(order.data() + start, end - start));
      clip_by_global_norm(r.grad, cfg.clip_norm);
      opt.step(model.parameters(), r.grad);
      ++h.updates;
      if (h.updates % cfg.validation_interval == 0) {
        run_validation();
        if (cfg.patience && stale >= cfg.patience) stop = true;
      }
    }
  }
  return best;
}

inline training_result train_supervised(const std::vector<parse_example>& d_sup, const eval_set& dev, const geo_db& db,
                                        const train_config& cfg, const model_config& mcfg) {
  if (d_sup.empty()) throw std::invalid_argument("empty supervised set");
  parser_model model = make_parser(d_sup, mcfg);
  return run_training(
      std::move(model), d_sup.size(), cfg,
      [&](const parser_model& m, std::span<const std::size_t> idx) {
        std::vector<parse_example> batch;
        for (auto i : idx) batch.push_back(d_sup[i]);
        return cross_entropy_loss(m, batch);
      },
      [&](const parser_model& m) { return evaluate(m, dev, db, cfg.beam_size, cfg.max_output_length).scores.f1; });
}

}  // namespace semparse

#endif  // SEMPARSE_TRAINING_HPP
