#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include <semparse/beam_search.hpp>
#include <semparse/optimizer.hpp>
#include <semparse/parser_model.hpp>
#include <semparse/training.hpp>

#include "support/finite_difference.hpp"

using namespace semparse;

namespace {

const std::vector<std::string> question{"how", "many", "a", "b"};

parser_model tiny_model(std::uint64_t seed = 3) {
  vocabulary src({"<unk>", "a", "b", "how", "many"});
  vocabulary tgt({"<unk>@0", "query@2", "nwr@1", "keyval@2", "a@0", "b@s", "qtype@1", "count@0"});
  return parser_model(src, tgt, model_config{2, 1, 0.8, seed});
}

linear_query gold() { return linear_query::from_string("query@2 nwr@1 keyval@2 a@0 b@s qtype@1 count@0"); }

std::vector<parse_example> tiny_batch() {
  return {{question, gold()},
          {{"a", "b"}, linear_query::from_string("query@2 nwr@1 keyval@2 a@0 b@s qtype@1 count@0")},
          {{"many", "many", "b"}, linear_query::from_string("query@2 nwr@1 keyval@2 a@0 a@s qtype@1 count@0")}};
}

}  // namespace

TEST(Vocabulary, BuildAndLookup) {
  auto v = vocabulary::build({{"b", "a"}, {"c", "a", "<unk>"}}, "<unk>");
  EXPECT_EQ(v.items(), (std::vector<std::string>{"<unk>", "a", "b", "c"}));
  EXPECT_EQ(v.id("c"), 3u);
  EXPECT_EQ(v.id("zzz"), 0u);
  EXPECT_THROW(vocabulary({"x", "x"}), std::invalid_argument);
  EXPECT_THROW(vocabulary(std::vector<std::string>{}), std::invalid_argument);
  const auto path = std::filesystem::temp_directory_path() / "semparse_vocab_test.txt";
  v.save(path.string());
  EXPECT_EQ(vocabulary::load(path.string()), v);
  std::filesystem::remove(path);
}

TEST(ParserModel, SmallEnoughForGradientChecks) {
  EXPECT_LE(tiny_model().num_parameters(), 100);
  Index sum = 0;
  for (const auto& b : tiny_model().blocks()) sum += b.size();
  EXPECT_EQ(sum, tiny_model().num_parameters());
}

TEST(ParserModel, SoftmaxNormalizes) {
  const auto m = tiny_model();
  const auto f = m.forward(m.source_ids(question), m.target_ids(gold()));
  for (const auto& s : f.steps) {
    EXPECT_NEAR(s.prob.sum(), 1.0, 1e-12);
    EXPECT_NEAR(s.alpha.sum(), 1.0, 1e-12);
    EXPECT_GT(s.prob.minCoeff(), 0.0);
  }
}

TEST(ParserModel, SequenceProbabilityIsProductOfTokens) {
  const auto m = tiny_model();
  double s = 0;
  for (double lp : token_logprobs(m, question, gold())) s += lp;
  EXPECT_NEAR(std::exp(s), seq_prob(m, question, gold()), 1e-15);
  EXPECT_LT(seq_prob(m, question, gold()), 1.0);
}

TEST(ParserModel, ZeroParametersAreUniform) {
  auto m = tiny_model();
  m.parameters().setZero();
  const auto batch = tiny_batch();
  const auto r = cross_entropy_loss(m, batch);
  const double V = static_cast<double>(m.target_vocab().size());
  EXPECT_NEAR(r.loss, 7 * std::log(V), 1e-12);
}

TEST(ParserModel, Deterministic) {
  EXPECT_EQ(tiny_model(5).parameters(), tiny_model(5).parameters());
  EXPECT_NE(tiny_model(5).parameters(), tiny_model(6).parameters());
}

TEST(ParserModel, UnknownWordsMapToUnk) {
  const auto m = tiny_model();
  EXPECT_EQ(m.source_ids({"zebra", "a"}), (std::vector<std::size_t>{0, 1}));
  EXPECT_THROW(token_logprobs(m, {}, gold()), std::invalid_argument);
}

TEST(ParserModel, CheckpointRoundTrip) {
  const auto m = tiny_model();
  const auto path = std::filesystem::temp_directory_path() / "semparse_ckpt_test.json";
  m.save(path.string());
  const auto l = parser_model::load(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(l.parameters(), m.parameters());
  EXPECT_EQ(l.target_vocab(), m.target_vocab());
  EXPECT_EQ(token_logprobs(l, question, gold()), token_logprobs(m, question, gold()));
  auto j = m.to_json();
  j["format"] = "other";
  EXPECT_THROW(parser_model::from_json(j), std::runtime_error);
  j = m.to_json();
  j["tensors"]["output.W"]["rows"] = 99;
  EXPECT_THROW(parser_model::from_json(j), std::runtime_error);
}

TEST(Gradient, CrossEntropyMatchesFiniteDifferences) {
  auto m = tiny_model();
  const auto batch = tiny_batch();
  const auto r = cross_entropy_loss(m, batch);
  const auto fd = testsupport::central_difference(m.parameters(), [&] { return cross_entropy_loss(m, batch).loss; });
  EXPECT_LT(testsupport::relative_error(r.grad, fd), 1e-4);
}

TEST(Gradient, WeightedBackwardMatchesFiniteDifferences) {
  auto m = tiny_model(9);
  const std::vector<double> w{0.3, -1.2, 0.0, 2.0, 0.5, -0.1, 1.0};
  auto value = [&] {
    const auto lp = token_logprobs(m, question, gold());
    double s = 0;
    for (std::size_t j = 0; j < lp.size(); ++j) s += w[j] * lp[j];
    return s;
  };
  VectorXd g;
  m.backward(m.forward(m.source_ids(question), m.target_ids(gold())), w, g);
  EXPECT_LT(testsupport::relative_error(g, testsupport::central_difference(m.parameters(), value)), 1e-4);
}

// ---------------------------------------------------------------------------
// Beam search

namespace {

parser_model branching_model() {
  vocabulary src({"<unk>", "x", "y"});
  vocabulary tgt({"<unk>@0", "f@1", "g@2", "x@0"});
  return parser_model(src, tgt, model_config{3, 4, 1.5, 21});
}

// Every sequence of at most `max_len` tokens that stops where decoding would.
void enumerate(const parser_model& m, std::vector<std::size_t>& prefix, long open, std::size_t max_len,
               std::vector<std::vector<std::size_t>>& out) {
  for (std::size_t v = 0; v < m.target_vocab().size(); ++v) {
    prefix.push_back(v);
    const long o = open + m.arity_delta(v);
    if (o <= 0 || prefix.size() == max_len) out.push_back(prefix);
    else enumerate(m, prefix, o, max_len, out);
    prefix.pop_back();
  }
}

double logprob(const parser_model& m, const std::vector<std::size_t>& src, const std::vector<std::size_t>& ids) {
  double s = 0;
  for (double lp : m.forward(src, ids).logp) s += lp;
  return s;
}

}  // namespace

TEST(BeamSearch, ExhaustiveBeamMatchesBruteForce) {
  const auto m = branching_model();
  const std::vector<std::size_t> src{1, 2, 1};
  std::vector<std::vector<std::size_t>> all;
  std::vector<std::size_t> prefix;
  enumerate(m, prefix, 1, 3, all);
  ASSERT_LE(all.size(), 27u * 4u);
  std::vector<double> scores;
  for (const auto& s : all) scores.push_back(logprob(m, src, s));
  std::sort(scores.rbegin(), scores.rend());

  const auto hyps = beam_search_ids(m, src, all.size(), 3);
  ASSERT_EQ(hyps.size(), all.size());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    EXPECT_NEAR(hyps[i].logprob, scores[i], 1e-9) << i;
    EXPECT_NEAR(hyps[i].logprob, logprob(m, src, hyps[i].ids), 1e-9);
  }
  double total = 0;
  for (double s : scores) total += std::exp(s);
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(BeamSearch, WidthOneIsGreedy) {
  const auto m = branching_model();
  const std::vector<std::size_t> src{2, 1};
  const auto enc = m.encode(src);
  std::vector<std::size_t> greedy;
  VectorXd s = enc.init_state;
  Index prev = m.bos();
  long open = 1;
  parser_model::gru_step g;
  parser_model::decoder_step d;
  while (open > 0 && greedy.size() < 10) {
    m.decode_step(enc, prev, s, g, d);
    Index best;
    d.prob.maxCoeff(&best);
    greedy.push_back(static_cast<std::size_t>(best));
    open += m.arity_delta(static_cast<std::size_t>(best));
    s = g.h;
    prev = best;
  }
  EXPECT_EQ(beam_search_ids(m, src, 1, 10).front().ids, greedy);
}

TEST(BeamSearch, TerminatesOnCompleteTrees) {
  const auto m = tiny_model();
  for (const auto& h : beam_search(m, question, 6, 12)) {
    if (!h.complete) {
      EXPECT_EQ(h.query.size(), 12u);
      continue;
    }
    EXPECT_EQ(open_slots(h.query.tokens), 0);
  }
  EXPECT_THROW(beam_search(m, question, 0, 12), std::invalid_argument);
}

TEST(BeamSearch, DecodeIsDeterministic) {
  const auto m = tiny_model();
  EXPECT_EQ(decode(m, question, 4, 20).texts(), decode(m, question, 4, 20).texts());
}

// ---------------------------------------------------------------------------
// Optimizer and training loop

TEST(Optimizer, ClipByGlobalNorm) {
  VectorXd g(2);
  g << 3, 4;
  EXPECT_DOUBLE_EQ(clip_by_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g.norm(), 1.0, 1e-15);
  EXPECT_NEAR(g[0], 0.6, 1e-15);
  VectorXd small(2);
  small << 0.1, 0.2;
  const VectorXd before = small;
  clip_by_global_norm(small, 1.0);
  EXPECT_EQ(small, before);
  EXPECT_THROW(clip_by_global_norm(small, 0.0), std::invalid_argument);
}

TEST(Optimizer, AdadeltaSteps) {
  const double rho = 0.95, eps = 1e-6;
  adadelta opt(rho, eps, 1.0);
  VectorXd theta = VectorXd::Zero(1), g(1);
  g << 2.0;
  double eg2 = 0, edx2 = 0, x = 0;
  for (int step = 0; step < 3; ++step) {
    opt.step(theta, g);
    eg2 = rho * eg2 + (1 - rho) * 4.0;
    const double dx = -std::sqrt(edx2 + eps) / std::sqrt(eg2 + eps) * 2.0;
    edx2 = rho * edx2 + (1 - rho) * dx * dx;
    x += dx;
    EXPECT_NEAR(theta[0], x, 1e-15);
  }
  EXPECT_LT(theta[0], 0.0);
}

TEST(Training, ValidationScheduleAndBestCheckpoint) {
  auto m = tiny_model();
  train_config cfg;
  cfg.minibatch_size = 3;
  cfg.epochs = 5;
  cfg.validation_interval = 5;
  std::vector<std::size_t> validated_at;
  std::size_t calls = 0;
  auto loss = [&](const parser_model& model, std::span<const std::size_t> idx) {
    EXPECT_LE(idx.size(), 3u);
    loss_and_grad r;
    r.grad = VectorXd::Constant(model.num_parameters(), 1.0);
    return r;
  };
  // dev F1 rises once then stays flat so the tie keeps the earlier checkpoint
  const std::vector<double> f1s{0.1, 0.4, 0.4, 0.2, 0.4};
  auto validate = [&](const parser_model&) { return f1s[calls++]; };
  std::size_t refreshes = 0;
  const auto r = run_training(m, 10, cfg, loss, validate, [&](const parser_model&) { ++refreshes; });
  EXPECT_EQ(r.history.updates, 20u);
  EXPECT_EQ(r.history.validation_updates, (std::vector<std::size_t>{0, 5, 10, 15, 20}));
  EXPECT_EQ(r.history.best_update, 5u);
  EXPECT_DOUBLE_EQ(r.history.best_f1, 0.4);
  EXPECT_EQ(refreshes, 5u);
  EXPECT_NE(r.model.parameters(), m.parameters());
}

TEST(Training, UpdateZeroCanWin) {
  auto m = tiny_model();
  train_config cfg;
  cfg.epochs = 2;
  cfg.validation_interval = 1;
  auto loss = [&](const parser_model& model, std::span<const std::size_t>) {
    return loss_and_grad{0.0, VectorXd::Constant(model.num_parameters(), 1.0)};
  };
  const auto r = run_training(m, 4, cfg, loss, [](const parser_model&) { return 0.5; });
  EXPECT_EQ(r.history.best_update, 0u);
  EXPECT_EQ(r.model.parameters(), m.parameters());
}

TEST(Training, PatienceStopsEarly) {
  train_config cfg;
  cfg.minibatch_size = 1;
  cfg.epochs = 100;
  cfg.validation_interval = 2;
  cfg.patience = 3;
  auto loss = [&](const parser_model& model, std::span<const std::size_t>) {
    return loss_and_grad{0.0, VectorXd::Zero(model.num_parameters())};
  };
  const auto r = run_training(tiny_model(), 5, cfg, loss, [](const parser_model&) { return 0.0; });
  EXPECT_EQ(r.history.validation_updates.size(), 4u);
  EXPECT_EQ(r.history.updates, 6u);
}

TEST(Training, RejectsBadConfig) {
  train_config cfg;
  cfg.minibatch_size = 0;
  auto loss = [](const parser_model& m, std::span<const std::size_t>) { return loss_and_grad{0, VectorXd::Zero(m.num_parameters())}; };
  auto val = [](const parser_model&) { return 0.0; };
  EXPECT_THROW(run_training(tiny_model(), 3, cfg, loss, val), std::invalid_argument);
  EXPECT_THROW(run_training(tiny_model(), 0, train_config{}, loss, val), std::invalid_argument);
}

TEST(Training, CrossEntropyDescentFitsTinyData) {
  const auto batch = tiny_batch();
  auto m = tiny_model();
  const double before = cross_entropy_loss(m, batch).loss;
  train_config cfg;
  cfg.minibatch_size = 3;
  cfg.epochs = 300;
  cfg.validation_interval = 300;
  double last = before;
  const auto r = run_training(
      m, batch.size(), cfg,
      [&](const parser_model& model, std::span<const std::size_t> idx) {
        std::vector<parse_example> b;
        for (auto i : idx) b.push_back(batch[i]);
        return cross_entropy_loss(model, b);
      },
      [&](const parser_model& model) {
        last = cross_entropy_loss(model, batch).loss;
        return 1.0 / (1.0 + last);
      });
  EXPECT_LT(last, before * 0.75);
  EXPECT_EQ(r.history.best_update, 300u);
}
