// semparse: command-line driver for the feedback-learning pipeline.
//
//   semparse gen-corpus        --profile desk --out data
//   semparse train-sup         --db data --corpus data --out base.json
//   semparse make-log          --db data --corpus data --model base.json --out log.jsonl
//   semparse simulate-feedback --corpus data --log log.jsonl --out sim.jsonl
//   semparse serve-feedback    --log log.jsonl --out human.jsonl --journal journal.jsonl
//   semparse train-cf          --db data --corpus data --model base.json --log sim.jsonl --objective DPM+T+OSL --runs 3
//   semparse evaluate          --db data --corpus data --model base.json --out base.eval.json
//   semparse significance      a.eval.json b.eval.json

#include <semparse/feedback_http.hpp>
#include <semparse/pipeline.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace semparse;
using json = nlohmann::ordered_json;

namespace {

struct options {
  std::string profile = "desk";
  std::optional<std::uint64_t> seed;
  std::string db, corpus, log, model, out, journal, replay, split = "test", objective = "DPM+T+OSL";
  std::size_t runs = 1;
  std::size_t rounds = 10000;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::vector<std::string> inputs;
};

std::string require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw std::invalid_argument(flag + " is required");
  return value;
}

std::string existing(const std::string& path, const std::string& flag) {
  require(path, flag);
  if (!fs::exists(path)) throw std::invalid_argument(flag + ": " + path + " does not exist");
  return path;
}

geo_db load_db(const options& o) {
  const fs::path dir = existing(o.db, "--db");
  return load_geo_db((dir / "entities.tsv").string(), (dir / "areas.tsv").string());
}

std::vector<corpus_example> load_split(const options& o, const std::string& name) {
  const fs::path dir = existing(o.corpus, "--corpus");
  return load_corpus(existing((dir / (name + ".tsv")).string(), "--corpus"));
}

void emit(const std::string& table, const json& j, const std::string& report_path = {}) {
  std::cout << table;
  std::cout << j.dump() << '\n';
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw std::runtime_error("cannot write " + report_path);
    out << j.dump(2) << '\n';
  }
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

json scores_json(const prf& s) { return json{{"precision", 100 * s.precision}, {"recall", 100 * s.recall}, {"f1", 100 * s.f1}}; }

// ---------------------------------------------------------------------------

void gen_corpus(const options& o) {
  auto p = profile_named(o.profile);
  if (o.seed) p.corpus_seed = *o.seed;
  const fs::path dir = require(o.out, "--out");
  fs::create_directories(dir);
  const geo_db db = o.db.empty() ? make_toy_db(p.db_seed) : load_db(o);
  const auto corpus = generate_corpus(db, p.sizes.total(), p.corpus_seed);
  const auto s = split(corpus, p.sizes, p.split_seed);
  save_geo_db(db, (dir / "entities.tsv").string(), (dir / "areas.tsv").string());
  save_corpus((dir / "corpus.tsv").string(), corpus);
  save_corpus((dir / "sup.tsv").string(), s.sup);
  save_corpus((dir / "dev.tsv").string(), s.dev);
  save_corpus((dir / "test.tsv").string(), s.test);
  save_corpus((dir / "log.tsv").string(), s.log);

  std::ostringstream t;
  t << "profile " << p.name << ", corpus seed " << p.corpus_seed << ", " << db.entities().size() << " entities, "
    << db.areas().size() << " areas\n";
  t << "split  size\nsup    " << s.sup.size() << "\ndev    " << s.dev.size() << "\ntest   " << s.test.size()
    << "\nlog    " << s.log.size() << "\n";
  emit(t.str(), json{{"command", "gen-corpus"},
                     {"profile", p.name},
                     {"corpus_seed", p.corpus_seed},
                     {"out", dir.string()},
                     {"sizes", {{"sup", s.sup.size()}, {"dev", s.dev.size()}, {"test", s.test.size()}, {"log", s.log.size()}}}});
}

void train_sup(const options& o) {
  auto p = profile_named(o.profile);
  if (o.seed) {
    p.model.seed = *o.seed;
    p.supervised.seed = *o.seed;
  }
  const auto db = load_db(o);
  const auto sup = load_split(o, "sup");
  const auto dev = eval_set::from(load_split(o, "dev"), db);
  const auto test = eval_set::from(load_split(o, "test"), db);
  const auto out = require(o.out, "--out");
  auto r = train_supervised(to_parse_examples(sup), dev, db, p.supervised, p.model);
  r.model.save(out);
  const auto ev = evaluate(r.model, test, db, p.supervised.beam_size, p.supervised.max_output_length);

  std::ostringstream t;
  t << "parameters " << r.model.num_parameters() << ", " << r.history.updates << " updates, best dev F1 "
    << fixed(100 * r.history.best_f1) << " at update " << r.history.best_update << "\n";
  t << "split  P      R      F1\ntest   " << fixed(100 * ev.scores.precision) << "  " << fixed(100 * ev.scores.recall)
    << "  " << fixed(100 * ev.scores.f1) << "\n";
  emit(t.str(), json{{"command", "train-sup"},
                     {"model", out},
                     {"parameters", r.model.num_parameters()},
                     {"updates", r.history.updates},
                     {"best_update", r.history.best_update},
                     {"dev_f1", 100 * r.history.best_f1},
                     {"test", scores_json(ev.scores)}});
}

void make_log(const options& o) {
  const auto p = profile_named(o.profile);
  const auto model = parser_model::load(existing(o.model, "--model"));
  const auto examples = load_split(o, "log");
  const auto out = require(o.out, "--out");
  const auto log = create_log(model, questions_of(examples), p.feedback.beam_size, p.feedback.max_output_length);
  save_log(out, log.records);
  std::ostringstream t;
  t << "questions " << examples.size() << ", logged " << log.records.size() << ", dropped (invalid) " << log.dropped
    << "\n";
  emit(t.str(), json{{"command", "make-log"}, {"log", out}, {"questions", examples.size()}, {"records", log.records.size()}, {"dropped", log.dropped}});
}

void simulate(const options& o) {
  const auto examples = load_split(o, "log");
  std::map<std::string, const corpus_example*> gold;
  for (const auto& e : examples) gold.emplace(e.question, &e);
  auto log = load_log(existing(o.log, "--log"));
  const auto out = require(o.out, "--out");
  std::size_t correct = 0;
  for (auto& r : log) {
    auto it = gold.find(r.question);
    if (it == gold.end()) throw std::runtime_error("no gold query for logged question: " + r.question);
    r = simulate_feedback(std::move(r), linearize(it->second->gold));
    correct += static_cast<std::size_t>(r.seq_reward);
  }
  save_log(out, log);
  const double pct = log.empty() ? 0 : 100.0 * static_cast<double>(correct) / static_cast<double>(log.size());
  std::ostringstream t;
  t << "records " << log.size() << ", fully correct " << correct << " (" << fixed(pct) << "%)\n";
  emit(t.str(), json{{"command", "simulate-feedback"}, {"log", out}, {"records", log.size()}, {"fully_correct", correct}});
}

httplib::Server* running_server = nullptr;

void serve(const options& o) {
  const auto logged = load_log(existing(o.log, "--log"));
  feedback_service svc(logged);
  if (!o.replay.empty()) {
    std::ifstream in(existing(o.replay, "--replay"));
    svc.replay(read_journal(in));
    const auto out = require(o.out, "--out");
    save_log(out, svc.records());
    const auto pr = svc.progress();
    std::ostringstream t;
    t << "replayed " << pr.submitted << " submissions, " << pr.pending << " pending\n";
    emit(t.str(), json{{"command", "serve-feedback"}, {"replay", o.replay}, {"out", out}, {"progress", to_json(pr)}});
    return;
  }
  std::ofstream records, journal;
  if (!o.out.empty()) {
    records.open(o.out, std::ios::app);
    if (!records) throw std::runtime_error("cannot append to " + o.out);
    svc.set_record_sink(&records);
  }
  if (!o.journal.empty()) {
    journal.open(o.journal, std::ios::app);
    if (!journal) throw std::runtime_error("cannot append to " + o.journal);
    svc.set_journal_sink(&journal);
  }
  httplib::Server server;
  register_feedback_routes(server, svc);
  running_server = &server;
  std::signal(SIGINT, [](int) {
    if (running_server) running_server->stop();
  });
  std::cerr << "serving " << svc.size() << " forms on http://" << o.host << ':' << o.port << "\n";
  if (!server.listen(o.host, o.port)) throw std::runtime_error("cannot listen on port " + std::to_string(o.port));
  running_server = nullptr;
  const auto pr = svc.progress();
  emit("submitted " + std::to_string(pr.submitted) + ", pending " + std::to_string(pr.pending) + "\n",
       json{{"command", "serve-feedback"}, {"progress", to_json(pr)}});
}

void train_cf(const options& o) {
  const auto p = profile_named(o.profile);
  const std::string name = o.objective;
  if (name != "baseline") objective_from_string(name);
  if (o.runs < 1) throw std::invalid_argument("--runs must be at least 1");
  const auto db = load_db(o);
  const auto dev = eval_set::from(load_split(o, "dev"), db);
  const auto test = eval_set::from(load_split(o, "test"), db);
  const auto base = parser_model::load(existing(o.model, "--model"));
  const auto& cfg0 = p.feedback;
  const double base_f1 = 100 * evaluate(base, test, db, cfg0.beam_size, cfg0.max_output_length).scores.f1;

  std::vector<double> f1;
  json runs = json::array();
  if (name == "baseline") {
    f1.assign(o.runs, base_f1);
  } else {
    const auto log = load_log(existing(o.log, "--log"));
    const auto obj = objective_from_string(name);
    const std::uint64_t seed0 = o.seed.value_or(1);
    for (std::size_t k = 0; k < o.runs; ++k) {
      auto cfg = cfg0;
      cfg.seed = seed0 + k;
      auto r = train_counterfactual(base, log, obj, dev, db, cfg);
      f1.push_back(100 * evaluate(r.run.model, test, db, cfg.beam_size, cfg.max_output_length).scores.f1);
      std::string ckpt;
      if (!o.out.empty()) {
        fs::create_directories(o.out);
        ckpt = (fs::path(o.out) / (name + "-seed" + std::to_string(cfg.seed) + ".json")).string();
        r.run.model.save(ckpt);
      }
      runs.push_back(json{{"seed", cfg.seed},
                          {"test_f1", f1.back()},
                          {"best_update", r.run.history.best_update},
                          {"dev_f1", 100 * r.run.history.best_f1},
                          {"checkpoint", ckpt}});
    }
  }
  const auto s = summarize(f1);
  std::ostringstream t;
  t << std::left << std::setw(12) << "system" << std::setw(6) << "runs" << std::setw(18) << "test F1" << "delta\n";
  t << std::setw(12) << "baseline" << std::setw(6) << "-" << std::setw(18) << fixed(base_f1) << "\n";
  t << std::setw(12) << name << std::setw(6) << f1.size() << std::setw(18) << (fixed(s.mean) + " +- " + fixed(s.sd))
    << (s.mean >= base_f1 ? "+" : "") << fixed(s.mean - base_f1) << "\n";
  emit(t.str(), json{{"command", "train-cf"},
                     {"objective", name},
                     {"baseline_f1", base_f1},
                     {"mean_f1", s.mean},
                     {"stddev_f1", s.sd},
                     {"delta_f1", s.mean - base_f1},
                     {"runs", runs}});
}

void evaluate_cmd(const options& o) {
  const auto p = profile_named(o.profile);
  const auto db = load_db(o);
  if (o.split != "dev" && o.split != "test") throw std::invalid_argument("--split must be dev or test");
  const auto set = eval_set::from(load_split(o, o.split), db);
  const auto model = parser_model::load(existing(o.model, "--model"));
  const auto ev = evaluate(model, set, db, p.feedback.beam_size, p.feedback.max_output_length);
  json items = json::array();
  for (const auto& it : ev.items) items.push_back(json{{"correct", it.correct ? 1 : 0}, {"nonempty", it.nonempty ? 1 : 0}});
  std::ostringstream t;
  t << "split  n     P      R      F1\n"
    << std::left << std::setw(7) << o.split << std::setw(6) << set.size() << fixed(100 * ev.scores.precision) << "  "
    << fixed(100 * ev.scores.recall) << "  " << fixed(100 * ev.scores.f1) << "\n";
  json j{{"command", "evaluate"}, {"model", o.model}, {"split", o.split}, {"n", set.size()}, {"scores", scores_json(ev.scores)}};
  if (!o.out.empty()) {
    json full = j;
    full["items"] = items;
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot write " + o.out);
    out << full.dump() << '\n';
  }
  emit(t.str(), j);
}

std::vector<outcome> read_items(const std::string& path) {
  std::ifstream in(existing(path, "evaluation file"));
  const auto j = nlohmann::json::parse(in);
  std::vector<outcome> out;
  for (const auto& it : j.at("items")) out.push_back({it.at("correct").get<int>() != 0, it.at("nonempty").get<int>() != 0});
  return out;
}

void significance(const options& o) {
  if (o.inputs.size() != 2) throw std::invalid_argument("significance needs two evaluation files");
  const auto a = read_items(o.inputs[0]);
  const auto b = read_items(o.inputs[1]);
  const auto seed = o.seed.value_or(1);
  const double pv = approx_randomization_test(a, b, o.rounds, seed);
  const double fa = 100 * corpus_f1(a).f1, fb = 100 * corpus_f1(b).f1;
  std::ostringstream t;
  t << "system A F1 " << fixed(fa) << ", system B F1 " << fixed(fb) << ", p = " << fixed(pv, 4) << " (" << o.rounds
    << " rounds)\n";
  emit(t.str(), json{{"command", "significance"}, {"a", o.inputs[0]}, {"b", o.inputs[1]}, {"f1_a", fa}, {"f1_b", fb}, {"rounds", o.rounds}, {"seed", seed}, {"p_value", pv}},
       o.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual learning from bandit feedback for semantic parsing"};
  app.require_subcommand(1);
  options o;

  auto profile = [&](CLI::App* c) { c->add_option("--profile", o.profile, "desk, full or smoke")->capture_default_str(); };
  auto seed = [&](CLI::App* c, const char* what) { c->add_option("--seed", o.seed, what); };
  auto path = [&](CLI::App* c, const char* flag, std::string& v, const char* what) { c->add_option(flag, v, what); };

  auto* gen = app.add_subcommand("gen-corpus", "generate the toy database, corpus and splits");
  profile(gen);
  seed(gen, "corpus seed");
  path(gen, "--db", o.db, "existing database directory (default: toy database)");
  path(gen, "--out", o.out, "output directory");

  auto* sup = app.add_subcommand("train-sup", "train the supervised baseline");
  profile(sup);
  seed(sup, "initialization and shuffling seed");
  path(sup, "--db", o.db, "database directory");
  path(sup, "--corpus", o.corpus, "split directory");
  path(sup, "--out", o.out, "checkpoint to write");

  auto* mlog = app.add_subcommand("make-log", "parse the log questions with the baseline");
  profile(mlog);
  path(mlog, "--db", o.db, "database directory");
  path(mlog, "--corpus", o.corpus, "split directory");
  path(mlog, "--model", o.model, "logging model checkpoint");
  path(mlog, "--out", o.out, "feedback log to write");

  auto* sim = app.add_subcommand("simulate-feedback", "attach simulated rewards from gold queries");
  path(sim, "--corpus", o.corpus, "split directory");
  path(sim, "--log", o.log, "feedback log to read");
  path(sim, "--out", o.out, "feedback log to write");

  auto* srv = app.add_subcommand("serve-feedback", "serve statement forms over HTTP");
  path(srv, "--log", o.log, "logged outputs to collect feedback for");
  path(srv, "--out", o.out, "feedback records (appended)");
  path(srv, "--journal", o.journal, "serve/submit journal (appended)");
  path(srv, "--replay", o.replay, "replay a journal instead of serving");
  srv->add_option("--port", o.port, "port")->capture_default_str();
  srv->add_option("--host", o.host, "bind address")->capture_default_str();

  auto* cf = app.add_subcommand("train-cf", "learn from a feedback log");
  profile(cf);
  seed(cf, "seed of the first run");
  path(cf, "--db", o.db, "database directory");
  path(cf, "--corpus", o.corpus, "split directory");
  path(cf, "--model", o.model, "warm-start checkpoint");
  path(cf, "--log", o.log, "feedback log");
  cf->add_option("--objective", o.objective, "baseline, B2S, DPM, DPM+OSL, DPM+T or DPM+T+OSL")->capture_default_str();
  cf->add_option("--runs", o.runs, "number of runs")->capture_default_str();
  path(cf, "--out", o.out, "checkpoint directory");

  auto* ev = app.add_subcommand("evaluate", "answer precision, recall and F1");
  profile(ev);
  path(ev, "--db", o.db, "database directory");
  path(ev, "--corpus", o.corpus, "split directory");
  path(ev, "--model", o.model, "checkpoint");
  ev->add_option("--split", o.split, "dev or test")->capture_default_str();
  path(ev, "--out", o.out, "per-item results for significance testing");

  auto* sig = app.add_subcommand("significance", "approximate randomization test between two evaluations");
  sig->add_option("evaluations", o.inputs, "two files written by evaluate --out")->required()->expected(2);
  sig->add_option("--rounds", o.rounds, "shuffles")->capture_default_str();
  seed(sig, "shuffle seed");
  path(sig, "--out", o.out, "report file");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) gen_corpus(o);
    else if (*sup) train_sup(o);
    else if (*mlog) make_log(o);
    else if (*sim) simulate(o);
    else if (*srv) serve(o);
    else if (*cf) train_cf(o);
    else if (*ev) evaluate_cmd(o);
    else if (*sig) significance(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
