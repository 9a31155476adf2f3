// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on failure.
//   acceptance            run everything
//   acceptance 3 7        run only the listed criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <map>
#include <set>
#include <sstream>

#include <semparse/feedback_service.hpp>
#include <semparse/pipeline.hpp>

#include "support/finite_difference.hpp"
#include "support/random_ast.hpp"
#include "support/random_query.hpp"
#include "support/reference_interpreter.hpp"
#include "support/trigger_oracle.hpp"

using namespace semparse;

namespace {

struct check_failed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw check_failed(what);
}

std::string num(double x, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << x;
  return s.str();
}

feedback_record record(const std::string& q, const std::string& tokens, int seq, std::vector<int> tok) {
  feedback_record r;
  r.question = q;
  r.tokens = linear_query::from_string(tokens);
  r.seq_reward = seq;
  r.token_rewards = std::move(tok);
  for (std::size_t j = 0; j < r.tokens.size(); ++j) r.covered.push_back(j);
  return r;
}

parser_model small_model(std::uint64_t seed) {
  vocabulary src({"<unk>", "bars", "how", "many", "paris"});
  vocabulary tgt({"<unk>@0", "query@2", "nwr@1", "keyval@2", "amenity@0", "bar@s", "qtype@1", "count@0"});
  return parser_model(src, tgt, model_config{2, 1, 1.0, seed});
}

std::vector<feedback_record> small_log() {
  return {record("how many bars", "query@2 nwr@1 keyval@2 amenity@0 bar@s qtype@1 count@0", 1, {1, 1, 1, 1, 1, 1, 1}),
          record("bars paris", "query@2 nwr@1 qtype@1 count@0", 0, {1, 1, 0, 0}),
          record("many paris", "nwr@1 count@0", 0, {0, 1}),
          record("how many", "query@2 keyval@2 amenity@0", 1, {1, 1, 1}),
          record("paris", "count@0", 0, {0})};
}

std::string estimator_identities() {
  double worst = 0;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto m = small_model(seed);
    const auto log = small_log();
    const double osl = objective_dpm_osl(m, log, refresh_osl(m, log)).value;
    const double ratio = objective_dpm_r(m, log).value;
    worst = std::max(worst, std::abs(osl - ratio) / std::abs(ratio));
  }
  require(worst <= 1e-12, "reweighting vs ratio estimator relative gap " + num(worst));

  const auto m = small_model(6);
  for (auto r : small_log()) {
    std::fill(r.token_rewards.begin(), r.token_rewards.end(), 1);
    const std::vector<feedback_record> one{r};
    const std::vector<parse_example> ex{{tokenize_question(r.question), r.tokens}};
    const auto t = objective_dpm_t(m, one);
    const auto ce = cross_entropy_loss(m, ex);
    require(t.value == -ce.loss && t.grad == -ce.grad, "token-level objective with all-ones rewards differs from -CE");
  }
  return "max relative gap " + num(worst, 3) + ", all-ones token objective == -log-likelihood exactly";
}

std::string gradients() {
  const auto start = std::chrono::steady_clock::now();
  auto m = small_model(7);
  require(m.num_parameters() <= 100, "model too large");
  const auto log = small_log();
  const osl_state osl{m.parameters(), 0.05};
  double worst = 0;
  for (const std::string name : {"CE", "DPM", "DPM+OSL", "DPM+T", "DPM+T+OSL"}) {
    auto eval = [&]() -> objective_value {
      if (name == "CE") {
        std::vector<parse_example> ex;
        for (const auto& r : log) ex.push_back({tokenize_question(r.question), r.tokens});
        auto l = cross_entropy_loss(m, ex);
        return {l.loss, l.grad};
      }
      if (name == "DPM") return objective_dpm(m, log);
      if (name == "DPM+OSL") return objective_dpm_osl(m, log, osl);
      if (name == "DPM+T") return objective_dpm_t(m, log);
      return objective_dpm_t_osl(m, log, osl);
    };
    const auto analytic = eval().grad;
    const auto fd = testsupport::central_difference(m.parameters(), [&] { return eval().value; });
    const double err = testsupport::relative_error(analytic, fd);
    require(analytic.norm() > 0 && err < 1e-4, name + " relative error " + num(err));
    worst = std::max(worst, err);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  require(secs < 60, "took " + num(secs) + " s");
  return std::to_string(m.num_parameters()) + " parameters, max relative error " + num(worst, 3) + ", " +
         num(secs, 3) + " s";
}

std::string round_trips() {
  testsupport::ast_generator gen(2024);
  for (int i = 0; i < 10000; ++i) {
    const auto ast = gen.next();
    const auto text = serialize_mrl(ast);
    require(delinearize(linearize(ast)) == ast, "linearization round trip: " + text);
    require(parse_mrl(text) == ast, "text round trip: " + text);
  }
  return "10000 random trees";
}

std::string statements() {
  testsupport::ast_generator gen(99);
  for (int i = 0; i < 1000; ++i) {
    const auto ast = gen.next();
    require(testsupport::as_expected(generate_statements(ast)) == testsupport::oracle_statements(linearize(ast)),
            "trigger mismatch: " + serialize_mrl(ast));
  }
  const auto b = generate_statements(
      parse_mrl("query(west(area(keyval('name','Paris')),nwr(keyval('railway','station'))),qtype(count))"));
  std::multimap<statement_type, std::vector<payload_item>> got;
  for (const auto& s : b.statements) got.emplace(s.stype, s.payload);
  const decltype(got) want{{statement_type::town, {{"name", "Paris"}}},
                           {statement_type::poi, {{"railway", "station"}}},
                           {statement_type::question_type, {{"count", ""}}},
                           {statement_type::cardinal_direction, {{"", "west"}}}};
  require(got == want, "west example statements differ");
  return "1000 random trees match the oracle; west example gives Town, POI, QuestionType, CardinalDirection";
}

std::string executor() {
  const auto fixture = load_geo_db(SEMPARSE_FIXTURES "/geo/entities.tsv", SEMPARSE_FIXTURES "/geo/areas.tsv");
  const auto toy = make_toy_db(7);
  int non_empty = 0;
  for (const auto* db : {&fixture, &toy}) {
    testsupport::query_generator gen(*db, db == &fixture ? 1 : 2);
    const testsupport::reference_interpreter ref(*db);
    for (int i = 0; i < 1000; ++i) {
      const auto q = gen.next();
      const auto got = execute(q, *db);
      require(got == ref.run(q), serialize_mrl(q) + " gave " + got.to_string());
      non_empty += !got.is_empty();
    }
  }
  return "2 x 1000 random queries agree, " + std::to_string(non_empty) + " non-empty";
}

std::string metrics() {
  const std::vector<outcome> o{{true, true}, {true, true}, {false, true}, {}};
  const auto f = corpus_f1(o);
  require(std::abs(f.precision - 2.0 / 3) < 1e-15 && std::abs(f.recall - 0.5) < 1e-15, "P/R fixture");
  require(std::abs(f.f1 - 4.0 / 7) < 1e-15, "F1 " + num(f.f1, 17));

  std::mt19937 rng(1);
  std::vector<int> a(50);
  for (auto& x : a) x = static_cast<int>(rng() % 2);
  const double same = approx_randomization_test(a, a, 10000, 3);
  require(same == 1.0, "identical systems p " + num(same));

  const std::vector<int> right(20, 1), wrong(20, 0);
  const double p = approx_randomization_test(right, wrong, 10000, 42);
  require(p < 0.05, "all-correct vs all-wrong p " + num(p));
  return "F1 " + num(f.f1, 10) + ", identical p = 1, all-correct vs all-wrong p = " + num(p, 4);
}

std::string trend() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<objective> systems{objective::b2s, objective::dpm, objective::dpm_t, objective::dpm_t_osl};
  const auto r = run_trend(desk_profile(), systems, {1, 2, 3}, [](const std::string& s) { std::cerr << "  " << s << "\n"; });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double b2s = r.system("B2S").summary().mean, dpm = r.system("DPM").summary().mean;
  const double t = r.system("DPM+T").summary().mean, tosl = r.system("DPM+T+OSL").summary().mean;
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << "baseline " << r.baseline_f1 << ", B2S " << b2s << ", DPM " << dpm
    << ", DPM+T " << t << ", DPM+T+OSL " << tosl << " (mean test F1 over 3 seeds, " << std::setprecision(0) << secs
    << " s)";
  require(tosl >= r.baseline_f1 + 2.0, "DPM+T+OSL below baseline + 2: " + s.str());
  require(tosl >= t && t >= dpm, "ordering DPM+T+OSL >= DPM+T >= DPM violated: " + s.str());
  require(tosl >= b2s, "DPM+T+OSL below B2S: " + s.str());
  require(secs < 1800, "took longer than 30 min: " + s.str());
  return s.str();
}

marking random_marking(const form_session& f, std::mt19937& rng) {
  marking m;
  for (std::size_t i = 0; i < f.block.statements.size(); ++i)
    m.verdicts.push_back({i, rng() % 4 == 0 ? verdict::no : verdict::yes});
  return m;
}

std::string feedback_service_checks() {
  std::ifstream in(SEMPARSE_FIXTURES "/logs/human_sample.jsonl");
  auto outputs = read_log(in);
  outputs.resize(40);

  double now = 0;
  std::mt19937 rng(5);
  std::ostringstream records_out, journal_out;
  feedback_service svc(outputs, [&] { return now; });
  svc.set_record_sink(&records_out);
  svc.set_journal_sink(&journal_out);
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto f = svc.serve_form(std::to_string(i + 1));
    now += 2.5 + rng() % 40;
    if (i % 7 != 3) svc.submit_marking(f.form_id, random_marking(f, rng));
  }
  std::istringstream journal_in(journal_out.str());
  std::ostringstream replayed;
  feedback_service again(outputs, [] { return 1e9; });
  again.set_record_sink(&replayed);
  again.replay(read_journal(journal_in));
  require(!records_out.str().empty() && replayed.str() == records_out.str(), "replayed records differ");

  const auto first = svc.records().front();
  bool rejected = false;
  try {
    svc.submit_marking("1", random_marking(svc.form("1"), rng));
  } catch (const service_error& e) {
    rejected = e.status() == 409;
  }
  require(rejected && svc.records().front() == first, "duplicate submission accepted");

  double t = 0;
  feedback_service timed(outputs, [&] { return t; });
  const auto a = timed.serve_form("1");
  const auto b = timed.serve_form("2");
  t = 10;
  timed.submit_marking("1", random_marking(a, rng));
  t = 20;
  timed.submit_marking("2", random_marking(b, rng));
  const auto p = timed.progress();
  require(p.mean_timing && *p.mean_timing == 15.0 && p.stddev_timing && *p.stddev_timing == 5.0,
          "timing statistics " + num(p.mean_timing.value_or(-1)) + " / " + num(p.stddev_timing.value_or(-1)));
  return std::to_string(svc.records().size()) + " records replayed byte-for-byte, duplicate rejected with 409, timing 15.0 +- 5.0";
}

struct criterion {
  int id;
  const char* name;
  std::string (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<criterion> all{{1, "estimator identities", estimator_identities},
                                   {2, "gradients vs finite differences", gradients},
                                   {3, "round trips", round_trips},
                                   {4, "statements", statements},
                                   {5, "executor vs reference", executor},
                                   {6, "metrics", metrics},
                                   {7, "learning trend", trend},
                                   {8, "feedback service", feedback_service_checks}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::string detail;
    bool ok = false;
    try {
      detail = c.run();
      ok = true;
    } catch (const std::exception& e) {
      detail = e.what();
    }
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.name << ": " << detail << std::endl;
  }
  return failed ? 1 : 0;
}
