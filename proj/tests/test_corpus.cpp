#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include <semparse/corpus.hpp>
#include <semparse/statements.hpp>

using namespace semparse;

namespace {

const geo_db& toy() {
  static const geo_db db = make_toy_db(7);
  return db;
}

const std::vector<corpus_example>& corpus() {
  static const auto c = generate_corpus(toy(), 2300, 11);
  return c;
}

}  // namespace

TEST(ToyDb, Deterministic) {
  const auto a = make_toy_db(7), b = make_toy_db(7);
  ASSERT_EQ(a.entities().size(), b.entities().size());
  for (std::size_t i = 0; i < a.entities().size(); ++i) {
    EXPECT_EQ(a.entities()[i].pos, b.entities()[i].pos);
    EXPECT_EQ(a.entities()[i].tags, b.entities()[i].tags);
  }
  EXPECT_EQ(a.areas().size(), town_seeds.size());
}

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize_question("How many Hotels are there in Paris?"),
            (std::vector<std::string>{"how", "many", "hotels", "are", "there", "in", "paris", "?"}));
  EXPECT_EQ(tokenize_question("  a,b  "), (std::vector<std::string>{"a", ",", "b"}));
  EXPECT_TRUE(tokenize_question("").empty());
}

TEST(Corpus, DeterministicAndDistinct) {
  EXPECT_EQ(generate_corpus(toy(), 200, 11), std::vector<corpus_example>(corpus().begin(), corpus().begin() + 200));
  EXPECT_NE(generate_corpus(toy(), 50, 12), std::vector<corpus_example>(corpus().begin(), corpus().begin() + 50));
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : corpus()) EXPECT_TRUE(seen.emplace(e.question, serialize_mrl(e.gold)).second) << e.question;
}

TEST(Corpus, RejectsBadRequests) {
  EXPECT_THROW(generate_corpus(toy(), 0, 1), std::invalid_argument);
  EXPECT_THROW(generate_corpus(geo_db{}, 5, 1), std::invalid_argument);
  EXPECT_THROW(split(std::vector<corpus_example>(corpus().begin(), corpus().begin() + 10), split_sizes{}, 1),
               std::invalid_argument);
}

TEST(Corpus, HotelsInParis) {
  const auto gold = parse_mrl("query(area(keyval('name','Paris')),nwr(keyval('tourism','hotel')),qtype(count))");
  const auto big = generate_corpus(toy(), 20000, 3);
  bool found = false;
  for (const auto& e : big)
    if (e.question == "How many hotels are there in Paris?") {
      found = true;
      EXPECT_EQ(e.gold, gold);
    }
  EXPECT_TRUE(found);
}

TEST(Corpus, GoldQueriesAreUsable) {
  std::size_t nonempty = 0;
  std::set<std::string> heads;
  for (const auto& e : corpus()) {
    ASSERT_TRUE(is_valid(e.gold)) << e.question;
    ASSERT_EQ(delinearize(linearize(e.gold)), e.gold);
    ASSERT_FALSE(generate_statements(e.gold, e.question).statements.empty());
    nonempty += !execute(e.gold, toy()).is_empty();
    heads.insert(e.gold.root.children[0].label);
  }
  EXPECT_GT(nonempty, corpus().size() * 3 / 5);
  EXPECT_EQ(heads, (std::set<std::string>{"area", "around", "nwr", "north", "east", "south", "west"}));
}

TEST(Corpus, InventoryIsLarge) {
  EXPECT_EQ(generate_corpus(toy(), 28000, 5).size(), 28000u);
}

TEST(Split, DisjointAndSized) {
  const split_sizes sizes{300, 200, 300, 1500};
  const auto s = split(corpus(), sizes, 5);
  EXPECT_EQ(s.sup.size(), 300u);
  EXPECT_EQ(s.dev.size(), 200u);
  EXPECT_EQ(s.test.size(), 300u);
  EXPECT_EQ(s.log.size(), 1500u);
  std::set<std::string> keys;
  for (const auto* part : {&s.sup, &s.dev, &s.test, &s.log})
    for (const auto& e : *part) EXPECT_TRUE(keys.insert(e.question + '\t' + serialize_mrl(e.gold)).second);
  const auto again = split(corpus(), sizes, 5);
  EXPECT_EQ(again.test, s.test);
  EXPECT_NE(split(corpus(), sizes, 6).test, s.test);
}

TEST(CorpusFile, RoundTrip) {
  std::stringstream io;
  const std::vector<corpus_example> part(corpus().begin(), corpus().begin() + 300);
  write_corpus(io, part);
  EXPECT_EQ(read_corpus(io), part);
  std::istringstream bad("no tab here\n");
  EXPECT_THROW(read_corpus(bad), std::runtime_error);
  std::istringstream bad_mrl("q\tquery(\n");
  EXPECT_THROW(read_corpus(bad_mrl), std::runtime_error);
}
