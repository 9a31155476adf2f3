#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include <semparse/mrl.hpp>

namespace testsupport {

using semparse::node;
using semparse::query_ast;

// Own copy of the operator table so generated trees do not depend on the
// library's grammar definition.
struct shape {
  int lo, hi;
  enum { ops, strings, none } args;
  std::vector<std::string> pool;
  std::vector<std::string> last;
};

inline const std::map<std::string, shape>& shapes() {
  static const std::map<std::string, shape> s = [] {
    const std::vector<std::string> tags{"keyval", "and", "or"};
    const std::vector<std::string> region{"area", "nwr"};
    std::map<std::string, shape> m{
        {"query", {2, 3, shape::ops, {"area", "nwr", "around", "north", "east", "south", "west"}, {"qtype"}}},
        {"area", {1, 2, shape::ops, tags, {}}},
        {"nwr", {1, 2, shape::ops, tags, {}}},
        {"search", {1, 1, shape::ops, {"nwr"}, {}}},
        {"center", {1, 2, shape::ops, region, {}}},
        {"around", {3, 4, shape::ops, {"center", "search", "maxdist", "topx"}, {}}},
        {"keyval", {2, 2, shape::strings, {}, {}}},
        {"qtype", {1, 3, shape::ops, {"count", "latlong", "least", "findkey"}, {}}},
        {"count", {0, 0, shape::none, {}, {}}},
        {"latlong", {0, 0, shape::none, {}, {}}},
        {"findkey", {1, 1, shape::strings, {}, {}}},
        {"least", {1, 1, shape::ops, {"topx"}, {}}},
        {"topx", {1, 1, shape::strings, {}, {}}},
        {"maxdist", {1, 1, shape::strings, {}, {}}},
        {"and", {2, 3, shape::ops, tags, {}}},
        {"or", {2, 3, shape::ops, tags, {}}},
    };
    for (const char* c : {"north", "east", "south", "west"}) m[c] = {2, 2, shape::ops, region, {}};
    return m;
  }();
  return s;
}

struct leaf_style {
  // Characters that may appear in generated leaf text. Leaves are never empty.
  std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _.-'\\(),";
  bool allow_unicode = true;
};

class ast_generator {
 public:
  explicit ast_generator(std::uint64_t seed, leaf_style style = {}) : rng_(seed), style_(std::move(style)) {}

  query_ast next() { return query_ast{build("query", 0)}; }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  std::string text() {
    static const std::vector<std::string> common{"name", "amenity", "Paris", "railway", "station", "count",
                                                 "query", "1", "DIST_INTOWN", "Mc'Donald's", "a b", "x\\y"};
    if (coin(0.3)) return common[pick(common.size())];
    const std::size_t len = 1 + pick(8);
    std::string s;
    for (std::size_t i = 0; i < len; ++i) {
      if (style_.allow_unicode && coin(0.05)) {
        s += "\xC3\xA9";  // e-acute
        continue;
      }
      s.push_back(style_.alphabet[pick(style_.alphabet.size())]);
    }
    return s;
  }

  std::string literal(const std::string& op) {
    if (op == "topx") {
      static const std::vector<std::string> k{"1", "1", "2", "3", "10"};
      return k[pick(k.size())];
    }
    static const std::vector<std::string> d{"DIST_INTOWN", "DIST_OUTTOWN", "500", "1000.5"};
    return d[pick(d.size())];
  }

  node build(const std::string& op, int depth) {
    const shape& s = shapes().at(op);
    node n = node::func(op);
    const int arity = s.lo + static_cast<int>(pick(static_cast<std::size_t>(s.hi - s.lo + 1)));
    for (int i = 0; i < arity; ++i) {
      if (s.args == shape::strings) {
        n.children.push_back(node::leaf(op == "topx" || op == "maxdist" ? (coin(0.9) ? literal(op) : text()) : text()));
        continue;
      }
      const auto& pool = (i + 1 == arity && !s.last.empty()) ? s.last : s.pool;
      std::string child = pool[pick(pool.size())];
      if (depth >= 3 && (child == "and" || child == "or")) child = "keyval";
      n.children.push_back(build(child, depth + 1));
    }
    return n;
  }

  std::mt19937_64 rng_;
  leaf_style style_;
};

}  // namespace testsupport
