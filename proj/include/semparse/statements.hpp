// Human-readable statement blocks for queries, and the mapping of per-statement
// Yes/No verdicts back onto query tokens.

#ifndef SEMPARSE_STATEMENTS_HPP
#define SEMPARSE_STATEMENTS_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <semparse/mrl.hpp>
#include <semparse/tag_descriptions.hpp>

namespace semparse {

enum class statement_type {
  town,
  reference_point,
  poi,
  question_type,
  proximity_around_near,
  restriction_closest,
  distance,
  cardinal_direction
};

inline constexpr std::array<statement_type, 8> all_statement_types{
    statement_type::town,          statement_type::reference_point,       statement_type::poi,
    statement_type::question_type, statement_type::proximity_around_near, statement_type::restriction_closest,
    statement_type::distance,      statement_type::cardinal_direction};

inline std::string_view to_string(statement_type t) {
  switch (t) {
    case statement_type::town: return "Town";
    case statement_type::reference_point: return "ReferencePoint";
    case statement_type::poi: return "POI";
    case statement_type::question_type: return "QuestionType";
    case statement_type::proximity_around_near: return "ProximityAroundNear";
    case statement_type::restriction_closest: return "RestrictionClosest";
    case statement_type::distance: return "Distance";
    case statement_type::cardinal_direction: return "CardinalDirection";
  }
  return "";
}

inline statement_type statement_type_from_string(std::string_view s) {
  for (auto t : all_statement_types)
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown statement type: " + std::string(s));
}

// A tag (key, value) or, with an empty key, a literal value.
struct payload_item {
  std::string key;
  std::string value;
  bool is_literal() const noexcept { return key.empty(); }
  bool operator==(const payload_item&) const = default;
};

struct statement {
  statement_type stype;
  std::string display_text;
  std::vector<payload_item> payload;
  std::vector<std::size_t> token_span;  // sorted indices into the linearized query
};

struct statement_block {
  std::string question;
  std::vector<statement> statements;
  linear_query query;
};

enum class verdict { yes, no };

struct marking {
  struct entry {
    std::size_t statement_index;
    verdict value;
  };
  std::vector<entry> verdicts;
};

struct token_rewards {
  std::vector<int> token;       // one 0/1 reward per query token
  int sequence = 0;             // 1 iff every statement is marked yes
  std::vector<std::size_t> covered;  // token indices that belong to some statement
};

namespace detail {

// Pre-order view of an AST: for each node, its token index and parent.
struct flat_node {
  const node* n;
  std::size_t index;
  long parent;  // index into the flat vector, -1 for the root
};

inline void flatten(const node& n, long parent, std::vector<flat_node>& out) {
  const long self = static_cast<long>(out.size());
  out.push_back(flat_node{&n, out.size(), parent});
  for (const auto& c : n.children) flatten(c, self, out);
}

inline std::size_t subtree_end(const std::vector<flat_node>& flat, std::size_t i) {
  return i + flat[i].n->size();
}

// Key and value leaf indices (and tag payload) of all keyvals within [begin, end).
inline void collect_tags(const std::vector<flat_node>& flat, std::size_t begin, std::size_t end,
                         std::vector<std::size_t>& span, std::vector<payload_item>& payload) {
  for (std::size_t i = begin; i < end; ++i) {
    if (!flat[i].n->is("keyval")) continue;
    const node& kv = *flat[i].n;
    span.push_back(i + 1);
    span.push_back(i + 2);
    payload.push_back({kv.children[0].label, kv.children[1].label});
  }
}

inline std::string join_tags(const std::vector<payload_item>& payload) {
  std::string s;
  for (std::size_t i = 0; i < payload.size(); ++i) {
    if (i) s += ", ";
    s += payload[i].key + " : " + payload[i].value;
  }
  return s;
}

inline std::string distance_text(std::string_view d) {
  if (d == "DIST_INTOWN") return "Within walking distance (" + std::string(d) + ")";
  if (d == "DIST_OUTTOWN") return "Within driving distance (" + std::string(d) + ")";
  return "Within " + std::string(d) + " metres";
}

inline std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace detail

// One statement per fired trigger, ordered by statement type and then by
// position of the trigger in the query.
inline statement_block generate_statements(const query_ast& ast, std::string question = {}) {
  validate(ast);
  std::vector<detail::flat_node> flat;
  detail::flatten(ast.root, -1, flat);
  const bool has_center = std::any_of(flat.begin(), flat.end(), [](const auto& f) { return f.n->is("center"); });

  std::vector<statement> out;
  auto add = [&](statement_type t, std::string text, std::vector<payload_item> payload, std::vector<std::size_t> span) {
    std::sort(span.begin(), span.end());
    span.erase(std::unique(span.begin(), span.end()), span.end());
    out.push_back(statement{t, std::move(text), std::move(payload), std::move(span)});
  };
  auto parent_is = [&](std::size_t i, std::string_view op) {
    return flat[i].parent >= 0 && flat[static_cast<std::size_t>(flat[i].parent)].n->is(op);
  };

  for (std::size_t i = 0; i < flat.size(); ++i) {
    const node& n = *flat[i].n;
    if (!n.is("area")) continue;
    std::vector<std::size_t> span{i};
    std::vector<payload_item> payload;
    detail::collect_tags(flat, i + 1, detail::subtree_end(flat, i), span, payload);
    std::string names;
    for (const auto& p : payload) names += (names.empty() ? "" : ", ") + p.value;
    add(statement_type::town, "Town: " + names, std::move(payload), std::move(span));
  }

  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (!flat[i].n->is("center")) continue;
    std::vector<std::size_t> span{i};
    std::vector<payload_item> payload;
    for (std::size_t j = i + 1; j < detail::subtree_end(flat, i); ++j) {
      if (!flat[j].n->is("nwr") || flat[j].parent != static_cast<long>(i)) continue;
      span.push_back(j);
      detail::collect_tags(flat, j + 1, detail::subtree_end(flat, j), span, payload);
    }
    std::string text = payload.empty() ? "Reference Point: the town centre" : "Reference Point: " + detail::join_tags(payload);
    if (payload.empty()) payload.push_back({"", "town centre"});
    add(statement_type::reference_point, std::move(text), std::move(payload), std::move(span));
  }

  for (std::size_t i = 0; i < flat.size(); ++i) {
    const node& n = *flat[i].n;
    std::vector<std::size_t> span{i};
    std::vector<payload_item> payload;
    if (has_center && n.is("search")) {
      for (std::size_t j = i + 1; j < detail::subtree_end(flat, i); ++j)
        if (flat[j].n->is("nwr")) span.push_back(j);
      detail::collect_tags(flat, i + 1, detail::subtree_end(flat, i), span, payload);
    } else if (!has_center && n.is("nwr")) {
      if (parent_is(i, "search")) span.push_back(static_cast<std::size_t>(flat[i].parent));
      detail::collect_tags(flat, i + 1, detail::subtree_end(flat, i), span, payload);
    } else {
      continue;
    }
    std::string text = "POI(s): " + detail::join_tags(payload);
    add(statement_type::poi, std::move(text), std::move(payload), std::move(span));
  }

  for (std::size_t i = 0; i < flat.size(); ++i) {
    const node& n = *flat[i].n;
    if (!n.is("qtype")) continue;
    std::vector<std::size_t> span;
    for (std::size_t j = i; j < detail::subtree_end(flat, i); ++j) span.push_back(j);
    std::vector<payload_item> payload;
    std::vector<std::string> parts;
    for (const auto& arg : n.children) {
      if (arg.is("count")) {
        payload.push_back({"count", ""});
        parts.push_back("Count");
      } else if (arg.is("latlong")) {
        payload.push_back({"latlong", ""});
        parts.push_back("Location");
      } else if (arg.is("least")) {
        const std::string& k = arg.children[0].children[0].label;
        payload.push_back({"least", k});
        parts.push_back(k == "1" ? "Existence" : "At least " + k);
      } else if (arg.is("findkey")) {
        const std::string& k = arg.children[0].label;
        payload.push_back({"findkey", k});
        parts.push_back("Key : " + k);
      }
    }
    std::string text = "Question Type: ";
    for (std::size_t p = 0; p < parts.size(); ++p) text += (p ? ", " : "") + parts[p];
    add(statement_type::question_type, std::move(text), std::move(payload), std::move(span));
  }

  for (std::size_t i = 0; i < flat.size(); ++i)
    if (flat[i].n->is("around"))
      add(statement_type::proximity_around_near, "Proximity: Around/Near", {{"", "around"}}, {i});

  for (std::size_t i = 0; i < flat.size(); ++i) {
    const node& n = *flat[i].n;
    if (n.is("topx") && parent_is(i, "around") && n.children[0].label == "1")
      add(statement_type::restriction_closest, "Restriction: Closest", {{"topx", "1"}}, {i, i + 1});
  }

  for (std::size_t i = 0; i < flat.size(); ++i) {
    const node& n = *flat[i].n;
    if (!n.is("maxdist")) continue;
    const std::string& d = n.children[0].label;
    add(statement_type::distance, "Distance: " + detail::distance_text(d), {{"", d}}, {i, i + 1});
  }

  for (std::size_t i = 0; i < flat.size(); ++i) {
    const node& n = *flat[i].n;
    if (n.kind == node_kind::func && is_cardinal(n.label))
      add(statement_type::cardinal_direction, "Cardinal Direction: " + detail::capitalized(n.label), {{"", n.label}},
          {i});
  }

  return statement_block{std::move(question), std::move(out), linearize(ast)};
}

// Tokens in a statement's span get that statement's verdict; tokens outside
// every span get the conjunction of all verdicts, as does the sequence reward.
inline token_rewards map_marking_to_token_rewards(const statement_block& block, const marking& m) {
  const std::size_t k = block.statements.size();
  std::vector<int> seen(k, 0);
  std::vector<verdict> v(k, verdict::yes);
  for (const auto& e : m.verdicts) {
    if (e.statement_index >= k) throw std::invalid_argument("marking refers to unknown statement " + std::to_string(e.statement_index));
    if (seen[e.statement_index]++) throw std::invalid_argument("duplicate verdict for statement " + std::to_string(e.statement_index));
    v[e.statement_index] = e.value;
  }
  if (m.verdicts.size() != k) throw std::invalid_argument("incomplete marking: " + std::to_string(m.verdicts.size()) + " of " + std::to_string(k) + " statements");

  const int all_yes = std::all_of(v.begin(), v.end(), [](verdict x) { return x == verdict::yes; }) ? 1 : 0;
  token_rewards r;
  r.sequence = all_yes;
  r.token.assign(block.query.size(), all_yes);
  std::vector<bool> covered(block.query.size(), false);
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t idx : block.statements[s].token_span) {
      r.token.at(idx) = v[s] == verdict::yes ? 1 : 0;
      covered[idx] = true;
    }
  }
  for (std::size_t i = 0; i < covered.size(); ++i)
    if (covered[i]) r.covered.push_back(i);
  return r;
}

}  // namespace semparse

#endif  // SEMPARSE_STATEMENTS_HPP
