// Machine-readable query language: tree form, text form and the pre-order
// token linearization the parser emits.

#ifndef SEMPARSE_MRL_HPP
#define SEMPARSE_MRL_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace semparse {

enum class mrl_errc {
  syntax,
  unknown_operator,
  arity,
  structure,
  truncated,
  extra_tokens,
  malformed_token
};

inline const char* to_string(mrl_errc e) {
  switch (e) {
    case mrl_errc::syntax: return "syntax error";
    case mrl_errc::unknown_operator: return "unknown operator";
    case mrl_errc::arity: return "arity violation";
    case mrl_errc::structure: return "structure violation";
    case mrl_errc::truncated: return "truncated sequence";
    case mrl_errc::extra_tokens: return "extra tokens";
    case mrl_errc::malformed_token: return "malformed token";
  }
  return "mrl error";
}

class mrl_error : public std::runtime_error {
 public:
  mrl_error(mrl_errc code, std::size_t position, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + " at " + std::to_string(position) + ": " + what),
        code_(code),
        position_(position) {}

  mrl_errc code() const noexcept { return code_; }
  // Character offset for text input, token index for linearized input.
  std::size_t position() const noexcept { return position_; }

 private:
  mrl_errc code_;
  std::size_t position_;
};

enum class node_kind { func, leaf };

struct node {
  node_kind kind = node_kind::leaf;
  std::string label;  // operator name, or leaf text without quotes
  std::vector<node> children;

  static node func(std::string op, std::vector<node> ch = {}) {
    return node{node_kind::func, std::move(op), std::move(ch)};
  }
  static node leaf(std::string text) { return node{node_kind::leaf, std::move(text), {}}; }

  bool is_leaf() const noexcept { return kind == node_kind::leaf; }
  bool is(std::string_view op) const noexcept { return kind == node_kind::func && label == op; }

  std::size_t size() const noexcept {
    std::size_t n = 1;
    for (const auto& c : children) n += c.size();
    return n;
  }

  bool operator==(const node&) const = default;
};

struct query_ast {
  node root;
  std::size_t size() const noexcept { return root.size(); }
  bool operator==(const query_ast&) const = default;
};

// ---------------------------------------------------------------------------
// Grammar

enum class child_kind { none, func, leaf };

struct operator_rule {
  std::string_view name;
  std::size_t min_arity;
  std::size_t max_arity;
  child_kind children;
  std::vector<std::string_view> allowed;       // operators allowed as children
  std::vector<std::string_view> last_allowed;  // if non-empty, overrides `allowed` for the last child
  bool bare_literal = false;                   // leaf children serialize unquoted
};

inline constexpr std::array<std::string_view, 4> cardinal_operators{"north", "east", "south", "west"};

inline bool is_cardinal(std::string_view op) {
  return std::find(cardinal_operators.begin(), cardinal_operators.end(), op) != cardinal_operators.end();
}

inline const std::vector<operator_rule>& grammar() {
  static const std::vector<operator_rule> rules = [] {
    const std::vector<std::string_view> tag_filter{"keyval", "and", "or"};
    const std::vector<std::string_view> region{"area", "nwr"};
    std::vector<operator_rule> r{
        {"query", 2, 3, child_kind::func, {"area", "nwr", "around", "north", "east", "south", "west"}, {"qtype"}},
        {"area", 1, 2, child_kind::func, tag_filter, {}},
        {"nwr", 1, 2, child_kind::func, tag_filter, {}},
        {"search", 1, 1, child_kind::func, {"nwr"}, {}},
        {"center", 1, 2, child_kind::func, region, {}},
        {"around", 3, 4, child_kind::func, {"center", "search", "maxdist", "topx"}, {}},
        {"keyval", 2, 2, child_kind::leaf, {}, {}},
        {"qtype", 1, 3, child_kind::func, {"count", "latlong", "least", "findkey"}, {}},
        {"count", 0, 0, child_kind::none, {}, {}},
        {"latlong", 0, 0, child_kind::none, {}, {}},
        {"findkey", 1, 1, child_kind::leaf, {}, {}},
        {"least", 1, 1, child_kind::func, {"topx"}, {}},
        {"topx", 1, 1, child_kind::leaf, {}, {}, true},
        {"maxdist", 1, 1, child_kind::leaf, {}, {}, true},
        {"and", 2, 3, child_kind::func, tag_filter, {}},
        {"or", 2, 3, child_kind::func, tag_filter, {}},
    };
    for (auto c : cardinal_operators) r.push_back({c, 2, 2, child_kind::func, region, {}});
    return r;
  }();
  return rules;
}

inline const operator_rule* find_rule(std::string_view op) {
  for (const auto& r : grammar())
    if (r.name == op) return &r;
  return nullptr;
}

inline bool is_operator(std::string_view op) { return find_rule(op) != nullptr; }

namespace detail {

inline void validate_node(const node& n, const node* parent, std::size_t pos) {
  if (n.is_leaf()) {
    if (!n.children.empty()) throw mrl_error(mrl_errc::structure, pos, "leaf with children");
    return;
  }
  const operator_rule* rule = find_rule(n.label);
  if (!rule) throw mrl_error(mrl_errc::unknown_operator, pos, n.label);
  if (n.label == "query" && parent) throw mrl_error(mrl_errc::structure, pos, "query below the root");
  const auto arity = n.children.size();
  if (arity < rule->min_arity || arity > rule->max_arity)
    throw mrl_error(mrl_errc::arity, pos,
                    n.label + " takes " + std::to_string(rule->min_arity) + ".." + std::to_string(rule->max_arity) +
                        " arguments, got " + std::to_string(arity));
  for (std::size_t i = 0; i < arity; ++i) {
    const node& c = n.children[i];
    if (rule->children == child_kind::leaf) {
      if (!c.is_leaf()) throw mrl_error(mrl_errc::structure, pos, n.label + " expects string arguments");
      continue;
    }
    if (c.is_leaf()) throw mrl_error(mrl_errc::structure, pos, n.label + " expects operator arguments");
    const auto& allowed = (i + 1 == arity && !rule->last_allowed.empty()) ? rule->last_allowed : rule->allowed;
    if (std::find(allowed.begin(), allowed.end(), c.label) == allowed.end()) {
      if (!is_operator(c.label)) throw mrl_error(mrl_errc::unknown_operator, pos, c.label);
      throw mrl_error(mrl_errc::structure, pos, c.label + " not allowed under " + n.label);
    }
    validate_node(c, &n, pos);
  }
}

}  // namespace detail

// Throws mrl_error if `ast` violates the grammar.
inline void validate(const query_ast& ast) {
  if (!ast.root.is("query")) throw mrl_error(mrl_errc::structure, 0, "root must be query");
  detail::validate_node(ast.root, nullptr, 0);
}

inline bool is_valid(const query_ast& ast) {
  try {
    validate(ast);
    return true;
  } catch (const mrl_error&) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Text form

namespace detail {

inline bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-' || c == '*';
}

class mrl_reader {
 public:
  explicit mrl_reader(std::string_view text) : s_(text) {}

  node parse_all() {
    skip_ws();
    node n = parse_term();
    skip_ws();
    if (i_ != s_.size()) throw mrl_error(mrl_errc::syntax, i_, "trailing input");
    return n;
  }

 private:
  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }

  node parse_term() {
    skip_ws();
    if (i_ >= s_.size()) throw mrl_error(mrl_errc::syntax, i_, "unexpected end of input");
    if (s_[i_] == '\'') return node::leaf(parse_quoted());
    const std::size_t start = i_;
    while (i_ < s_.size() && is_ident_char(s_[i_])) ++i_;
    if (i_ == start) throw mrl_error(mrl_errc::syntax, i_, std::string("unexpected '") + s_[i_] + "'");
    std::string ident(s_.substr(start, i_ - start));
    skip_ws();
    if (i_ < s_.size() && s_[i_] == '(') {
      if (!is_operator(ident)) throw mrl_error(mrl_errc::unknown_operator, start, ident);
      ++i_;
      node n = node::func(std::move(ident));
      skip_ws();
      if (i_ < s_.size() && s_[i_] == ')') {
        ++i_;
        return n;
      }
      for (;;) {
        n.children.push_back(parse_term());
        skip_ws();
        if (i_ >= s_.size()) throw mrl_error(mrl_errc::syntax, i_, "unterminated argument list");
        if (s_[i_] == ',') {
          ++i_;
          continue;
        }
        if (s_[i_] == ')') {
          ++i_;
          return n;
        }
        throw mrl_error(mrl_errc::syntax, i_, std::string("expected ',' or ')', got '") + s_[i_] + "'");
      }
    }
    if (is_operator(ident)) return node::func(std::move(ident));
    return node::leaf(std::move(ident));
  }

  std::string parse_quoted() {
    const std::size_t start = i_++;
    std::string out;
    while (i_ < s_.size()) {
      char c = s_[i_++];
      if (c == '\\' && i_ < s_.size()) {
        out.push_back(s_[i_++]);
      } else if (c == '\'') {
        return out;
      } else {
        out.push_back(c);
      }
    }
    throw mrl_error(mrl_errc::syntax, start, "unterminated string");
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

inline bool bare_safe(std::string_view text) {
  return !text.empty() && std::all_of(text.begin(), text.end(), is_ident_char) && !is_operator(text);
}

inline void write_node(std::string& out, const node& n, bool bare_leaves) {
  if (n.is_leaf()) {
    if (bare_leaves && bare_safe(n.label)) {
      out += n.label;
      return;
    }
    out.push_back('\'');
    for (char c : n.label) {
      if (c == '\'' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    out.push_back('\'');
    return;
  }
  out += n.label;
  if (n.children.empty()) return;
  const operator_rule* rule = find_rule(n.label);
  const bool bare = rule && rule->bare_literal;
  out.push_back('(');
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (i) out.push_back(',');
    write_node(out, n.children[i], bare);
  }
  out.push_back(')');
}

}  // namespace detail

inline query_ast parse_mrl(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw mrl_error(mrl_errc::syntax, 0, "empty input");
  query_ast ast{detail::mrl_reader(text).parse_all()};
  validate(ast);
  return ast;
}

// Canonical text: no whitespace, string leaves single-quoted except the
// literal arguments of topx/maxdist.
inline std::string serialize_mrl(const query_ast& ast) {
  std::string out;
  detail::write_node(out, ast.root, false);
  return out;
}

// ---------------------------------------------------------------------------
// Linearization

enum class token_kind { func, leaf };

struct token {
  std::string surface;  // operator name or unquoted leaf text
  token_kind kind = token_kind::func;
  std::size_t arity = 0;

  bool operator==(const token&) const = default;

  // Spaces inside leaf text are written as U+20AC so tokens stay space-free.
  std::string text() const {
    std::string s;
    for (char c : surface) {
      if (c == ' ')
        s += "\xE2\x82\xAC";
      else
        s.push_back(c);
    }
    return kind == token_kind::leaf ? s + "@s" : s + "@" + std::to_string(arity);
  }

  static token from_text(std::string_view t, std::size_t index = 0) {
    const auto at = t.rfind('@');
    if (at == std::string_view::npos || at == 0 || at + 1 == t.size())
      throw mrl_error(mrl_errc::malformed_token, index, std::string(t));
    std::string surface;
    const std::string_view body = t.substr(0, at);
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (body.substr(i, 3) == "\xE2\x82\xAC") {
        surface.push_back(' ');
        i += 2;
      } else {
        surface.push_back(body[i]);
      }
    }
    const std::string_view suffix = t.substr(at + 1);
    if (suffix == "s") return token{std::move(surface), token_kind::leaf, 0};
    if (!std::all_of(suffix.begin(), suffix.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
        suffix.size() > 3)
      throw mrl_error(mrl_errc::malformed_token, index, std::string(t));
    return token{std::move(surface), token_kind::func, static_cast<std::size_t>(std::stoul(std::string(suffix)))};
  }
};

struct linear_query {
  std::vector<token> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  const token& operator[](std::size_t i) const { return tokens[i]; }

  std::vector<std::string> texts() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.text());
    return out;
  }

  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out.push_back(' ');
      out += tokens[i].text();
    }
    return out;
  }

  static linear_query from_texts(const std::vector<std::string>& texts) {
    linear_query q;
    q.tokens.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) q.tokens.push_back(token::from_text(texts[i], i));
    return q;
  }

  static linear_query from_string(std::string_view s) {
    std::vector<std::string> parts;
    std::istringstream in{std::string(s)};
    for (std::string t; in >> t;) parts.push_back(t);
    return from_texts(parts);
  }

  bool operator==(const linear_query&) const = default;
};

namespace detail {

// Values (second argument of keyval) become `text@s`; every other leaf is a
// nullary token `text@0`, as keys and literals are in the pre-order form.
inline void linearize_into(const node& n, bool value_position, std::vector<token>& out) {
  if (n.is_leaf()) {
    out.push_back(token{n.label, value_position ? token_kind::leaf : token_kind::func, 0});
    return;
  }
  out.push_back(token{n.label, token_kind::func, n.children.size()});
  const bool kv = n.label == "keyval";
  for (std::size_t k = 0; k < n.children.size(); ++k) linearize_into(n.children[k], kv && k == 1, out);
}

enum class slot { func, key, value };

inline node read_tree(const linear_query& q, std::size_t& i, slot expect) {
  if (i >= q.size()) throw mrl_error(mrl_errc::truncated, i, "sequence ends inside a subtree");
  const token& t = q[i];
  const std::size_t at = i++;
  if (expect == slot::value) {
    if (t.kind != token_kind::leaf) throw mrl_error(mrl_errc::arity, at, "expected a value token, got " + t.text());
    return node::leaf(t.surface);
  }
  if (t.kind == token_kind::leaf) throw mrl_error(mrl_errc::arity, at, "unexpected value token " + t.text());
  if (expect == slot::key) {
    if (t.arity != 0) throw mrl_error(mrl_errc::arity, at, "expected a nullary key token, got " + t.text());
    return node::leaf(t.surface);
  }
  const operator_rule* rule = find_rule(t.surface);
  if (!rule) throw mrl_error(mrl_errc::unknown_operator, at, t.surface);
  if (t.arity < rule->min_arity || t.arity > rule->max_arity)
    throw mrl_error(mrl_errc::arity, at, t.text());
  node n = node::func(t.surface);
  n.children.reserve(t.arity);
  for (std::size_t k = 0; k < t.arity; ++k) {
    slot child = slot::func;
    if (rule->children == child_kind::leaf) child = (t.surface == "keyval" && k == 1) ? slot::value : slot::key;
    n.children.push_back(read_tree(q, i, child));
  }
  return n;
}

}  // namespace detail

inline linear_query linearize(const query_ast& ast) {
  linear_query q;
  detail::linearize_into(ast.root, false, q.tokens);
  return q;
}

// Stack-decodes a pre-order token sequence. Any mrl_error here means the
// sequence is not the linearization of a valid query.
inline query_ast delinearize(const linear_query& q) {
  if (q.empty()) throw mrl_error(mrl_errc::truncated, 0, "empty sequence");
  std::size_t i = 0;
  query_ast ast{detail::read_tree(q, i, detail::slot::func)};
  if (i != q.size()) throw mrl_error(mrl_errc::extra_tokens, i, "tokens after a complete tree");
  try {
    validate(ast);
  } catch (const mrl_error& e) {
    if (e.code() == mrl_errc::unknown_operator) throw;
    throw mrl_error(mrl_errc::arity, e.position(), e.what());
  }
  return ast;
}

inline std::optional<query_ast> try_delinearize(const linear_query& q) {
  try {
    return delinearize(q);
  } catch (const mrl_error&) {
    return std::nullopt;
  }
}

// Number of subtrees still owed after consuming `tokens`: 1 initially, 0 when
// the pre-order sequence describes a complete tree.
inline long open_slots(const std::vector<token>& tokens) {
  long open = 1;
  for (const auto& t : tokens) {
    if (open <= 0) return -1;
    open += static_cast<long>(t.kind == token_kind::leaf ? 0 : t.arity) - 1;
  }
  return open;
}

}  // namespace semparse

#endif  // SEMPARSE_MRL_HPP
