// Toy geographic database and the query executor over it.

#ifndef SEMPARSE_GEO_HPP
#define SEMPARSE_GEO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <semparse/mrl.hpp>

namespace semparse {

struct lat_lon {
  double lat = 0.0;
  double lon = 0.0;
  auto operator<=>(const lat_lon&) const = default;
};

inline constexpr double earth_radius_m = 6371000.0;

inline double haversine(lat_lon a, lat_lon b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * earth_radius_m * std::asin(std::min(1.0, std::sqrt(s)));
}

struct bbox {
  double min_lat = 0, min_lon = 0, max_lat = 0, max_lon = 0;

  bool contains(lat_lon p) const noexcept {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
  }
  lat_lon middle() const noexcept { return {(min_lat + max_lat) / 2, (min_lon + max_lon) / 2}; }

  // Half of the box in a cardinal direction, split at the midline.
  bbox half(std::string_view dir) const {
    bbox h = *this;
    const auto m = middle();
    if (dir == "north") h.min_lat = m.lat;
    else if (dir == "south") h.max_lat = m.lat;
    else if (dir == "east") h.min_lon = m.lon;
    else if (dir == "west") h.max_lon = m.lon;
    else throw std::invalid_argument("not a cardinal direction: " + std::string(dir));
    return h;
  }

  static bbox world() { return {-90, -180, 90, 180}; }
};

using tag_map = std::map<std::string, std::string, std::less<>>;

struct entity {
  std::int64_t id = 0;
  lat_lon pos;
  tag_map tags;

  const std::string* tag(std::string_view key) const {
    auto it = tags.find(key);
    return it == tags.end() ? nullptr : &it->second;
  }
};

struct named_area {
  std::string name;
  bbox box;
};

class geo_db {
 public:
  geo_db() = default;

  geo_db(std::vector<entity> entities, std::vector<named_area> areas)
      : entities_(std::move(entities)), areas_(std::move(areas)) {
    std::sort(entities_.begin(), entities_.end(), [](const entity& a, const entity& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      const auto& e = entities_[i];
      if (i && entities_[i - 1].id == e.id) throw std::invalid_argument("duplicate entity id " + std::to_string(e.id));
      if (!(e.pos.lat >= -90 && e.pos.lat <= 90 && e.pos.lon >= -180 && e.pos.lon <= 180))
        throw std::invalid_argument("entity " + std::to_string(e.id) + " has invalid coordinates");
      for (const auto& [k, v] : e.tags) {
        tag_index_[k + '\x1f' + v].push_back(i);
      }
    }
    for (const auto& a : areas_) {
      if (!(a.box.min_lat < a.box.max_lat && a.box.min_lon < a.box.max_lon))
        throw std::invalid_argument("degenerate area box for " + a.name);
    }
    by_lat_.resize(entities_.size());
    for (std::size_t i = 0; i < by_lat_.size(); ++i) by_lat_[i] = i;
    std::sort(by_lat_.begin(), by_lat_.end(), [&](std::size_t a, std::size_t b) {
      return entities_[a].pos.lat < entities_[b].pos.lat;
    });
  }

  const std::vector<entity>& entities() const noexcept { return entities_; }
  const std::vector<named_area>& areas() const noexcept { return areas_; }

  const named_area* area(std::string_view name) const {
    for (const auto& a : areas_)
      if (a.name == name) return &a;
    return nullptr;
  }

  // Positions (into entities()) carrying tag key=value, ascending.
  const std::vector<std::size_t>& with_tag(std::string_view key, std::string_view value) const {
    static const std::vector<std::size_t> none;
    std::string k(key);
    k += '\x1f';
    k += value;
    auto it = tag_index_.find(k);
    return it == tag_index_.end() ? none : it->second;
  }

  // Positions inside `box`, ascending.
  std::vector<std::size_t> within(const bbox& box) const {
    auto lo = std::lower_bound(by_lat_.begin(), by_lat_.end(), box.min_lat,
                               [&](std::size_t i, double v) { return entities_[i].pos.lat < v; });
    std::vector<std::size_t> out;
    for (auto it = lo; it != by_lat_.end() && entities_[*it].pos.lat <= box.max_lat; ++it)
      if (box.contains(entities_[*it].pos)) out.push_back(*it);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<entity> entities_;
  std::vector<named_area> areas_;
  std::unordered_map<std::string, std::vector<std::size_t>> tag_index_;
  std::vector<std::size_t> by_lat_;
};

// ---------------------------------------------------------------------------
// Fixture files
//
// entities: id <TAB> lat <TAB> lon <TAB> k=v;k=v
// areas:    name <TAB> min_lat <TAB> min_lon <TAB> max_lat <TAB> max_lon

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto p = s.find(sep, start);
    out.emplace_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

inline bool skip_line(const std::string& line) {
  return line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace detail

inline std::vector<entity> read_entities(std::istream& in) {
  std::vector<entity> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::skip_line(line)) continue;
    auto f = detail::split(line, '\t');
    if (f.size() < 3 || f.size() > 4) throw std::runtime_error("entities line " + std::to_string(no) + ": expected 3 or 4 fields");
    entity e;
    try {
      e.id = std::stoll(f[0]);
      e.pos = {std::stod(f[1]), std::stod(f[2])};
    } catch (const std::exception&) {
      throw std::runtime_error("entities line " + std::to_string(no) + ": bad number");
    }
    if (f.size() == 4 && !f[3].empty()) {
      for (const auto& kv : detail::split(f[3], ';')) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw std::runtime_error("entities line " + std::to_string(no) + ": bad tag '" + kv + "'");
        e.tags[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<named_area> read_areas(std::istream& in) {
  std::vector<named_area> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::skip_line(line)) continue;
    auto f = detail::split(line, '\t');
    if (f.size() != 5) throw std::runtime_error("areas line " + std::to_string(no) + ": expected 5 fields");
    try {
      out.push_back({f[0], {std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])}});
    } catch (const std::exception&) {
      throw std::runtime_error("areas line " + std::to_string(no) + ": bad number");
    }
  }
  return out;
}

inline void write_entities(std::ostream& out, const std::vector<entity>& entities) {
  out.precision(9);
  for (const auto& e : entities) {
    out << e.id << '\t' << e.pos.lat << '\t' << e.pos.lon << '\t';
    bool first = true;
    for (const auto& [k, v] : e.tags) {
      if (!first) out << ';';
      out << k << '=' << v;
      first = false;
    }
    out << '\n';
  }
}

inline void write_areas(std::ostream& out, const std::vector<named_area>& areas) {
  out.precision(9);
  for (const auto& a : areas)
    out << a.name << '\t' << a.box.min_lat << '\t' << a.box.min_lon << '\t' << a.box.max_lat << '\t' << a.box.max_lon << '\n';
}

inline geo_db load_geo_db(const std::string& entities_path, const std::string& areas_path) {
  std::ifstream e(entities_path), a(areas_path);
  if (!e) throw std::runtime_error("cannot open " + entities_path);
  if (!a) throw std::runtime_error("cannot open " + areas_path);
  return geo_db(read_entities(e), read_areas(a));
}

inline void save_geo_db(const geo_db& db, const std::string& entities_path, const std::string& areas_path) {
  std::ofstream e(entities_path), a(areas_path);
  if (!e || !a) throw std::runtime_error("cannot write geo db files");
  write_entities(e, db.entities());
  write_areas(a, db.areas());
}

// ---------------------------------------------------------------------------
// Answers

struct answer {
  enum class kind { empty, count, locations, values, exists };

  kind type = kind::empty;
  std::size_t count = 0;
  std::vector<lat_lon> locations;
  std::vector<std::string> values;
  bool exists = false;

  static answer make_empty() { return {}; }
  static answer make_count(std::size_t n) { return {kind::count, n, {}, {}, false}; }
  static answer make_exists(bool b) { return {kind::exists, 0, {}, {}, b}; }
  static answer make_locations(std::vector<lat_lon> v) {
    if (v.empty()) return make_empty();
    std::sort(v.begin(), v.end());
    return {kind::locations, 0, std::move(v), {}, false};
  }
  static answer make_values(std::vector<std::string> v) {
    if (v.empty()) return make_empty();
    std::sort(v.begin(), v.end());
    return {kind::values, 0, {}, std::move(v), false};
  }

  bool is_empty() const noexcept { return type == kind::empty; }
  bool operator==(const answer&) const = default;

  std::string to_string() const {
    std::ostringstream o;
    o.precision(9);
    switch (type) {
      case kind::empty: return "empty";
      case kind::count: return "count:" + std::to_string(count);
      case kind::exists: return exists ? "exists:yes" : "exists:no";
      case kind::locations:
        o << "locations:";
        for (std::size_t i = 0; i < locations.size(); ++i) o << (i ? ";" : "") << locations[i].lat << ',' << locations[i].lon;
        return o.str();
      case kind::values:
        o << "values:";
        for (std::size_t i = 0; i < values.size(); ++i) o << (i ? ";" : "") << values[i];
        return o.str();
    }
    return "empty";
  }
};

inline constexpr double dist_intown_m = 2000.0;
inline constexpr double dist_outtown_m = 20000.0;

// Symbolic or numeric distance literal in metres; nullopt if unrecognised.
inline std::optional<double> resolve_distance(std::string_view lit) {
  if (lit == "DIST_INTOWN") return dist_intown_m;
  if (lit == "DIST_OUTTOWN") return dist_outtown_m;
  if (lit.empty() || lit.size() > 12) return std::nullopt;
  bool dot = false, digit = false;
  for (char c : lit) {
    if (c == '.' && !dot) {
      dot = true;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    digit = true;
  }
  if (!digit) return std::nullopt;
  return std::stod(std::string(lit));
}

// Positive integer literal for topx; nullopt otherwise.
inline std::optional<std::size_t> resolve_count(std::string_view lit) {
  if (lit.empty() || lit.size() > 6) return std::nullopt;
  if (!std::all_of(lit.begin(), lit.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    return std::nullopt;
  auto k = static_cast<std::size_t>(std::stoul(std::string(lit)));
  if (k == 0) return std::nullopt;
  return k;
}

inline std::string format_location(lat_lon p) {
  std::ostringstream o;
  o.precision(9);
  o << p.lat << ',' << p.lon;
  return o.str();
}

// ---------------------------------------------------------------------------
// Executor

namespace detail {

// Thrown internally when a query references an unknown area or an
// unresolvable literal; surfaces as an empty answer.
struct unresolved {};

using id_set = std::vector<std::size_t>;  // sorted positions into geo_db::entities()

inline id_set intersect(const id_set& a, const id_set& b) {
  id_set out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline id_set unite(const id_set& a, const id_set& b) {
  id_set out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

class executor {
 public:
  explicit executor(const geo_db& db) : db_(db) {
    all_.resize(db.entities().size());
    for (std::size_t i = 0; i < all_.size(); ++i) all_[i] = i;
  }

  answer run(const query_ast& ast) {
    validate(ast);
    const auto& ch = ast.root.children;
    try {
      id_set sel = all_;
      for (std::size_t i = 0; i + 1 < ch.size(); ++i) sel = intersect(sel, select(ch[i]));
      return project(ch.back(), sel);
    } catch (const unresolved&) {
      return answer::make_empty();
    }
  }

 private:
  id_set tag_filter(const node& n) const {
    if (n.is("keyval")) return db_.with_tag(n.children[0].label, n.children[1].label);
    id_set acc = tag_filter(n.children[0]);
    for (std::size_t i = 1; i < n.children.size(); ++i)
      acc = n.is("and") ? intersect(acc, tag_filter(n.children[i])) : unite(acc, tag_filter(n.children[i]));
    return acc;
  }

  // nwr: conjunction of its tag filters.
  id_set nwr(const node& n) const {
    id_set acc = tag_filter(n.children[0]);
    for (std::size_t i = 1; i < n.children.size(); ++i) acc = intersect(acc, tag_filter(n.children[i]));
    return acc;
  }

  static bool area_tags_match(const node& f, const named_area& a) {
    if (f.is("keyval")) return f.children[0].label == "name" && f.children[1].label == a.name;
    if (f.is("and"))
      return std::all_of(f.children.begin(), f.children.end(), [&](const node& c) { return area_tags_match(c, a); });
    return std::any_of(f.children.begin(), f.children.end(), [&](const node& c) { return area_tags_match(c, a); });
  }

  // Named areas whose own tags ({name: ...}) satisfy every filter of `area`.
  std::vector<const named_area*> areas_of(const node& area) const {
    std::vector<const named_area*> out;
    for (const auto& a : db_.areas())
      if (std::all_of(area.children.begin(), area.children.end(), [&](const node& f) { return area_tags_match(f, a); }))
        out.push_back(&a);
    if (out.empty()) throw unresolved{};
    return out;
  }

  id_set within_areas(const std::vector<const named_area*>& areas, std::optional<std::string_view> half) const {
    id_set acc;
    for (const auto* a : areas) acc = unite(acc, db_.within(half ? a->box.half(*half) : a->box));
    return acc;
  }

  id_set cardinal(const node& n) const {
    id_set acc = all_;
    bool any_area = false;
    for (const auto& c : n.children) {
      if (c.is("area")) {
        any_area = true;
        acc = intersect(acc, within_areas(areas_of(c), n.label));
      } else {
        acc = intersect(acc, nwr(c));
      }
    }
    if (!any_area) acc = intersect(acc, db_.within(bbox::world().half(n.label)));
    return acc;
  }

  std::vector<lat_lon> reference_points(const node& center) const {
    std::vector<lat_lon> refs;
    const bool has_nwr = std::any_of(center.children.begin(), center.children.end(), [](const node& c) { return c.is("nwr"); });
    if (!has_nwr) {
      for (const auto& c : center.children)
        for (const auto* a : areas_of(c)) refs.push_back(a->box.middle());
      return refs;
    }
    id_set acc = all_;
    for (const auto& c : center.children)
      acc = intersect(acc, c.is("area") ? within_areas(areas_of(c), std::nullopt) : nwr(c));
    for (auto i : acc) refs.push_back(db_.entities()[i].pos);
    return refs;
  }

  id_set around(const node& n) const {
    std::vector<lat_lon> refs;
    id_set candidates = all_;
    double radius = std::numeric_limits<double>::infinity();
    std::size_t k = std::numeric_limits<std::size_t>::max();
    for (const auto& c : n.children) {
      if (c.is("center")) {
        auto r = reference_points(c);
        refs.insert(refs.end(), r.begin(), r.end());
      } else if (c.is("search")) {
        candidates = intersect(candidates, nwr(c.children[0]));
      } else if (c.is("maxdist")) {
        auto d = resolve_distance(c.children[0].label);
        if (!d) throw unresolved{};
        radius = std::min(radius, *d);
      } else if (c.is("topx")) {
        auto x = resolve_count(c.children[0].label);
        if (!x) throw unresolved{};
        k = std::min(k, *x);
      }
    }
    if (refs.empty()) return {};
    std::vector<std::pair<double, std::size_t>> ranked;
    for (auto i : candidates) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& r : refs) d = std::min(d, haversine(r, db_.entities()[i].pos));
      if (d <= radius) ranked.emplace_back(d, i);
    }
    std::sort(ranked.begin(), ranked.end());  // positions ascend with id, so ties break by id
    if (ranked.size() > k) ranked.resize(k);
    id_set out;
    for (const auto& r : ranked) out.push_back(r.second);
    std::sort(out.begin(), out.end());
    return out;
  }

  id_set select(const node& n) const {
    if (n.is("area")) return within_areas(areas_of(n), std::nullopt);
    if (n.is("nwr")) return nwr(n);
    if (n.is("around")) return around(n);
    return cardinal(n);
  }

  answer project(const node& qtype, const id_set& sel) const {
    const auto& ents = db_.entities();
    auto values_of = [&](const node& arg) {
      std::vector<std::string> v;
      if (arg.is("count")) {
        v.push_back("count:" + std::to_string(sel.size()));
      } else if (arg.is("latlong")) {
        for (auto i : sel) v.push_back(format_location(ents[i].pos));
      } else if (arg.is("least")) {
        auto x = resolve_count(arg.children[0].children[0].label);
        if (!x) throw unresolved{};
        v.push_back(sel.size() >= *x ? "exists:yes" : "exists:no");
      } else {
        for (auto i : sel)
          if (auto* t = ents[i].tag(arg.children[0].label)) v.push_back(*t);
      }
      return v;
    };
    if (qtype.children.size() > 1) {
      std::vector<std::string> all;
      for (const auto& arg : qtype.children) {
        auto v = values_of(arg);
        all.insert(all.end(), v.begin(), v.end());
      }
      return answer::make_values(std::move(all));
    }
    const node& arg = qtype.children[0];
    if (arg.is("count")) return answer::make_count(sel.size());
    if (arg.is("latlong")) {
      std::vector<lat_lon> locs;
      for (auto i : sel) locs.push_back(ents[i].pos);
      return answer::make_locations(std::move(locs));
    }
    if (arg.is("least")) {
      auto x = resolve_count(arg.children[0].children[0].label);
      if (!x) throw unresolved{};
      return answer::make_exists(sel.size() >= *x);
    }
    return answer::make_values(values_of(arg));
  }

  const geo_db& db_;
  id_set all_;
};

}  // namespace detail

inline answer execute(const query_ast& ast, const geo_db& db) { return detail::executor(db).run(ast); }

// Executes a model output; ill-formed token sequences yield an empty answer.
inline answer execute(const linear_query& q, const geo_db& db) {
  auto ast = try_delinearize(q);
  if (!ast) return answer::make_empty();
  return execute(*ast, db);
}

}  // namespace semparse

#endif  // SEMPARSE_GEO_HPP
