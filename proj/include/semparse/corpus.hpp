// Synthetic question/query corpus over a toy geo database, and experiment splits.

#ifndef SEMPARSE_CORPUS_HPP
#define SEMPARSE_CORPUS_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <semparse/geo.hpp>
#include <semparse/mrl.hpp>

namespace semparse {

struct corpus_example {
  std::string question;
  query_ast gold;
  bool operator==(const corpus_example&) const = default;
};

struct splits {
  std::vector<corpus_example> sup, dev, test, log;
};

struct split_sizes {
  std::size_t sup = 300, dev = 200, test = 300, log = 1500;
  std::size_t total() const noexcept { return sup + dev + test + log; }
};

// Lowercased words with punctuation split off; the parser's source side.
inline std::vector<std::string> tokenize_question(std::string_view q) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : q) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (c == '?' || c == ',' || c == '!' || c == '.') {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  flush();
  return out;
}

// Portable deterministic integer draw in [0, n).
inline std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

template <typename T>
inline void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw(rng, i)]);
}

// ---------------------------------------------------------------------------
// Lexicon

struct poi_lexeme {
  std::string_view key, value;
  std::array<std::string_view, 2> plural;
  std::array<std::string_view, 2> singular;
};

inline constexpr auto poi_lexicon = std::to_array<poi_lexeme>({
    {"tourism", "hotel", {"hotels", "places to stay"}, {"hotel", "place to stay"}},
    {"tourism", "hostel", {"hostels", "youth hostels"}, {"hostel", "youth hostel"}},
    {"tourism", "museum", {"museums", "exhibitions"}, {"museum", "exhibition"}},
    {"amenity", "bank", {"banks", "bank branches"}, {"bank", "bank branch"}},
    {"amenity", "bar", {"bars", "pubs"}, {"bar", "pub"}},
    {"amenity", "cafe", {"cafes", "coffee shops"}, {"cafe", "coffee shop"}},
    {"amenity", "restaurant", {"restaurants", "places to eat"}, {"restaurant", "place to eat"}},
    {"amenity", "pharmacy", {"pharmacies", "chemists"}, {"pharmacy", "chemist"}},
    {"amenity", "hospital", {"hospitals", "clinics"}, {"hospital", "clinic"}},
    {"amenity", "school", {"schools", "schoolhouses"}, {"school", "schoolhouse"}},
    {"amenity", "cinema", {"cinemas", "movie theaters"}, {"cinema", "movie theater"}},
    {"amenity", "parking", {"car parks", "parking lots"}, {"car park", "parking lot"}},
    {"amenity", "place_of_worship", {"churches", "places of worship"}, {"church", "place of worship"}},
    {"amenity", "fuel", {"petrol stations", "gas stations"}, {"petrol station", "gas station"}},
    {"shop", "bakery", {"bakeries", "bread shops"}, {"bakery", "bread shop"}},
    {"shop", "supermarket", {"supermarkets", "grocery stores"}, {"supermarket", "grocery store"}},
    {"railway", "station", {"railway stations", "train stations"}, {"railway station", "train station"}},
    {"leisure", "park", {"parks", "public gardens"}, {"park", "public garden"}},
    {"historic", "castle", {"castles", "fortresses"}, {"castle", "fortress"}},
});

struct town_seed {
  std::string_view name;
  double lat, lon;
};

inline constexpr auto town_seeds = std::to_array<town_seed>({
    {"Paris", 48.8566, 2.3522},
    {"Edinburgh", 55.9533, -3.1883},
    {"Heidelberg", 49.3988, 8.6724},
    {"Berlin", 52.5200, 13.4050},
    {"London", 51.5074, -0.1278},
    {"Lyon", 45.7640, 4.8357},
    {"Marseille", 43.2965, 5.3698},
    {"Hamburg", 53.5511, 9.9937},
    {"Bordeaux", 44.8378, -0.5792},
    {"Munich", 48.1351, 11.5820},
});

// Deterministic toy database: every town gets 0-4 entities per lexicon tag,
// some with name/website/opening_hours, plus a few entities outside any town.
inline geo_db make_toy_db(std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<named_area> areas;
  std::vector<entity> ents;
  std::int64_t id = 1;
  constexpr double half_lat = 0.05, half_lon = 0.075;
  for (const auto& t : town_seeds) {
    bbox box{t.lat - half_lat, t.lon - half_lon, t.lat + half_lat, t.lon + half_lon};
    areas.push_back({std::string(t.name), box});
    for (const auto& lx : poi_lexicon) {
      const auto n = draw(rng, 5);
      for (std::size_t k = 0; k < n; ++k) {
        entity e;
        e.id = id++;
        e.pos = {uniform(box.min_lat, box.max_lat), uniform(box.min_lon, box.max_lon)};
        e.tags[std::string(lx.key)] = std::string(lx.value);
        e.tags["name"] = std::string(t.name) + " " + std::string(lx.singular[0]) + " " + std::to_string(k + 1);
        if (draw(rng, 3) != 0) e.tags["website"] = "https://" + std::to_string(e.id) + ".example.org";
        if (draw(rng, 2) != 0) e.tags["opening_hours"] = draw(rng, 2) ? "Mo-Fr 09:00-18:00" : "Mo-Su 08:00-22:00";
        ents.push_back(std::move(e));
      }
    }
  }
  for (std::size_t k = 0; k < 40; ++k) {
    const auto& lx = poi_lexicon[draw(rng, poi_lexicon.size())];
    entity e;
    e.id = id++;
    e.pos = {uniform(-60, 70), uniform(-170, 170)};
    e.tags[std::string(lx.key)] = std::string(lx.value);
    e.tags["name"] = "Remote " + std::string(lx.singular[0]) + " " + std::to_string(k + 1);
    ents.push_back(std::move(e));
  }
  return geo_db(std::move(ents), std::move(areas));
}

// ---------------------------------------------------------------------------
// Templates

namespace detail {

enum class qform { count, latlong, exists, name, website, opening_hours };
enum class layout { in_town, cardinal, near, closest, global };

inline node kv(std::string_view k, std::string_view v) {
  return node::func("keyval", {node::leaf(std::string(k)), node::leaf(std::string(v))});
}

inline node qtype_node(qform q) {
  switch (q) {
    case qform::count: return node::func("qtype", {node::func("count")});
    case qform::latlong: return node::func("qtype", {node::func("latlong")});
    case qform::exists: return node::func("qtype", {node::func("least", {node::func("topx", {node::leaf("1")})})});
    case qform::name: return node::func("qtype", {node::func("findkey", {node::leaf("name")})});
    case qform::website: return node::func("qtype", {node::func("findkey", {node::leaf("website")})});
    case qform::opening_hours: return node::func("qtype", {node::func("findkey", {node::leaf("opening_hours")})});
  }
  return {};
}

// "{P}" plural POI, "{S}" singular POI, "{L}" location phrase.
inline const std::vector<std::string_view>& frames(qform q) {
  static const std::vector<std::string_view> count{"How many {P} are there {L}?", "How many {P} {L} are there?",
                                                   "Number of {P} {L}", "Count the {P} {L}"};
  static const std::vector<std::string_view> latlong{"Where are the {P} {L}?", "Where can I find {P} {L}?",
                                                     "Show me {P} {L}", "Give me the location of {P} {L}"};
  static const std::vector<std::string_view> exists{"Are there any {P} {L}?", "Is there a {S} {L}?",
                                                    "Is there any {S} {L}?"};
  static const std::vector<std::string_view> name{"What are the names of the {P} {L}?", "Name the {P} {L}",
                                                  "What are the {P} {L} called?"};
  static const std::vector<std::string_view> website{"What are the websites of the {P} {L}?",
                                                     "Give me the websites of {P} {L}"};
  static const std::vector<std::string_view> hours{"When are the {P} {L} open?",
                                                   "What are the opening hours of the {P} {L}?"};
  switch (q) {
    case qform::count: return count;
    case qform::latlong: return latlong;
    case qform::exists: return exists;
    case qform::name: return name;
    case qform::website: return website;
    case qform::opening_hours: return hours;
  }
  return count;
}

// Closest-POI questions use singular frames of their own.
inline const std::vector<std::string_view>& closest_frames(qform q) {
  static const std::vector<std::string_view> latlong{"Where is the closest {S} {L}?", "Where is the nearest {S} {L}?"};
  static const std::vector<std::string_view> name{"What is the name of the closest {S} {L}?",
                                                  "What is the nearest {S} {L} called?"};
  static const std::vector<std::string_view> website{"What is the website of the closest {S} {L}?"};
  static const std::vector<std::string_view> hours{"When is the nearest {S} {L} open?"};
  switch (q) {
    case qform::name: return name;
    case qform::website: return website;
    case qform::opening_hours: return hours;
    default: return latlong;
  }
}

inline std::string fill(std::string_view frame, std::string_view plural, std::string_view singular,
                        const std::string& loc) {
  std::string out;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (frame[i] == '{' && i + 2 < frame.size() && frame[i + 2] == '}') {
      const char c = frame[i + 1];
      out += c == 'P' ? std::string(plural) : c == 'S' ? std::string(singular) : loc;
      i += 2;
    } else {
      out.push_back(frame[i]);
    }
  }
  return out;
}

}  // namespace detail

// n distinct examples drawn from the template inventory, instantiated with the
// database's areas and the lexicon tags present in it.
inline std::vector<corpus_example> generate_corpus(const geo_db& db, std::size_t n, std::uint64_t seed) {
  using namespace detail;
  if (n == 0) throw std::invalid_argument("corpus size must be at least 1");
  std::vector<const poi_lexeme*> pois;
  for (const auto& lx : poi_lexicon) {
    const bool present = std::any_of(db.entities().begin(), db.entities().end(), [&](const entity& e) {
      auto* v = e.tag(lx.key);
      return v && *v == lx.value;
    });
    if (present) pois.push_back(&lx);
  }
  if (pois.size() < 2 || db.areas().empty()) throw std::invalid_argument("database too small for the corpus templates");

  std::mt19937_64 rng(seed);
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<corpus_example> out;
  const std::size_t max_attempts = 200 * n + 10000;
  static constexpr std::array<std::string_view, 4> dirs{"north", "east", "south", "west"};

  for (std::size_t attempt = 0; out.size() < n; ++attempt) {
    if (attempt >= max_attempts)
      throw std::runtime_error("template inventory exhausted after " + std::to_string(out.size()) + " distinct examples");
    const auto& town = db.areas()[draw(rng, db.areas().size())].name;
    const poi_lexeme& poi = *pois[draw(rng, pois.size())];
    const std::size_t syn = draw(rng, 2);
    const std::size_t lay_roll = draw(rng, 20);
    const layout lay = lay_roll < 8 ? layout::in_town : lay_roll < 12 ? layout::cardinal : lay_roll < 15 ? layout::near
                       : lay_roll < 18 ? layout::closest : layout::global;
    auto q = static_cast<qform>(draw(rng, 6));

    std::string loc;
    std::vector<node> parts;
    node area = node::func("area", {kv("name", town)});
    node target = node::func("nwr", {kv(poi.key, poi.value)});
    const std::vector<std::string_view>* fr = &frames(q);

    switch (lay) {
      case layout::in_town: {
        loc = "in " + town;
        parts.push_back(std::move(area));
        parts.push_back(std::move(target));
        break;
      }
      case layout::cardinal: {
        const auto dir = dirs[draw(rng, dirs.size())];
        loc = draw(rng, 2) ? "in the " + std::string(dir) + " of " + town : "in " + std::string(dir) + "ern " + town;
        parts.push_back(node::func(std::string(dir), {std::move(area), std::move(target)}));
        break;
      }
      case layout::near:
      case layout::closest: {
        const poi_lexeme* ref = pois[draw(rng, pois.size())];
        if (ref == &poi) continue;
        const std::string ref_name(ref->singular[draw(rng, 2)]);
        std::string dist = "DIST_INTOWN";
        if (lay == layout::closest) {
          if (q == qform::count || q == qform::exists) q = qform::latlong;
          fr = &closest_frames(q);
          loc = "to the " + ref_name + " in " + town;
        } else {
          const auto v = draw(rng, 3);
          if (v == 2) dist = "DIST_OUTTOWN";
          loc = (v == 0 ? "near the " : v == 1 ? "within walking distance of the " : "within driving distance of the ") +
                ref_name + " in " + town;
        }
        std::vector<node> ar{node::func("center", {std::move(area), node::func("nwr", {kv(ref->key, ref->value)})}),
                             node::func("search", {std::move(target)}), node::func("maxdist", {node::leaf(dist)})};
        if (lay == layout::closest) ar.push_back(node::func("topx", {node::leaf("1")}));
        parts.push_back(node::func("around", std::move(ar)));
        break;
      }
      case layout::global: {
        loc = draw(rng, 2) ? "worldwide" : "in the world";
        parts.push_back(std::move(target));
        break;
      }
    }
    parts.push_back(qtype_node(q));
    const auto& frame = (*fr)[draw(rng, fr->size())];
    std::string question = fill(frame, poi.plural[syn], poi.singular[syn], loc);
    query_ast ast{node::func("query", std::move(parts))};
    validate(ast);
    if (!seen.emplace(question, serialize_mrl(ast)).second) continue;
    out.push_back({std::move(question), std::move(ast)});
  }
  return out;
}

inline splits split(std::vector<corpus_example> examples, const split_sizes& sizes, std::uint64_t seed) {
  if (sizes.total() > examples.size())
    throw std::invalid_argument("need " + std::to_string(sizes.total()) + " examples, have " + std::to_string(examples.size()));
  std::mt19937_64 rng(seed);
  deterministic_shuffle(examples, rng);
  splits s;
  auto it = examples.begin();
  auto take = [&](std::size_t k, std::vector<corpus_example>& dst) {
    dst.assign(std::make_move_iterator(it), std::make_move_iterator(it + static_cast<std::ptrdiff_t>(k)));
    it += static_cast<std::ptrdiff_t>(k);
  };
  take(sizes.sup, s.sup);
  take(sizes.dev, s.dev);
  take(sizes.test, s.test);
  take(sizes.log, s.log);
  return s;
}

// ---------------------------------------------------------------------------
// Corpus file: question <TAB> mrl, one example per line.

inline void write_corpus(std::ostream& out, const std::vector<corpus_example>& examples) {
  for (const auto& e : examples) out << e.question << '\t' << serialize_mrl(e.gold) << '\n';
}

inline std::vector<corpus_example> read_corpus(std::istream& in) {
  std::vector<corpus_example> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("corpus line " + std::to_string(no) + ": missing TAB");
    try {
      out.push_back({line.substr(0, tab), parse_mrl(line.substr(tab + 1))});
    } catch (const mrl_error& e) {
      throw std::runtime_error("corpus line " + std::to_string(no) + ": " + e.what());
    }
  }
  return out;
}

inline void save_corpus(const std::string& path, const std::vector<corpus_example>& examples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_corpus(out, examples);
}

inline std::vector<corpus_example> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_corpus(in);
}

}  // namespace semparse

#endif  // SEMPARSE_CORPUS_HPP
