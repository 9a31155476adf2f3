#ifndef SEMPARSE_VOCABULARY_HPP
#define SEMPARSE_VOCABULARY_HPP

#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace semparse {

// Dense, stable token indices. Index 0 is always the unknown token.
class vocabulary {
 public:
  vocabulary() = default;

  explicit vocabulary(std::vector<std::string> items) : items_(std::move(items)) {
    if (items_.empty()) throw std::invalid_argument("vocabulary needs an unknown token");
    for (std::size_t i = 0; i < items_.size(); ++i)
      if (!index_.emplace(items_[i], i).second) throw std::invalid_argument("duplicate vocabulary entry: " + items_[i]);
  }

  // Sorted unique tokens after the unknown token.
  static vocabulary build(const std::vector<std::vector<std::string>>& sequences, std::string unk) {
    std::set<std::string> uniq;
    for (const auto& s : sequences) uniq.insert(s.begin(), s.end());
    uniq.erase(unk);
    std::vector<std::string> items{std::move(unk)};
    items.insert(items.end(), uniq.begin(), uniq.end());
    return vocabulary(std::move(items));
  }

  std::size_t size() const noexcept { return items_.size(); }
  const std::string& token(std::size_t i) const { return items_.at(i); }
  const std::vector<std::string>& items() const noexcept { return items_; }

  std::size_t id(const std::string& t) const {
    auto it = index_.find(t);
    return it == index_.end() ? 0 : it->second;
  }
  bool contains(const std::string& t) const { return index_.count(t) != 0; }

  std::vector<std::size_t> ids(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

  // One token per line; the line number is the index.
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& t : items_) out << t << '\n';
  }

  static vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> items;
    for (std::string line; std::getline(in, line);) items.push_back(line);
    return vocabulary(std::move(items));
  }

  bool operator==(const vocabulary& o) const { return items_ == o.items_; }

 private:
  std::vector<std::string> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace semparse

#endif  // SEMPARSE_VOCABULARY_HPP
