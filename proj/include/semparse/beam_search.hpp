#ifndef SEMPARSE_BEAM_SEARCH_HPP
#define SEMPARSE_BEAM_SEARCH_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <semparse/parser_model.hpp>

namespace semparse {

struct hypothesis {
  std::vector<std::size_t> ids;
  double logprob = 0;
  bool complete = false;  // false when cut at the length limit
};

// k-best decoding. A hypothesis ends when its pre-order token sequence forms a
// complete tree (no open argument slots) or when it reaches `max_length`.
// Finished hypotheses shrink the live beam, so beam_size = 1 is greedy.
inline std::vector<hypothesis> beam_search_ids(const parser_model& m, const std::vector<std::size_t>& src,
                                               std::size_t beam_size, std::size_t max_length) {
  if (beam_size == 0) throw std::invalid_argument("beam size must be at least 1");
  struct live {
    hypothesis h;
    VectorXd state;
    long open = 1;
  };
  const auto enc = m.encode(src);
  std::vector<live> beam{{hypothesis{}, enc.init_state, 1}};
  std::vector<hypothesis> finished;
  const std::size_t V = m.target_vocab().size();
  parser_model::gru_step g;
  parser_model::decoder_step d;

  struct candidate {
    double score;
    std::size_t from, token;
  };
  std::vector<VectorXd> next_states;
  for (std::size_t len = 0; len < max_length && !beam.empty() && finished.size() < beam_size; ++len) {
    std::vector<candidate> cand;
    cand.reserve(beam.size() * V);
    next_states.assign(beam.size(), VectorXd());
    for (std::size_t b = 0; b < beam.size(); ++b) {
      const auto prev = beam[b].h.ids.empty() ? m.bos() : static_cast<Index>(beam[b].h.ids.back());
      m.decode_step(enc, prev, beam[b].state, g, d);
      next_states[b] = g.h;
      for (std::size_t v = 0; v < V; ++v)
        cand.push_back({beam[b].h.logprob + std::log(d.prob[static_cast<Index>(v)]), b, v});
    }
    const std::size_t keep = std::min(beam_size - finished.size(), cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                      [](const candidate& a, const candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.from != b.from) return a.from < b.from;
                        return a.token < b.token;
                      });
    std::vector<live> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& c = cand[k];
      live h{beam[c.from].h, next_states[c.from], beam[c.from].open + m.arity_delta(c.token)};
      h.h.ids.push_back(c.token);
      h.h.logprob = c.score;
      if (h.open <= 0) {
        h.h.complete = true;
        finished.push_back(std::move(h.h));
      } else if (h.h.ids.size() == max_length) {
        finished.push_back(std::move(h.h));
      } else {
        next.push_back(std::move(h));
      }
    }
    beam = std::move(next);
  }
  for (auto& h : beam) finished.push_back(std::move(h.h));
  std::stable_sort(finished.begin(), finished.end(),
                   [](const hypothesis& a, const hypothesis& b) { return a.logprob > b.logprob; });
  return finished;
}

struct scored_query {
  linear_query query;
  double logprob = 0;
  bool complete = false;
};

inline std::vector<scored_query> beam_search(const parser_model& m, const std::vector<std::string>& question,
                                             std::size_t beam_size, std::size_t max_length) {
  std::vector<scored_query> out;
  for (auto& h : beam_search_ids(m, m.source_ids(question), beam_size, max_length))
    out.push_back({m.to_query(h.ids), h.logprob, h.complete});
  return out;
}

// Most likely output under beam search.
inline linear_query decode(const parser_model& m, const std::vector<std::string>& question, std::size_t beam_size,
                           std::size_t max_length) {
  auto best = beam_search_ids(m, m.source_ids(question), beam_size, max_length);
  return m.to_query(best.front().ids);
}

}  // namespace semparse

#endif  // SEMPARSE_BEAM_SEARCH_HPP
