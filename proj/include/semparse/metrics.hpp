// Answer-level precision/recall/F1 and the approximate randomization test.

#ifndef SEMPARSE_METRICS_HPP
#define SEMPARSE_METRICS_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <semparse/geo.hpp>

namespace semparse {

struct prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Per-item evaluation outcome: an exactly correct answer is always non-empty.
struct outcome {
  bool correct = false;
  bool nonempty = false;
};

inline prf f1_from_counts(std::size_t correct, std::size_t nonempty, std::size_t total) {
  prf r;
  if (total == 0 || nonempty == 0) return r;
  r.recall = static_cast<double>(correct) / static_cast<double>(total);
  r.precision = static_cast<double>(correct) / static_cast<double>(nonempty);
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

inline std::vector<outcome> outcomes(std::span<const answer> predictions, std::span<const answer> golds) {
  if (predictions.size() != golds.size())
    throw std::invalid_argument("predictions and golds differ in length: " + std::to_string(predictions.size()) +
                                " vs " + std::to_string(golds.size()));
  std::vector<outcome> out(predictions.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].nonempty = !predictions[i].is_empty();
    out[i].correct = out[i].nonempty && predictions[i] == golds[i];
  }
  return out;
}

inline prf corpus_f1(std::span<const outcome> items) {
  std::size_t correct = 0, nonempty = 0;
  for (const auto& o : items) {
    correct += o.correct;
    nonempty += o.nonempty;
  }
  return f1_from_counts(correct, nonempty, items.size());
}

// Recall over all items, precision over non-empty predictions.
inline prf corpus_f1(std::span<const answer> predictions, std::span<const answer> golds) {
  auto o = outcomes(predictions, golds);
  return corpus_f1(std::span<const outcome>(o));
}

// Paired approximate randomization on |F1(A) - F1(B)|: each item's pair of
// outcomes is swapped with probability 1/2. Returns (c + 1) / (rounds + 1).
inline double approx_randomization_test(std::span<const outcome> a, std::span<const outcome> b, std::size_t rounds,
                                        std::uint64_t seed) {
  if (a.size() != b.size()) throw std::invalid_argument("systems evaluated on different numbers of items");
  if (rounds < 1000) throw std::invalid_argument("approximate randomization needs at least 1000 rounds");
  const double observed = std::abs(corpus_f1(a).f1 - corpus_f1(b).f1);
  std::mt19937_64 rng(seed);
  std::size_t at_least = 0;
  const std::size_t n = a.size();
  for (std::size_t r = 0; r < rounds; ++r) {
    std::size_t ca = 0, na = 0, cb = 0, nb = 0;
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 64 == 0) bits = rng();
      const bool swap = bits & 1u;
      bits >>= 1;
      const outcome& x = swap ? b[i] : a[i];
      const outcome& y = swap ? a[i] : b[i];
      ca += x.correct;
      na += x.nonempty;
      cb += y.correct;
      nb += y.nonempty;
    }
    const double d = std::abs(f1_from_counts(ca, na, n).f1 - f1_from_counts(cb, nb, n).f1);
    if (d >= observed - 1e-12) ++at_least;
  }
  return static_cast<double>(at_least + 1) / static_cast<double>(rounds + 1);
}

// Flags-only form: every prediction is taken to be non-empty.
inline double approx_randomization_test(std::span<const int> correct_a, std::span<const int> correct_b,
                                        std::size_t rounds, std::uint64_t seed) {
  if (correct_a.size() != correct_b.size()) throw std::invalid_argument("systems evaluated on different numbers of items");
  std::vector<outcome> a(correct_a.size()), b(correct_b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = {correct_a[i] != 0, true};
    b[i] = {correct_b[i] != 0, true};
  }
  return approx_randomization_test(std::span<const outcome>(a), std::span<const outcome>(b), rounds, seed);
}

}  // namespace semparse

#endif  // SEMPARSE_METRICS_HPP
