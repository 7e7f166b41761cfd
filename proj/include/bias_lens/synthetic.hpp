#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bias_lens/corpus.hpp"
#include "bias_lens/toy_scorer.hpp"

namespace bias_lens {

// Generator for a small BBQ-like world: one category ("Gender identity"),
// several perspectives each with a stereotyped group, a negative question and
// a disambiguating evidence sentence.
struct SyntheticWorldConfig {
  std::size_t n_train = 200;
  std::size_t n_eval = 200;
  std::uint32_t seed = 2024;
  double ambiguous_fraction = 0.5;

  // Weights of the hand-built initial scorer.
  double mention_weight = 1.0;     // interaction[g][g] for every group word g
  double unknown_weight = 2.5;     // unary weight of each "unknown" phrase
  double stereotype_weight = 0.4;  // interaction[SG word][cue word]
};

struct SyntheticWorld {
  Dataset train;
  Dataset eval;
  std::vector<ReferencePair> reference_pool;
  Vocabulary vocabulary;
};

SyntheticWorld make_synthetic_world(const SyntheticWorldConfig& config);

// A scorer that answers by counting group mentions and falls back to the
// unknown candidate, plus the stereotype association when
// `stereotype_weight` is non-zero.
ToyTrainableScorer make_synthetic_scorer(const SyntheticWorld& world,
                                         const SyntheticWorldConfig& config);

}  // namespace bias_lens
