#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bias_lens/corpus.hpp"
#include "bias_lens/rng.hpp"
#include "bias_lens/scorer.hpp"

namespace bias_lens {

// Bias-attribute words for one category: pairs (gender) or triples (race,
// religion). Entries are lowercase and may carry punctuation ("mr.").
struct AttributeWordSet {
  std::string category;
  std::vector<std::vector<std::string>> tuples;
};

void validate(const AttributeWordSet& set);

// {"sets": [{"category": ..., "tuples": [[...], ...]}, ...]}
std::vector<AttributeWordSet> load_attribute_word_sets(const std::filesystem::path& path);

// Whitespace-delimited scan of `text`. Each token whose lowercase form (after
// peeling surrounding punctuation) is in some tuple is swapped with
// probability `swap_prob` for another member of the first tuple listing it:
// the partner for pairs, uniform over the other two for triples. One uniform
// draw per matched token, plus one index draw for triple swaps. Whitespace,
// punctuation and the case of the first letter are preserved.
std::string cda_swap_text(std::string_view text, const std::vector<AttributeWordSet>& sets,
                          double swap_prob, Rng& rng);

// Swaps attribute words in context and question (in that order) using only
// the sets whose category matches the instance's. Candidates and gold are
// untouched.
QAInstance cda_augment(const QAInstance& instance, const std::vector<AttributeWordSet>& sets,
                       double swap_prob, std::uint32_t seed);

Dataset cda_augment(const Dataset& dataset, const std::vector<AttributeWordSet>& sets,
                    double swap_prob, std::uint32_t seed);

inline constexpr std::string_view kDefaultFairnessStatement =
    "We should treat people from different socioeconomic statuses, sexual orientations, "
    "religions, races, physical appearances, nationalities, gender identities, disabilities, "
    "and ages equally.";

// statement + "\n" + prompt; an empty statement returns the prompt unchanged.
std::string nl_intervention(std::string_view prompt, std::string_view statement);

// Prepends a fairness statement to every input before delegating.
class InterventionScorer : public Scorer {
 public:
  InterventionScorer(const Scorer& inner, std::string statement)
      : inner_(inner), statement_(std::move(statement)) {}

  ScorerMode mode() const override { return inner_.mode(); }
  CandidateDistribution score(std::string_view input_text,
                              const std::vector<Candidate>& candidates) const override {
    return inner_.score(nl_intervention(input_text, statement_), candidates);
  }
  std::optional<std::size_t> decode(std::string_view input_text,
                                    const std::vector<Candidate>& candidates) const override {
    return inner_.decode(nl_intervention(input_text, statement_), candidates);
  }

 private:
  const Scorer& inner_;
  std::string statement_;
};

}  // namespace bias_lens
