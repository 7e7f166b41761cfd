#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bias_lens/corpus.hpp"

namespace bias_lens {

// Probability simplex aligned to a candidate list. Construction checks that
// entries are finite, non-negative and sum to 1 within 1e-9.
class CandidateDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit CandidateDistribution(std::vector<double> probs);

  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::size_t size() const { return probs_.size(); }

  // Lowest index among the maxima.
  std::size_t argmax() const;

 private:
  std::vector<double> probs_;
};

// Numerically stable softmax; throws ValidationError on empty or non-finite input.
CandidateDistribution score_classification(std::span<const double> logits);

// Lowercased alphanumeric runs; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view text);

// Teacher-forced per-token log-probabilities of `target_tokens` given `input_text`.
using TokenLogprobFn =
    std::function<std::vector<double>(std::string_view input_text,
                                      const std::vector<std::string>& target_tokens)>;

// Length-normalised sequence log-likelihood per candidate (sum of token
// log-probs / token count), then a softmax across candidates.
CandidateDistribution score_generation(std::string_view input_text,
                                       const std::vector<Candidate>& candidates,
                                       const TokenLogprobFn& token_logprob_fn);

enum class ScorerMode { kClassification, kGeneration };

class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual ScorerMode mode() const = 0;
  virtual bool trainable() const { return false; }

  // Must be deterministic and safe under concurrent const use.
  virtual CandidateDistribution score(std::string_view input_text,
                                      const std::vector<Candidate>& candidates) const = 0;

  // Discrete output when it is produced separately from `score` (a decoded
  // answer string for generation models). nullopt means "argmax of score".
  virtual std::optional<std::size_t> decode(std::string_view /*input_text*/,
                                            const std::vector<Candidate>& /*candidates*/) const {
    return std::nullopt;
  }
};

struct Prediction {
  std::size_t index = 0;
  CandidateDistribution dist;
};

// Scores the RACE rendering of `instance`. Index is the scorer's decoded
// answer if it has one, otherwise the argmax (ties to the lowest index).
Prediction predict(const QAInstance& instance, const Scorer& scorer);

// Looks up fixed distributions by exact input text.
class TableScorer : public Scorer {
 public:
  struct Entry {
    std::vector<double> probs;
    std::optional<std::size_t> predicted_index;
  };

  explicit TableScorer(ScorerMode mode = ScorerMode::kClassification) : mode_(mode) {}

  // JSONL records {"input_text", "probs", "predicted_index"?}.
  static TableScorer load(const std::filesystem::path& path,
                          ScorerMode mode = ScorerMode::kClassification);

  void add(std::string input_text, std::vector<double> probs,
           std::optional<std::size_t> predicted_index = std::nullopt);

  ScorerMode mode() const override { return mode_; }
  CandidateDistribution score(std::string_view input_text,
                              const std::vector<Candidate>& candidates) const override;
  std::optional<std::size_t> decode(std::string_view input_text,
                                    const std::vector<Candidate>& candidates) const override;

 private:
  const Entry& lookup(std::string_view input_text, std::size_t n_candidates) const;

  ScorerMode mode_;
  std::unordered_map<std::string, Entry> entries_;
};

// Generation-mode scorer over an external token log-probability function.
class GenerationScorer : public Scorer {
 public:
  explicit GenerationScorer(TokenLogprobFn fn) : fn_(std::move(fn)) {}

  ScorerMode mode() const override { return ScorerMode::kGeneration; }
  CandidateDistribution score(std::string_view input_text,
                              const std::vector<Candidate>& candidates) const override {
    return score_generation(input_text, candidates, fn_);
  }

 private:
  TokenLogprobFn fn_;
};

}  // namespace bias_lens
