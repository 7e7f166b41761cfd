#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bias_lens/scorer.hpp"

namespace bias_lens {

// Sparse linear dependence of one logit on the parameter vector.
struct LinearFeatures {
  std::vector<std::pair<std::size_t, double>> terms;  // (parameter index, coefficient)
};

struct ForwardPass {
  std::vector<LinearFeatures> features;  // one per candidate
  std::vector<double> logits;
  CandidateDistribution dist;
};

// A scorer whose logits are linear in its parameters, so gradients of any
// objective over its output probabilities follow from the softmax Jacobian.
class TrainableScorer : public Scorer {
 public:
  bool trainable() const override { return true; }

  virtual ForwardPass forward(std::string_view input_text,
                              const std::vector<Candidate>& candidates) const = 0;

  CandidateDistribution score(std::string_view input_text,
                              const std::vector<Candidate>& candidates) const override {
    return forward(input_text, candidates).dist;
  }

  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;
};

// Adds sum_c dloss_dlogits[c] * d(logit_c)/d(theta) into `gradient`.
void accumulate_logit_gradient(const ForwardPass& pass, std::span<const double> dloss_dlogits,
                               std::span<double> gradient);

// dL/dz from dL/dp through the softmax: p_c * (g_c - sum_j p_j g_j).
std::vector<double> softmax_backward(const CandidateDistribution& dist,
                                     std::span<const double> dloss_dprobs);

class Vocabulary {
 public:
  Vocabulary() = default;
  // Sorted, de-duplicated.
  explicit Vocabulary(std::vector<std::string> tokens);

  // Every token produced by tokenize() over `texts`.
  static Vocabulary from_texts(const std::vector<std::string>& texts);

  std::optional<std::size_t> find(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Desk-scale stand-in for a neural QA model. For candidate slot c with tokens
// T_c and prompt token counts n_s:
//
//   logit_c = slot_bias[c] + sum_{t in T_c} ( unary[t] + sum_s n_s * interaction[t][s] )
//
// Out-of-vocabulary tokens contribute nothing.
class ToyTrainableScorer : public TrainableScorer {
 public:
  static constexpr std::size_t kDefaultSlots = 26;

  ToyTrainableScorer(Vocabulary vocabulary, std::size_t slots = kDefaultSlots);

  ScorerMode mode() const override { return ScorerMode::kClassification; }
  ForwardPass forward(std::string_view input_text,
                      const std::vector<Candidate>& candidates) const override;

  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }

  const Vocabulary& vocabulary() const { return vocabulary_; }
  std::size_t slots() const { return slots_; }

  double& slot_bias(std::size_t slot);
  double& unary(std::string_view token);
  double& interaction(std::string_view candidate_token, std::string_view prompt_token);

  nlohmann::ordered_json to_checkpoint(const nlohmann::ordered_json& config,
                                       std::optional<std::uint32_t> seed) const;
  static ToyTrainableScorer from_checkpoint(const nlohmann::json& checkpoint);

  void save(const std::filesystem::path& path, const nlohmann::ordered_json& config = nullptr,
            std::optional<std::uint32_t> seed = std::nullopt) const;
  static ToyTrainableScorer load(const std::filesystem::path& path);

 private:
  std::size_t unary_offset() const { return slots_; }
  std::size_t interaction_offset() const { return slots_ + vocabulary_.size(); }
  std::size_t token_index(std::string_view token) const;

  Vocabulary vocabulary_;
  std::size_t slots_;
  std::vector<double> params_;
};

// One scorer call contributing to an objective.
struct ScoredInput {
  std::string text;
  std::vector<Candidate> candidates;
};

// Given the distributions for each ScoredInput, returns the loss and writes
// dL/dp for each input into `dloss_dprobs` (pre-sized to match).
using ProbabilityObjective = std::function<double(
    std::span<const CandidateDistribution> dists, std::vector<std::vector<double>>& dloss_dprobs)>;

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Analytic gradient of `objective` with respect to all scorer parameters.
LossAndGradient toy_loss_and_gradient(const TrainableScorer& scorer,
                                      std::span<const ScoredInput> inputs,
                                      const ProbabilityObjective& objective);

// Mean cross-entropy of the gold answers of RACE-rendered instances, computed
// in log-space from the logits.
LossAndGradient cross_entropy_loss_and_gradient(const TrainableScorer& scorer,
                                                std::span<const QAInstance> batch);

}  // namespace bias_lens
