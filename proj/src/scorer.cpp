#include "bias_lens/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "bias_lens/error.hpp"
#include "bias_lens/verbalizer.hpp"

namespace bias_lens {

CandidateDistribution::CandidateDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ValidationError("distribution must be non-empty");
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) throw ValidationError("distribution has a negative or non-finite entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw ValidationError("distribution sums to " + std::to_string(sum) + ", not 1");
  }
}

std::size_t CandidateDistribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

CandidateDistribution score_classification(std::span<const double> logits) {
  if (logits.empty()) throw ValidationError("softmax of an empty logit vector");
  for (double z : logits) {
    if (!std::isfinite(z)) throw ValidationError("softmax input contains NaN or infinity");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return CandidateDistribution(std::move(out));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

CandidateDistribution score_generation(std::string_view input_text,
                                       const std::vector<Candidate>& candidates,
                                       const TokenLogprobFn& token_logprob_fn) {
  if (candidates.empty()) throw ValidationError("no candidates to score");
  std::vector<double> normalized;
  normalized.reserve(candidates.size());
  for (const auto& candidate : candidates) {
    const auto tokens = tokenize(candidate.text);
    if (tokens.empty()) {
      throw ValidationError("candidate '" + candidate.text + "' is empty after tokenization");
    }
    const auto logprobs = token_logprob_fn(input_text, tokens);
    if (logprobs.size() != tokens.size()) {
      throw RuntimeError("token log-prob function returned " + std::to_string(logprobs.size()) +
                         " values for " + std::to_string(tokens.size()) + " tokens");
    }
    const double sum = std::accumulate(logprobs.begin(), logprobs.end(), 0.0);
    normalized.push_back(sum / static_cast<double>(tokens.size()));
  }
  return score_classification(normalized);
}

Prediction predict(const QAInstance& instance, const Scorer& scorer) {
  const std::string text = verbalize_instance(instance.question, instance.candidates, instance.context);
  CandidateDistribution dist = scorer.score(text, instance.candidates);
  if (dist.size() != instance.candidates.size()) {
    throw RuntimeError("scorer returned " + std::to_string(dist.size()) + " probabilities for " +
                       std::to_string(instance.candidates.size()) + " candidates");
  }
  std::size_t index = dist.argmax();
  if (auto decoded = scorer.decode(text, instance.candidates)) {
    if (*decoded >= instance.candidates.size()) throw RuntimeError("decoded answer out of range");
    index = *decoded;
  }
  return Prediction{index, std::move(dist)};
}

TableScorer TableScorer::load(const std::filesystem::path& path, ScorerMode mode) {
  TableScorer table(mode);
  for_each_jsonl_record(path, [&](std::size_t, const nlohmann::json& record) {
    std::optional<std::size_t> predicted;
    if (record.contains("predicted_index") && !record.at("predicted_index").is_null()) {
      predicted = record.at("predicted_index").get<std::size_t>();
    }
    table.add(record.at("input_text").get<std::string>(),
              record.at("probs").get<std::vector<double>>(), predicted);
  });
  return table;
}

void TableScorer::add(std::string input_text, std::vector<double> probs,
                      std::optional<std::size_t> predicted_index) {
  CandidateDistribution check(probs);
  if (predicted_index && *predicted_index >= check.size()) {
    throw ValidationError("table predicted_index out of range");
  }
  entries_[std::move(input_text)] = Entry{std::move(probs), predicted_index};
}

const TableScorer::Entry& TableScorer::lookup(std::string_view input_text,
                                              std::size_t n_candidates) const {
  auto it = entries_.find(std::string(input_text));
  if (it == entries_.end()) {
    throw RuntimeError("table scorer has no entry for input: " +
                       std::string(input_text.substr(0, 80)));
  }
  if (it->second.probs.size() != n_candidates) {
    throw RuntimeError("table entry has " + std::to_string(it->second.probs.size()) +
                       " probabilities, expected " + std::to_string(n_candidates));
  }
  return it->second;
}

CandidateDistribution TableScorer::score(std::string_view input_text,
                                         const std::vector<Candidate>& candidates) const {
  return CandidateDistribution(lookup(input_text, candidates.size()).probs);
}

std::optional<std::size_t> TableScorer::decode(std::string_view input_text,
                                               const std::vector<Candidate>& candidates) const {
  return lookup(input_text, candidates.size()).predicted_index;
}

}  // namespace bias_lens
