#include "bias_lens/toy_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "bias_lens/error.hpp"
#include "bias_lens/verbalizer.hpp"

namespace bias_lens {

namespace {
constexpr const char* kCheckpointFormat = "bias_lens.toy_scorer.v1";
}

void accumulate_logit_gradient(const ForwardPass& pass, std::span<const double> dloss_dlogits,
                               std::span<double> gradient) {
  if (dloss_dlogits.size() != pass.features.size()) {
    throw ValidationError("logit gradient size does not match the candidate count");
  }
  for (std::size_t c = 0; c < pass.features.size(); ++c) {
    const double g = dloss_dlogits[c];
    if (g == 0.0) continue;
    for (const auto& [index, coefficient] : pass.features[c].terms) gradient[index] += g * coefficient;
  }
}

std::vector<double> softmax_backward(const CandidateDistribution& dist,
                                     std::span<const double> dloss_dprobs) {
  if (dloss_dprobs.size() != dist.size()) {
    throw ValidationError("probability gradient size does not match the distribution");
  }
  double weighted = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) weighted += dist[j] * dloss_dprobs[j];
  std::vector<double> out(dist.size());
  for (std::size_t c = 0; c < dist.size(); ++c) out[c] = dist[c] * (dloss_dprobs[c] - weighted);
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  std::sort(tokens_.begin(), tokens_.end());
  tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

Vocabulary Vocabulary::from_texts(const std::vector<std::string>& texts) {
  std::set<std::string> all;
  for (const auto& text : texts) {
    for (auto& token : tokenize(text)) all.insert(std::move(token));
  }
  return Vocabulary(std::vector<std::string>(all.begin(), all.end()));
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ToyTrainableScorer::ToyTrainableScorer(Vocabulary vocabulary, std::size_t slots)
    : vocabulary_(std::move(vocabulary)), slots_(slots) {
  if (slots_ == 0) throw ValidationError("toy scorer needs at least one candidate slot");
  const std::size_t v = vocabulary_.size();
  params_.assign(slots_ + v + v * v, 0.0);
}

std::size_t ToyTrainableScorer::token_index(std::string_view token) const {
  auto index = vocabulary_.find(token);
  if (!index) throw ValidationError("token '" + std::string(token) + "' is not in the vocabulary");
  return *index;
}

double& ToyTrainableScorer::slot_bias(std::size_t slot) {
  if (slot >= slots_) throw ValidationError("slot out of range");
  return params_[slot];
}

double& ToyTrainableScorer::unary(std::string_view token) {
  return params_[unary_offset() + token_index(token)];
}

double& ToyTrainableScorer::interaction(std::string_view candidate_token,
                                        std::string_view prompt_token) {
  return params_[interaction_offset() + token_index(candidate_token) * vocabulary_.size() +
                 token_index(prompt_token)];
}

ForwardPass ToyTrainableScorer::forward(std::string_view input_text,
                                        const std::vector<Candidate>& candidates) const {
  if (candidates.empty()) throw ValidationError("no candidates to score");
  if (candidates.size() > slots_) {
    throw ValidationError("toy scorer has " + std::to_string(slots_) + " slots, got " +
                          std::to_string(candidates.size()) + " candidates");
  }
  std::map<std::size_t, double> prompt_counts;
  for (const auto& token : tokenize(input_text)) {
    if (auto id = vocabulary_.find(token)) prompt_counts[*id] += 1.0;
  }

  const std::size_t v = vocabulary_.size();
  std::vector<LinearFeatures> features(candidates.size());
  std::vector<double> logits(candidates.size(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    auto& terms = features[c].terms;
    terms.emplace_back(c, 1.0);
    for (const auto& token : tokenize(candidates[c].text)) {
      auto id = vocabulary_.find(token);
      if (!id) continue;
      terms.emplace_back(unary_offset() + *id, 1.0);
      const std::size_t row = interaction_offset() + *id * v;
      for (const auto& [prompt_id, count] : prompt_counts) terms.emplace_back(row + prompt_id, count);
    }
    double z = 0.0;
    for (const auto& [index, coefficient] : terms) z += params_[index] * coefficient;
    logits[c] = z;
  }
  CandidateDistribution dist = score_classification(logits);
  return ForwardPass{std::move(features), std::move(logits), std::move(dist)};
}

nlohmann::ordered_json ToyTrainableScorer::to_checkpoint(const nlohmann::ordered_json& config,
                                                         std::optional<std::uint32_t> seed) const {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["vocabulary"] = vocabulary_.tokens();
  j["dims"] = {{"slots", slots_},
               {"vocabulary", vocabulary_.size()},
               {"parameters", params_.size()}};
  j["parameters"] = params_;
  j["config"] = config;
  if (seed) {
    j["seed"] = *seed;
  } else {
    j["seed"] = nullptr;
  }
  return j;
}

ToyTrainableScorer ToyTrainableScorer::from_checkpoint(const nlohmann::json& checkpoint) {
  if (checkpoint.value("format", std::string()) != kCheckpointFormat) {
    throw ValidationError("not a toy scorer checkpoint");
  }
  Vocabulary vocabulary(checkpoint.at("vocabulary").get<std::vector<std::string>>());
  if (vocabulary.size() != checkpoint.at("dims").at("vocabulary").get<std::size_t>()) {
    throw ValidationError("checkpoint vocabulary is not sorted and unique");
  }
  ToyTrainableScorer scorer(std::move(vocabulary),
                            checkpoint.at("dims").at("slots").get<std::size_t>());
  auto params = checkpoint.at("parameters").get<std::vector<double>>();
  if (params.size() != scorer.params_.size()) {
    throw ValidationError("checkpoint has " + std::to_string(params.size()) +
                          " parameters, expected " + std::to_string(scorer.params_.size()));
  }
  for (double p : params) {
    if (!std::isfinite(p)) throw ValidationError("checkpoint contains a non-finite parameter");
  }
  scorer.params_ = std::move(params);
  return scorer;
}

void ToyTrainableScorer::save(const std::filesystem::path& path,
                              const nlohmann::ordered_json& config,
                              std::optional<std::uint32_t> seed) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << to_checkpoint(config, seed).dump() << '\n';
  if (!out) throw RuntimeError("write failed for " + path.string());
}

ToyTrainableScorer ToyTrainableScorer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return from_checkpoint(j);
}

LossAndGradient toy_loss_and_gradient(const TrainableScorer& scorer,
                                      std::span<const ScoredInput> inputs,
                                      const ProbabilityObjective& objective) {
  std::vector<ForwardPass> passes;
  passes.reserve(inputs.size());
  std::vector<CandidateDistribution> dists;
  dists.reserve(inputs.size());
  std::vector<std::vector<double>> dloss_dprobs;
  for (const auto& input : inputs) {
    passes.push_back(scorer.forward(input.text, input.candidates));
    dists.push_back(passes.back().dist);
    dloss_dprobs.emplace_back(input.candidates.size(), 0.0);
  }

  LossAndGradient out;
  out.loss = objective(dists, dloss_dprobs);
  out.gradient.assign(scorer.parameters().size(), 0.0);
  for (std::size_t i = 0; i < passes.size(); ++i) {
    const auto dz = softmax_backward(passes[i].dist, dloss_dprobs[i]);
    accumulate_logit_gradient(passes[i], dz, out.gradient);
  }
  return out;
}

LossAndGradient cross_entropy_loss_and_gradient(const TrainableScorer& scorer,
                                                std::span<const QAInstance> batch) {
  LossAndGradient out;
  out.gradient.assign(scorer.parameters().size(), 0.0);
  if (batch.empty()) return out;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& instance : batch) {
    const auto pass = scorer.forward(
        verbalize_instance(instance.question, instance.candidates, instance.context),
        instance.candidates);
    const double top = *std::max_element(pass.logits.begin(), pass.logits.end());
    double sum = 0.0;
    for (double z : pass.logits) sum += std::exp(z - top);
    const double log_partition = top + std::log(sum);
    out.loss += scale * (log_partition - pass.logits[instance.gold_index]);

    std::vector<double> dz(pass.dist.size());
    for (std::size_t c = 0; c < dz.size(); ++c) {
      dz[c] = scale * (pass.dist[c] - (c == instance.gold_index ? 1.0 : 0.0));
    }
    accumulate_logit_gradient(pass, dz, out.gradient);
  }
  return out;
}

}  // namespace bias_lens
