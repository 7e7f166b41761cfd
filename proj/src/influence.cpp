#include "bias_lens/influence.hpp"

#include <algorithm>
#include <cmath>

#include "bias_lens/error.hpp"
#include "bias_lens/verbalizer.hpp"

namespace bias_lens {

namespace {

void check_axis(const CandidateDistribution& dist, const BiasAxis& axis) {
  const std::size_t n = dist.size();
  if (axis.sg >= n || axis.neg_sg >= n || axis.unknown >= n || axis.sg == axis.neg_sg ||
      axis.sg == axis.unknown || axis.neg_sg == axis.unknown) {
    throw ValidationError("bias axis does not index three distinct candidates");
  }
}

// d(share)/dp written into `out` (zero outside the SG/NEG_SG slots).
void add_share_gradient(const CandidateDistribution& dist, const BiasAxis& axis, double scale,
                        std::vector<double>& out) {
  const double sg = dist[axis.sg];
  const double neg = dist[axis.neg_sg];
  const double mass = sg + neg;
  if (mass < kDegenerateMass) return;
  out[axis.sg] += scale * neg / (mass * mass);
  out[axis.neg_sg] -= scale * sg / (mass * mass);
}

}  // namespace

double stereotype_share(const CandidateDistribution& dist, const BiasAxis& axis) {
  check_axis(dist, axis);
  const double sg = dist[axis.sg];
  const double mass = sg + dist[axis.neg_sg];
  if (mass < kDegenerateMass) return 0.5;
  return sg / mass;
}

double stereotype_lean(const CandidateDistribution& dist, const BiasAxis& axis) {
  check_axis(dist, axis);
  const double sg = dist[axis.sg];
  const double neg = dist[axis.neg_sg];
  const double mass = sg + neg;
  if (mass < kDegenerateMass) return 0.0;
  return (sg - neg) / mass;
}

double bias_level(const CandidateDistribution& dist_given_query,
                  const CandidateDistribution& dist_given_neutral, const BiasAxis& axis) {
  if (dist_given_query.size() != dist_given_neutral.size()) {
    throw ValidationError("parallel distributions have different sizes");
  }
  return stereotype_share(dist_given_query, axis) - stereotype_share(dist_given_neutral, axis);
}

double mitigation_loss(double total) { return std::max(total, 0.0); }

BiasAssessment assess(const QAInstance& query, std::size_t answer_index,
                      std::span<const ReferencePair> pairs, const Scorer& scorer) {
  if (pairs.empty()) throw ValidationError("assess needs at least one reference pair");
  BiasAssessment out;
  out.query_id = query.id;
  out.per_perspective.reserve(pairs.size());
  for (const auto& pair : pairs) {
    const BiasAxis axis = pair.ruler.axis();
    const auto [given_neutral, given_query] = build_parallel_queries(query, answer_index, pair);
    const auto dist_neutral = scorer.score(given_neutral.text, given_neutral.target_candidates);
    const auto dist_query = scorer.score(given_query.text, given_query.target_candidates);
    const double level = bias_level(dist_query, dist_neutral, axis);
    out.per_perspective.push_back({pair.perspective, level});
    out.total += level;
  }
  out.loss = mitigation_loss(out.total);
  return out;
}

LossAndGradient mitigation_loss_and_gradient(const TrainableScorer& scorer,
                                             std::span<const QAInstance> batch,
                                             std::span<const ReferencePair> pairs) {
  if (pairs.empty()) throw ValidationError("mitigation needs at least one reference pair");
  LossAndGradient out;
  out.gradient.assign(scorer.parameters().size(), 0.0);
  if (batch.empty()) return out;
  const double scale = 1.0 / static_cast<double>(batch.size());

  std::vector<BiasAxis> axes;
  axes.reserve(pairs.size());
  for (const auto& pair : pairs) axes.push_back(pair.ruler.axis());

  for (const auto& instance : batch) {
    if (!instance.predicted_index) {
      throw ValidationError("instance " + instance.id + " has no predicted answer for mitigation");
    }
    // Inputs alternate [given_neutral_k, given_query_k] for k = 0..K-1.
    std::vector<ScoredInput> inputs;
    inputs.reserve(2 * pairs.size());
    for (const auto& pair : pairs) {
      auto [given_neutral, given_query] =
          build_parallel_queries(instance, *instance.predicted_index, pair);
      inputs.push_back({std::move(given_neutral.text), std::move(given_neutral.target_candidates)});
      inputs.push_back({std::move(given_query.text), std::move(given_query.target_candidates)});
    }
    auto objective = [&](std::span<const CandidateDistribution> dists,
                         std::vector<std::vector<double>>& dloss_dprobs) {
      double total = 0.0;
      for (std::size_t k = 0; k < axes.size(); ++k) {
        total += bias_level(dists[2 * k + 1], dists[2 * k], axes[k]);
      }
      const double loss = mitigation_loss(total);
      // ReLU subgradient is 0 at total == 0.
      if (total > 0.0) {
        for (std::size_t k = 0; k < axes.size(); ++k) {
          add_share_gradient(dists[2 * k + 1], axes[k], scale, dloss_dprobs[2 * k + 1]);
          add_share_gradient(dists[2 * k], axes[k], -scale, dloss_dprobs[2 * k]);
        }
      }
      return scale * loss;
    };
    const auto part = toy_loss_and_gradient(scorer, inputs, objective);
    out.loss += part.loss;
    for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] += part.gradient[i];
  }
  return out;
}

std::string_view to_string(DetectionClass label) {
  switch (label) {
    case DetectionClass::kBiased: return "BIASED";
    case DetectionClass::kNeutral: return "NEUTRAL";
    case DetectionClass::kAntiBiased: return "ANTI_BIASED";
  }
  return "NEUTRAL";
}

DetectionClass parse_detection_class(std::string_view text) {
  if (text == "BIASED") return DetectionClass::kBiased;
  if (text == "NEUTRAL") return DetectionClass::kNeutral;
  if (text == "ANTI_BIASED") return DetectionClass::kAntiBiased;
  throw ValidationError("unknown detection label '" + std::string(text) + "'");
}

DetectionLabel detect_label(const BiasAssessment& assessment, double threshold) {
  if (!(threshold > 0.0)) throw ValidationError("detection threshold must be positive");
  DetectionLabel out;
  out.threshold = threshold;
  if (assessment.total > threshold) {
    out.label = DetectionClass::kBiased;
  } else if (assessment.total < -threshold) {
    out.label = DetectionClass::kAntiBiased;
  } else {
    out.label = DetectionClass::kNeutral;
  }
  return out;
}

DetectionReport score_detections(std::span<const DetectionClass> gold,
                                 std::span<const DetectionClass> predicted, double threshold) {
  if (gold.size() != predicted.size()) throw ValidationError("gold/predicted size mismatch");
  if (gold.empty()) throw ValidationError("empty dataset");
  DetectionReport report;
  report.threshold = threshold;
  report.n = gold.size();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++report.confusion[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(predicted[i])];
  }
  for (std::size_t c = 0; c < kDetectionClassCount; ++c) {
    auto& scores = report.per_class[c];
    scores.true_positive = report.confusion[c][c];
    for (std::size_t other = 0; other < kDetectionClassCount; ++other) {
      scores.support += report.confusion[c][other];
      scores.predicted += report.confusion[other][c];
    }
    if (scores.predicted > 0) {
      scores.precision = static_cast<double>(scores.true_positive) / static_cast<double>(scores.predicted);
    }
    if (scores.support > 0) {
      scores.recall = static_cast<double>(scores.true_positive) / static_cast<double>(scores.support);
    }
  }
  return report;
}

DetectionReport detection_report(std::span<const LabeledInstance> labeled,
                                 std::span<const ReferencePair> pairs, const Scorer& scorer,
                                 double threshold) {
  if (labeled.empty()) throw ValidationError("empty dataset");
  std::vector<DetectionClass> gold;
  std::vector<DetectionClass> predicted;
  gold.reserve(labeled.size());
  predicted.reserve(labeled.size());
  for (const auto& item : labeled) {
    const auto assessment = assess(item.instance, item.answer_index, pairs, scorer);
    gold.push_back(item.gold);
    predicted.push_back(detect_label(assessment, threshold).label);
  }
  return score_detections(gold, predicted, threshold);
}

nlohmann::ordered_json to_json(const DetectionReport& report) {
  auto optional_number = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    if (v) return *v;
    return nullptr;
  };
  nlohmann::ordered_json j;
  j["threshold"] = report.threshold;
  j["n"] = report.n;
  nlohmann::ordered_json classes;
  for (std::size_t c = 0; c < kDetectionClassCount; ++c) {
    const auto& s = report.per_class[c];
    nlohmann::ordered_json row;
    row["support"] = s.support;
    row["predicted"] = s.predicted;
    row["precision"] = optional_number(s.precision);
    row["recall"] = optional_number(s.recall);
    classes[std::string(to_string(static_cast<DetectionClass>(c)))] = row;
  }
  j["classes"] = classes;
  nlohmann::ordered_json confusion;
  for (std::size_t g = 0; g < kDetectionClassCount; ++g) {
    nlohmann::ordered_json row;
    for (std::size_t p = 0; p < kDetectionClassCount; ++p) {
      row[std::string(to_string(static_cast<DetectionClass>(p)))] = report.confusion[g][p];
    }
    confusion[std::string(to_string(static_cast<DetectionClass>(g)))] = row;
  }
  j["confusion"] = confusion;
  return j;
}

}  // namespace bias_lens
