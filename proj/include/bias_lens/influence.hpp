#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bias_lens/corpus.hpp"
#include "bias_lens/scorer.hpp"
#include "bias_lens/toy_scorer.hpp"

namespace bias_lens {

// Below this the SG/NEG_SG mass is treated as absent and the share is 0.5.
inline constexpr double kDegenerateMass = 1e-12;

// p_SG / (p_SG + p_NEG_SG), ignoring the UNKNOWN candidate's mass.
double stereotype_share(const CandidateDistribution& dist, const BiasAxis& axis);

// 2 * share - 1, written as (p_SG - p_NEG_SG) / (p_SG + p_NEG_SG) so that
// swapping the two labels negates it bit for bit. 0 when the mass is absent.
double stereotype_lean(const CandidateDistribution& dist, const BiasAxis& axis);

// Change in the ruler's stereotype share caused by replacing the neutral
// demonstration with the query instance. Result lies in [-1, 1].
double bias_level(const CandidateDistribution& dist_given_query,
                  const CandidateDistribution& dist_given_neutral, const BiasAxis& axis);

struct PerspectiveLevel {
  std::string perspective;
  double level = 0.0;
};

struct BiasAssessment {
  std::string query_id;
  std::vector<PerspectiveLevel> per_perspective;
  double total = 0.0;  // sum over perspectives, in [-K, K]
  double loss = 0.0;   // max(total, 0)
};

double mitigation_loss(double total);

// Scores both parallel queries for every pair and sums the per-pair levels.
BiasAssessment assess(const QAInstance& query, std::size_t answer_index,
                      std::span<const ReferencePair> pairs, const Scorer& scorer);

// Mean mitigation loss over `batch` (each instance answered with its
// predicted_index) and its gradient through both parallel-query terms.
LossAndGradient mitigation_loss_and_gradient(const TrainableScorer& scorer,
                                             std::span<const QAInstance> batch,
                                             std::span<const ReferencePair> pairs);

enum class DetectionClass { kBiased = 0, kNeutral = 1, kAntiBiased = 2 };
inline constexpr std::size_t kDetectionClassCount = 3;

std::string_view to_string(DetectionClass label);
DetectionClass parse_detection_class(std::string_view text);

inline constexpr double kDefaultDetectionThreshold = 0.05;

struct DetectionLabel {
  DetectionClass label = DetectionClass::kNeutral;
  double threshold = kDefaultDetectionThreshold;
};

DetectionLabel detect_label(const BiasAssessment& assessment,
                            double threshold = kDefaultDetectionThreshold);

// A query instance with an appended answer and the expected detector output.
struct LabeledInstance {
  QAInstance instance;
  std::size_t answer_index = 0;
  DetectionClass gold = DetectionClass::kNeutral;
};

struct ClassScores {
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
  std::size_t true_positive = 0;
  std::optional<double> precision;  // absent when nothing was predicted
  std::optional<double> recall;     // absent when the class has no gold items
};

struct DetectionReport {
  double threshold = kDefaultDetectionThreshold;
  std::size_t n = 0;
  // confusion[gold][predicted]
  std::array<std::array<std::size_t, kDetectionClassCount>, kDetectionClassCount> confusion{};
  std::array<ClassScores, kDetectionClassCount> per_class{};
};

// Precision/recall per class from (gold, predicted) pairs.
DetectionReport score_detections(std::span<const DetectionClass> gold,
                                 std::span<const DetectionClass> predicted, double threshold);

DetectionReport detection_report(std::span<const LabeledInstance> labeled,
                                 std::span<const ReferencePair> pairs, const Scorer& scorer,
                                 double threshold = kDefaultDetectionThreshold);

nlohmann::ordered_json to_json(const DetectionReport& report);

}  // namespace bias_lens
