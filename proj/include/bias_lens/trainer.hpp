#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bias_lens/corpus.hpp"
#include "bias_lens/scorer.hpp"
#include "bias_lens/toy_scorer.hpp"

namespace bias_lens {

enum class OptimizerKind { kAdamW, kSgd };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view text);

struct TrainConfig {
  std::size_t k_pairs = 5;
  std::size_t qa_batch = 3;
  std::size_t bm_batch = 2;
  double learning_rate = 1e-6;
  std::size_t max_epochs = 20;
  std::uint32_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdamW;

  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Held out from qa_data to pick the best epoch by QA accuracy.
  double validation_fraction = 0.1;
  bool select_best_epoch = true;

  // Mitigation batches per epoch, as a fraction of one full pass.
  double mitigation_ratio = 1.0;
  bool enable_mitigation = true;
  double qa_weight = 1.0;
  double bm_weight = 1.0;

  void validate() const;
};

nlohmann::ordered_json to_json(const TrainConfig& config);
// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(std::span<double> params, std::span<const double> gradient, double lr) = 0;
};

class Sgd : public Optimizer {
 public:
  void step(std::span<double> params, std::span<const double> gradient, double lr) override;
};

// Adam with decoupled weight decay.
class AdamW : public Optimizer {
 public:
  AdamW(double beta1, double beta2, double epsilon, double weight_decay)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {}

  void step(std::span<double> params, std::span<const double> gradient, double lr) override;

 private:
  double beta1_, beta2_, epsilon_, weight_decay_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config);

// One update on the mean gold cross-entropy. Returns the loss before the
// update; a zero loss leaves parameters and optimizer state untouched.
double qa_step(std::span<const QAInstance> batch, Scorer& scorer, Optimizer& optimizer, double lr,
               double weight = 1.0);

// One update on the mean mitigation loss, using each instance's
// predicted_index as its answer. Zero loss means no update.
double mitigation_step(std::span<const QAInstance> batch, std::span<const ReferencePair> pairs,
                       Scorer& scorer, Optimizer& optimizer, double lr, double weight = 1.0);

struct TrainStepRecord {
  std::size_t epoch = 0;
  double qa_loss = 0.0;
  double bm_loss = 0.0;
  double accuracy_val = 0.0;
};

nlohmann::ordered_json to_json(const TrainStepRecord& record);

struct TrainResult {
  std::vector<TrainStepRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
};

// Fills predicted_index for every instance from the scorer's current parameters.
void refresh_predictions(std::vector<QAInstance>& instances, const Scorer& scorer);

// Alternating multi-task fine-tuning. Each epoch: QA steps over the training
// split, fresh predictions, then mitigation steps. `scorer` ends holding the
// parameters of the best epoch by validation accuracy (latest on ties) when
// select_best_epoch is set, otherwise those of the last epoch.
TrainResult train(const Dataset& qa_data, std::span<const ReferencePair> pairs, Scorer& scorer,
                  const TrainConfig& config);

}  // namespace bias_lens
