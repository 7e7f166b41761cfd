#include "bias_lens/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bias_lens/error.hpp"
#include "bias_lens/influence.hpp"
#include "bias_lens/metrics.hpp"
#include "bias_lens/rng.hpp"

namespace bias_lens {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdamW ? "adamw" : "sgd";
}

OptimizerKind parse_optimizer_kind(std::string_view text) {
  if (text == "adamw" || text == "ADAMW") return OptimizerKind::kAdamW;
  if (text == "sgd" || text == "SGD") return OptimizerKind::kSgd;
  throw ValidationError("unknown optimizer '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (k_pairs == 0) throw ValidationError("k_pairs must be positive");
  if (qa_batch == 0 || bm_batch == 0) throw ValidationError("batch sizes must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be finite and non-negative");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ValidationError("validation_fraction must be in [0, 1)");
  }
  if (!(mitigation_ratio >= 0.0)) throw ValidationError("mitigation_ratio must be non-negative");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be non-negative");
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["k_pairs"] = c.k_pairs;
  j["qa_batch"] = c.qa_batch;
  j["bm_batch"] = c.bm_batch;
  j["learning_rate"] = c.learning_rate;
  j["max_epochs"] = c.max_epochs;
  j["seed"] = c.seed;
  j["optimizer"] = to_string(c.optimizer);
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["validation_fraction"] = c.validation_fraction;
  j["select_best_epoch"] = c.select_best_epoch;
  j["mitigation_ratio"] = c.mitigation_ratio;
  j["enable_mitigation"] = c.enable_mitigation;
  j["qa_weight"] = c.qa_weight;
  j["bm_weight"] = c.bm_weight;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.k_pairs = j.value("k_pairs", c.k_pairs);
  c.qa_batch = j.value("qa_batch", c.qa_batch);
  c.bm_batch = j.value("bm_batch", c.bm_batch);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.seed = j.value("seed", c.seed);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer_kind(j.at("optimizer").get<std::string>());
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.select_best_epoch = j.value("select_best_epoch", c.select_best_epoch);
  c.mitigation_ratio = j.value("mitigation_ratio", c.mitigation_ratio);
  c.enable_mitigation = j.value("enable_mitigation", c.enable_mitigation);
  c.qa_weight = j.value("qa_weight", c.qa_weight);
  c.bm_weight = j.value("bm_weight", c.bm_weight);
  c.validate();
  return c;
}

void Sgd::step(std::span<double> params, std::span<const double> gradient, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * gradient[i];
}

void AdamW::step(std::span<double> params, std::span<const double> gradient, double lr) {
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
    t_ = 0;
  }
  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = gradient[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    const double m_hat = m_[i] / correction1;
    const double v_hat = v_[i] / correction2;
    params[i] -= lr * weight_decay_ * params[i];
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
  }
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config) {
  if (config.optimizer == OptimizerKind::kSgd) return std::make_unique<Sgd>();
  return std::make_unique<AdamW>(config.beta1, config.beta2, config.epsilon, config.weight_decay);
}

namespace {

TrainableScorer& require_trainable(Scorer& scorer) {
  auto* trainable = dynamic_cast<TrainableScorer*>(&scorer);
  if (trainable == nullptr || !scorer.trainable()) {
    throw ValidationError("scorer is not trainable");
  }
  return *trainable;
}

double apply(TrainableScorer& scorer, Optimizer& optimizer, LossAndGradient lg, double lr,
             double weight) {
  if (lg.loss == 0.0) return 0.0;
  if (weight != 1.0) {
    for (double& g : lg.gradient) g *= weight;
  }
  optimizer.step(scorer.parameters(), lg.gradient, lr);
  return lg.loss;
}

}  // namespace

double qa_step(std::span<const QAInstance> batch, Scorer& scorer, Optimizer& optimizer, double lr,
               double weight) {
  auto& trainable = require_trainable(scorer);
  return apply(trainable, optimizer, cross_entropy_loss_and_gradient(trainable, batch), lr, weight);
}

double mitigation_step(std::span<const QAInstance> batch, std::span<const ReferencePair> pairs,
                       Scorer& scorer, Optimizer& optimizer, double lr, double weight) {
  auto& trainable = require_trainable(scorer);
  return apply(trainable, optimizer, mitigation_loss_and_gradient(trainable, batch, pairs), lr,
               weight);
}

nlohmann::ordered_json to_json(const TrainStepRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["qa_loss"] = r.qa_loss;
  j["bm_loss"] = r.bm_loss;
  j["accuracy_val"] = r.accuracy_val;
  return j;
}

void refresh_predictions(std::vector<QAInstance>& instances, const Scorer& scorer) {
  for (auto& instance : instances) instance.predicted_index = predict(instance, scorer).index;
}

namespace {

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
}

std::vector<QAInstance> gather(const std::vector<QAInstance>& pool,
                               std::span<const std::size_t> indices) {
  std::vector<QAInstance> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(pool[i]);
  return out;
}

double validation_accuracy(const std::vector<QAInstance>& instances, const Scorer& scorer) {
  if (instances.empty()) return 0.0;
  std::vector<PredictionRecord> records;
  records.reserve(instances.size());
  for (const auto& q : instances) records.push_back(make_record(q, predict(q, scorer)));
  return accuracy(records);
}

}  // namespace

TrainResult train(const Dataset& qa_data, std::span<const ReferencePair> pairs, Scorer& scorer,
                  const TrainConfig& config) {
  config.validate();
  if (qa_data.empty()) throw ValidationError("empty dataset");
  auto& trainable = require_trainable(scorer);
  if (config.enable_mitigation && pairs.empty()) {
    throw ValidationError("mitigation needs at least one reference pair");
  }

  TrainResult result;
  if (config.max_epochs == 0) return result;

  Rng rng(config.seed);
  std::vector<std::size_t> order(qa_data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng);
  const auto n_val = static_cast<std::size_t>(
      std::floor(config.validation_fraction * static_cast<double>(qa_data.size())));
  std::vector<QAInstance> validation =
      gather(qa_data.instances, std::span(order).first(n_val));
  std::vector<QAInstance> training = gather(qa_data.instances, std::span(order).subspan(n_val));
  if (training.empty()) throw ValidationError("validation split leaves no training data");
  const auto& selection_set = validation.empty() ? training : validation;

  auto optimizer = make_optimizer(config);
  std::vector<double> best_params(trainable.parameters().begin(), trainable.parameters().end());
  double best_accuracy = -1.0;

  std::vector<std::size_t> train_order(training.size());
  std::iota(train_order.begin(), train_order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    TrainStepRecord record;
    record.epoch = epoch;

    shuffle(train_order, rng);
    std::size_t qa_batches = 0;
    for (std::size_t start = 0; start < train_order.size(); start += config.qa_batch) {
      const auto count = std::min(config.qa_batch, train_order.size() - start);
      const auto batch = gather(training, std::span(train_order).subspan(start, count));
      record.qa_loss += qa_step(batch, scorer, *optimizer, config.learning_rate, config.qa_weight);
      ++qa_batches;
    }
    record.qa_loss /= static_cast<double>(qa_batches);

    if (config.enable_mitigation) {
      refresh_predictions(training, scorer);
      shuffle(train_order, rng);
      const std::size_t full_pass = (train_order.size() + config.bm_batch - 1) / config.bm_batch;
      const auto n_batches = static_cast<std::size_t>(
          std::ceil(config.mitigation_ratio * static_cast<double>(full_pass)));
      for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t start = (b * config.bm_batch) % train_order.size();
        const auto count = std::min(config.bm_batch, train_order.size() - start);
        const auto batch = gather(training, std::span(train_order).subspan(start, count));
        record.bm_loss +=
            mitigation_step(batch, pairs, scorer, *optimizer, config.learning_rate, config.bm_weight);
      }
      if (n_batches > 0) record.bm_loss /= static_cast<double>(n_batches);
    }

    record.accuracy_val = validation_accuracy(selection_set, scorer);
    if (record.accuracy_val >= best_accuracy) {
      best_accuracy = record.accuracy_val;
      result.best_epoch = epoch;
      best_params.assign(trainable.parameters().begin(), trainable.parameters().end());
    }
    result.history.push_back(record);
  }

  if (config.select_best_epoch) {
    std::copy(best_params.begin(), best_params.end(), trainable.parameters().begin());
  } else {
    result.best_epoch = config.max_epochs;
  }
  return result;
}

}  // namespace bias_lens
