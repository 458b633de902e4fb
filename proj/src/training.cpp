#include "revsum/training.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "revsum/errors.hpp"
#include "revsum/ops.hpp"

namespace revsum {

AdamState::AdamState(const std::vector<Tensor>& params, AdamConfig config)
    : config_(config) {
  for (const auto& p : params) {
    first_.emplace_back(p.size(), 0.0);
    second_.emplace_back(p.size(), 0.0);
  }
}

void adam_step(AdamState& state, std::span<Tensor> params) {
  if (params.size() != state.first_.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) +
                     " parameters but state tracks " +
                     std::to_string(state.first_.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != state.first_[i].size()) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) +
                       " has shape " + shape_string(params[i].shape()) +
                       " but its moments hold " +
                       std::to_string(state.first_[i].size()) + " values");
    }
  }
  const auto& c = state.config_;
  ++state.steps_;
  const double t = static_cast<double>(state.steps_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) continue;  // never reached by backward
    auto values = params[i].mutable_values();
    auto grad = params[i].grad();
    auto& m = state.first_[i];
    auto& v = state.second_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double total = 0.0;
  for (const auto& p : params) {
    for (double g : p.grad()) total += g * g;
  }
  const double norm = std::sqrt(total);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& p : params) {
      for (double& g : p.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (adam.learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (hard_attention_weight < 0.0) {
    throw ConfigError("hard-attention weight must be non-negative");
  }
}

EvalResult evaluate(const Model& model,
                    const std::vector<EncodedExample>& corpus) {
  if (corpus.empty()) throw DataError("evaluate: empty corpus");
  EvalResult result;
  result.predictions.reserve(corpus.size());
  std::size_t correct = 0;
  for (const auto& example : corpus) {
    const int rating = model.predict(example);
    result.predictions.push_back(rating);
    if (static_cast<std::size_t>(rating - 1) == example.label) ++correct;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(corpus.size());
  return result;
}

TrainResult train(Model& model, const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& dev_set,
                  const TrainConfig& config, const BatchCallback& on_batch) {
  config.validate();
  if (train_set.empty()) throw DataError("train: empty training corpus");
  if (dev_set.empty()) throw DataError("train: empty dev corpus");

  Rng shuffle_rng(config.seed);
  Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Tensor> params = model.trainable();
  AdamState adam(params, config.adam);
  const bool hard = model.config().variant == ModelVariant::kJointHard;

  TrainResult result{model.clone(), {}, 0, -1.0};
  std::size_t stale = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  ForwardOptions options;
  options.training = true;
  options.rng = &dropout_rng;
  options.record_trace = false;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
    }
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (auto& p : params) p.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& example = train_set[order[k]];
        auto out = model.forward(example, options);
        Tensor loss = cross_entropy(out.probs, example.label);
        if (hard && config.hard_attention_weight > 0.0) {
          loss = add(loss, scale(out.auxiliary_loss, config.hard_attention_weight));
        }
        batch_loss += loss.item();
        backward(loss);
      }
      if (config.reduction == LossReduction::kMean) {
        const double inv = 1.0 / static_cast<double>(end - start);
        for (auto& p : params) {
          for (double& g : p.mutable_grad()) g *= inv;
        }
      }
      if (on_batch) {
        on_batch({epoch, batch_index,
                  std::span<const std::size_t>(order).subspan(start, end - start),
                  batch_loss});
      }
      if (config.clip_norm > 0.0) clip_grad_norm(params, config.clip_norm);
      adam_step(adam, params);
      epoch_loss += batch_loss;
      ++batch_index;
    }

    const double dev_accuracy = evaluate(model, dev_set).accuracy;
    result.history.push_back(
        {epoch, epoch_loss / static_cast<double>(train_set.size()), dev_accuracy});
    if (dev_accuracy > result.best_dev_accuracy) {
      result.best_dev_accuracy = dev_accuracy;
      result.best_epoch = epoch;
      result.best.copy_values_from(model);
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
    if (dev_accuracy >= config.target_accuracy) break;
  }
  return result;
}

void write_history(std::ostream& out, const std::vector<EpochRecord>& history) {
  for (const auto& r : history) {
    nlohmann::json j = {{"epoch", r.epoch},
                        {"train_loss", r.train_loss},
                        {"dev_accuracy", r.dev_accuracy}};
    out << j.dump() << '\n';
  }
}

}  // namespace revsum
