#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "revsum/data.hpp"
#include "revsum/models.hpp"
#include "revsum/tensor.hpp"

namespace revsum {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers mirroring a fixed parameter list.
class AdamState {
 public:
  AdamState(const std::vector<Tensor>& params, AdamConfig config = {});

  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t steps_ = 0;

  friend void adam_step(AdamState& state, std::span<Tensor> params);
};

// Bias-corrected Adam update from each parameter's grad (missing grad = 0).
void adam_step(AdamState& state, std::span<Tensor> params);

// Rescales grads in place so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

enum class LossReduction { kSum, kMean };

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  std::size_t patience = 3;
  double hard_attention_weight = 1.0;
  double clip_norm = 5.0;  // <= 0 disables clipping
  LossReduction reduction = LossReduction::kSum;
  AdamConfig adam;
  // Stop as soon as dev accuracy reaches this value (disabled above 1).
  double target_accuracy = 2.0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean per-example loss over the epoch
  double dev_accuracy = 0.0;
};

struct BatchEvent {
  std::size_t epoch = 0;
  std::size_t batch = 0;  // 0-based within the epoch
  std::span<const std::size_t> indices;  // training examples in the batch
  double loss = 0.0;  // summed over the batch, before the update
};

struct TrainResult {
  Model best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
};

using BatchCallback = std::function<void(const BatchEvent&)>;

/// Minibatch Adam on the summed cross-entropy (plus the weighted
/// hard-attention term for joint_hard). Keeps the parameters with the best
/// dev accuracy and stops after `patience` epochs without improvement.
TrainResult train(Model& model, const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& dev_set,
                  const TrainConfig& config, const BatchCallback& on_batch = {});

struct EvalResult {
  double accuracy = 0.0;
  std::vector<int> predictions;  // 1-based ratings in corpus order
};

EvalResult evaluate(const Model& model,
                    const std::vector<EncodedExample>& corpus);

// Line-delimited {"epoch", "train_loss", "dev_accuracy"} records.
void write_history(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace revsum
