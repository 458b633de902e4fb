#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "revsum/attention.hpp"
#include "revsum/data.hpp"
#include "revsum/encoder.hpp"
#include "revsum/params.hpp"
#include "revsum/random.hpp"
#include "revsum/tensor.hpp"

namespace revsum {

enum class ModelVariant {
  kReviewOnlyPool,
  kReviewOnlySelfAttn,
  kSummaryOnlyPool,
  kSummaryOnlySelfAttn,
  kSeparatePool,
  kSeparateSelfAttn,
  kJointPool,
  kJointSelfAttn,
  kJointHard,
  kJointCoAttnReview,
  kJointCoAttnSummary,
  kJointCoAttnConcat,
  kReviewCentric,
  kSummaryCentric,
};

const std::vector<ModelVariant>& all_variants();
std::string_view variant_name(ModelVariant variant);
// Accepts the names produced by variant_name(); ConfigError otherwise.
ModelVariant parse_variant(std::string_view name);
bool reads_summary(ModelVariant variant);

struct ModelConfig {
  ModelVariant variant = ModelVariant::kReviewCentric;
  std::size_t embedding_dim = 300;
  std::size_t hidden_size = 256;  // per direction; states are 2x wide
  std::size_t heads = 1;
  std::size_t layers = 2;  // stacked layers of the centric models
  double dropout = 0.5;
  std::size_t num_classes = kNumClasses;
  std::size_t vocab_size = 2;
  bool trainable_embeddings = true;
  std::size_t attention_dim = 128;  // self-attention d_a
  std::size_t attention_hops = 4;   // self-attention r

  std::size_t state_width() const { return 2 * hidden_size; }
  void validate() const;
};

std::string model_config_to_json(const ModelConfig& config);
ModelConfig parse_model_config(std::string_view json_text);

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
  bool record_trace = true;
};

struct ForwardResult {
  Tensor probs;             // [num_classes]
  AttentionTrace trace;
  Tensor auxiliary_loss;    // hard-attention loss; scalar zero otherwise
};

/// One architecture from the zoo with its parameters. Components that a
/// variant does not use stay empty.
class Model {
 public:
  static Model build(const ModelConfig& config, std::uint64_t seed);

  ForwardResult forward(const EncodedExample& example,
                        const ForwardOptions& options = {}) const;
  // 1-based rating; ties resolve to the lowest class.
  int predict(const EncodedExample& example) const;

  const ModelConfig& config() const { return config_; }
  ParameterList parameters() const;
  // Parameters updated by the optimiser (embeddings only when trainable).
  std::vector<Tensor> trainable() const;
  std::size_t parameter_count() const;
  // Deep copy; the clone shares no storage with this model.
  Model clone() const;
  void copy_values_from(const Model& other);
  void set_embeddings(const Tensor& table);

  Tensor embeddings;
  std::vector<BiLstmEncoder> review_encoders;
  std::vector<BiLstmEncoder> summary_encoders;
  std::optional<BiLstmEncoder> joint_encoder;
  std::vector<SelfAttentionParams> self_attention;
  std::optional<CoAttentionParams> co_attention;
  std::vector<AttentionInferenceParams> inference;
  Tensor output_weights;  // [width x C]
  Tensor output_bias;     // [C]

 private:
  ModelConfig config_;
};

// 1 + argmax(p); lowest index wins ties.
int argmax_rating(const Tensor& probs);

struct Checkpoint {
  Model model;
  Vocabulary vocab;
};

/// Binary layout: magic, u32 version, config JSON string, vocabulary
/// (u64 count + strings), u64 parameter count, then name + tensor pairs.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace revsum
