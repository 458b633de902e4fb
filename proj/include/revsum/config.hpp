#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "revsum/models.hpp"
#include "revsum/training.hpp"

namespace revsum {

/// Everything `train` needs besides the corpus paths.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t min_count = 2;
  std::optional<std::filesystem::path> embeddings;
};

/// Flat JSON object. Recognised keys:
///   variant, embedding_dim, hidden_size, heads, layers, dropout,
///   trainable_embeddings, attention_dim, attention_hops,
///   epochs, batch_size, seed, patience, hard_attention_weight, clip_norm,
///   learning_rate, beta1, beta2, epsilon, loss_reduction ("sum" | "mean"),
///   target_accuracy, min_count, embeddings.
/// Missing keys keep their defaults; anything else is a ConfigError.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace revsum
