#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "revsum/params.hpp"
#include "revsum/tensor.hpp"

namespace revsum {

/// One recorded attention distribution set. Each of the `rows` rows of
/// `weights` is a softmax over `cols` tokens of the text named by `source`.
struct AttentionRecord {
  std::string kind;    // "self", "hard", "co_review", "co_summary", "inference"
  std::string source;  // "review", "summary" or "joint"
  std::size_t layer = 0;
  std::size_t head = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(weights).subspan(r * cols, cols);
  }
};

struct AttentionTrace {
  std::vector<AttentionRecord> records;

  void add(std::string kind, std::string source, std::size_t layer,
           std::size_t head, const Tensor& weights);
};

// Structured self-attention: `hops` distributions over the n tokens.
struct SelfAttentionParams {
  Tensor projection;  // W1 [width x d_a]
  Tensor scoring;     // w2 [d_a x hops]

  std::size_t hops() const { return scoring.dim(1); }
  static SelfAttentionParams init(std::size_t width, std::size_t attention_dim,
                                  std::size_t hops, Rng& rng);
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct SelfAttentionResult {
  Tensor context;  // [hops x width]
  Tensor weights;  // [hops x n]
};

SelfAttentionResult self_attention(const SelfAttentionParams& params,
                                   const Tensor& states);

// Symmetric co-attention with one shared score matrix.
struct CoAttentionParams {
  Tensor review_projection;   // [width x width]
  Tensor summary_projection;  // [width x width]
  double scale_dim = 1.0;     // d in softmax(A / sqrt(d))

  static CoAttentionParams init(std::size_t width, Rng& rng);
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct CoAttentionResult {
  Tensor review;           // H^w + softmax_rows(A / sqrt(d)) H^s   [n x width]
  Tensor summary;          // H^s + softmax_rows(A^T / sqrt(d)) H^w [m x width]
  Tensor scores;           // A [n x m]
  Tensor review_weights;   // [n x m]
  Tensor summary_weights;  // [m x n]
};

CoAttentionResult co_attention(const CoAttentionParams& params,
                               const Tensor& review_states,
                               const Tensor& summary_states);

// label[t] = 1 iff case-folded review token t occurs in the summary.
std::vector<std::uint8_t> extract_overlap_labels(
    std::span<const std::string> review, std::span<const std::string> summary);

// Cross-entropy of `weights` against labels / sum(labels); zero when no
// token is labelled.
Tensor hard_attention_loss(const Tensor& weights,
                           std::span<const std::uint8_t> labels);

/// Multi-head attention from review token states to a pooled summary
/// vector, followed by a residual connection and layer normalisation.
struct AttentionInferenceParams {
  std::vector<Tensor> query;  // per head [width x width/k]
  std::vector<Tensor> key;
  std::vector<Tensor> value;
  Tensor norm_gain;  // [width]
  Tensor norm_bias;  // [width]

  std::size_t heads() const { return query.size(); }
  std::size_t width() const { return norm_gain.size(); }
  static AttentionInferenceParams init(std::size_t width, std::size_t heads,
                                       Rng& rng);
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct AttentionInferenceResult {
  Tensor output;                     // LayerNorm(H^w + H^{w,s}) [n x width]
  std::vector<Tensor> head_weights;  // alpha per head, each [n]
};

AttentionInferenceResult attention_inference(
    const AttentionInferenceParams& params, const Tensor& review_states,
    const Tensor& pooled_summary);

}  // namespace revsum
