#include "revsum/attention.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "revsum/errors.hpp"
#include "revsum/ops.hpp"

namespace revsum {

namespace {

std::string fold_case(const std::string& token) {
  std::string out = token;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

double inv_sqrt(std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); }

void require_states(const Tensor& states, std::size_t width, const char* op) {
  if (states.rank() != 2 || states.dim(1) != width) {
    throw ShapeError(std::string(op) + ": expected [n x " +
                     std::to_string(width) + "] states, got " +
                     shape_string(states.shape()));
  }
  if (states.dim(0) == 0) {
    throw EmptySequenceError(std::string(op) + ": empty sequence");
  }
}

}  // namespace

void AttentionTrace::add(std::string kind, std::string source,
                         std::size_t layer, std::size_t head,
                         const Tensor& weights) {
  AttentionRecord record;
  record.kind = std::move(kind);
  record.source = std::move(source);
  record.layer = layer;
  record.head = head;
  record.rows = weights.rank() == 2 ? weights.dim(0) : 1;
  record.cols = weights.rank() == 2 ? weights.dim(1) : weights.size();
  record.weights.assign(weights.values().begin(), weights.values().end());
  records.push_back(std::move(record));
}

SelfAttentionParams SelfAttentionParams::init(std::size_t width,
                                              std::size_t attention_dim,
                                              std::size_t hops, Rng& rng) {
  if (hops == 0 || attention_dim == 0) {
    throw ConfigError("self-attention needs at least one hop and d_a >= 1");
  }
  SelfAttentionParams p;
  p.projection = uniform_parameter({width, attention_dim}, inv_sqrt(width), rng);
  p.scoring = uniform_parameter({attention_dim, hops}, inv_sqrt(attention_dim), rng);
  return p;
}

void SelfAttentionParams::collect(ParameterList& out,
                                  const std::string& prefix) const {
  out.push_back({prefix + ".projection", projection});
  out.push_back({prefix + ".scoring", scoring});
}

SelfAttentionResult self_attention(const SelfAttentionParams& params,
                                   const Tensor& states) {
  require_states(states, params.projection.dim(0), "self_attention");
  // scores[r x n] = (tanh(H W1) w2)^T
  Tensor scores = transpose(matmul(tanh(matmul(states, params.projection)),
                                   params.scoring));
  Tensor weights = softmax(scores, 1);
  return {matmul(weights, states), weights};
}

CoAttentionParams CoAttentionParams::init(std::size_t width, Rng& rng) {
  CoAttentionParams p;
  p.review_projection = uniform_parameter({width, width}, inv_sqrt(width), rng);
  p.summary_projection = uniform_parameter({width, width}, inv_sqrt(width), rng);
  p.scale_dim = static_cast<double>(width);
  return p;
}

void CoAttentionParams::collect(ParameterList& out,
                                const std::string& prefix) const {
  out.push_back({prefix + ".review_projection", review_projection});
  out.push_back({prefix + ".summary_projection", summary_projection});
}

CoAttentionResult co_attention(const CoAttentionParams& params,
                               const Tensor& review_states,
                               const Tensor& summary_states) {
  const std::size_t width = params.review_projection.dim(0);
  require_states(review_states, width, "co_attention");
  require_states(summary_states, width, "co_attention");
  Tensor scores = matmul(matmul(review_states, params.review_projection),
                         transpose(matmul(summary_states, params.summary_projection)));
  const double factor = 1.0 / std::sqrt(params.scale_dim);
  Tensor review_weights = softmax(scale(scores, factor), 1);
  Tensor summary_weights = softmax(scale(transpose(scores), factor), 1);
  CoAttentionResult result;
  result.review = add(review_states, matmul(review_weights, summary_states));
  result.summary = add(summary_states, matmul(summary_weights, review_states));
  result.scores = std::move(scores);
  result.review_weights = std::move(review_weights);
  result.summary_weights = std::move(summary_weights);
  return result;
}

std::vector<std::uint8_t> extract_overlap_labels(
    std::span<const std::string> review, std::span<const std::string> summary) {
  std::unordered_set<std::string> summary_set;
  for (const auto& token : summary) summary_set.insert(fold_case(token));
  std::vector<std::uint8_t> labels(review.size(), 0);
  for (std::size_t t = 0; t < review.size(); ++t) {
    labels[t] = summary_set.count(fold_case(review[t])) ? 1 : 0;
  }
  return labels;
}

Tensor hard_attention_loss(const Tensor& weights,
                           std::span<const std::uint8_t> labels) {
  if (weights.rank() != 1 || weights.size() != labels.size()) {
    throw ShapeError("hard_attention_loss: weights " +
                     shape_string(weights.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  std::size_t positives = 0;
  for (auto l : labels) positives += l ? 1 : 0;
  if (positives == 0) return Tensor::scalar(0.0);
  const double share = 1.0 / static_cast<double>(positives);
  std::vector<std::size_t> marked;
  double loss = 0.0;
  auto w = weights.values();
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (!labels[t]) continue;
    marked.push_back(t);
    loss -= share * std::log(w[t]);
  }
  return Tensor::make_result({}, {loss}, {weights},
                             [marked = std::move(marked), share](detail::Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               const auto& w = self.parents[0]->values;
                               for (auto t : marked) g[t] -= self.grad[0] * share / w[t];
                             });
}

AttentionInferenceParams AttentionInferenceParams::init(std::size_t width,
                                                        std::size_t heads,
                                                        Rng& rng) {
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("attention heads (" + std::to_string(heads) +
                      ") must divide the state width (" +
                      std::to_string(width) + ")");
  }
  const std::size_t head_width = width / heads;
  AttentionInferenceParams p;
  for (std::size_t h = 0; h < heads; ++h) {
    p.query.push_back(uniform_parameter({width, head_width}, inv_sqrt(width), rng));
    p.key.push_back(uniform_parameter({width, head_width}, inv_sqrt(width), rng));
    p.value.push_back(uniform_parameter({width, head_width}, inv_sqrt(width), rng));
  }
  p.norm_gain = Tensor::filled({width}, 1.0, true);
  p.norm_bias = Tensor::zeros({width}, true);
  return p;
}

void AttentionInferenceParams::collect(ParameterList& out,
                                       const std::string& prefix) const {
  for (std::size_t h = 0; h < heads(); ++h) {
    const auto head = prefix + ".head" + std::to_string(h);
    out.push_back({head + ".query", query[h]});
    out.push_back({head + ".key", key[h]});
    out.push_back({head + ".value", value[h]});
  }
  out.push_back({prefix + ".norm_gain", norm_gain});
  out.push_back({prefix + ".norm_bias", norm_bias});
}

AttentionInferenceResult attention_inference(
    const AttentionInferenceParams& params, const Tensor& review_states,
    const Tensor& pooled_summary) {
  const std::size_t width = params.width();
  const std::size_t heads = params.heads();
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("attention heads must divide the state width");
  }
  require_states(review_states, width, "attention_inference");
  if (pooled_summary.rank() != 1 || pooled_summary.size() != width) {
    throw ShapeError("attention_inference: pooled summary " +
                     shape_string(pooled_summary.shape()) + " but width is " +
                     std::to_string(width));
  }
  const std::size_t n = review_states.dim(0);
  const std::size_t head_width = width / heads;
  const double factor = inv_sqrt(head_width);  // 1 / sqrt(width / k)

  AttentionInferenceResult result;
  std::vector<Tensor> head_outputs;
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor queries = matmul(review_states, params.query[h]);         // [n x dk]
    Tensor key = reshape(matmul(pooled_summary, params.key[h]), {head_width, 1});
    Tensor scores = reshape(matmul(queries, key), {n});
    Tensor alpha = softmax(scale(scores, factor), 0);
    Tensor value = reshape(matmul(pooled_summary, params.value[h]), {1, head_width});
    head_outputs.push_back(matmul(reshape(alpha, {n, 1}), value));  // [n x dk]
    result.head_weights.push_back(std::move(alpha));
  }
  Tensor mixed = heads == 1 ? head_outputs.front() : concat(head_outputs, 1);
  result.output = layer_norm(add(review_states, mixed), params.norm_gain,
                             params.norm_bias);
  return result;
}

}  // namespace revsum
