#include "revsum/gradient_suite.hpp"

#include <functional>
#include <utility>

#include "revsum/attention.hpp"
#include "revsum/encoder.hpp"
#include "revsum/gradcheck.hpp"
#include "revsum/models.hpp"
#include "revsum/ops.hpp"

namespace revsum {

namespace {

using OpFn = std::function<Tensor(const std::vector<Tensor>&)>;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = uniform(rng, lo, hi);
  return Tensor::from(std::move(shape), std::move(values), true);
}

// Checks fn(inputs) through the scalar projection sum(out * R) for a fixed
// random R, so every output element contributes to the gradient.
GradCheckOutcome check_op(std::string name, const OpFn& fn,
                          std::vector<Tensor> inputs, Rng& rng) {
  Tensor probe;
  {
    NoGradGuard no_grad;
    probe = fn(inputs);
  }
  Tensor weights = random_tensor(probe.shape(), rng);
  weights.set_requires_grad(false);
  auto loss_fn = [&] { return sum(mul(fn(inputs), weights)); };
  const auto report = check_gradients(loss_fn, inputs, kOpGradStep);
  return {std::move(name), report.max_relative_error, kOpGradTolerance,
          report.checked};
}

std::vector<Tensor> lstm_inputs(const LstmParams& p) {
  return {p.input_weights, p.hidden_weights, p.bias};
}

LstmParams lstm_from(const std::vector<Tensor>& in, std::size_t offset) {
  return {in[offset], in[offset + 1], in[offset + 2]};
}

}  // namespace

std::vector<GradCheckOutcome> run_op_gradient_checks(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckOutcome> out;
  auto add_case = [&](const std::string& op, std::size_t variant, const OpFn& fn,
                      std::vector<Tensor> inputs) {
    out.push_back(check_op(op + "#" + std::to_string(variant), fn,
                           std::move(inputs), rng));
  };
  auto r = [&](Shape s) { return random_tensor(std::move(s), rng); };

  const std::vector<std::pair<Shape, Shape>> matmul_shapes{
      {{3, 4}, {4, 2}}, {{5}, {5, 3}}, {{1, 1}, {1, 6}}};
  for (std::size_t i = 0; i < matmul_shapes.size(); ++i) {
    add_case("matmul", i, [](const auto& in) { return matmul(in[0], in[1]); },
             {r(matmul_shapes[i].first), r(matmul_shapes[i].second)});
  }

  const std::vector<Shape> shapes{{4}, {2, 3}, {3, 1}};
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    add_case("add", i, [](const auto& in) { return add(in[0], in[1]); },
             {r(shapes[i]), r(shapes[i])});
    add_case("sub", i, [](const auto& in) { return sub(in[0], in[1]); },
             {r(shapes[i]), r(shapes[i])});
    add_case("mul", i, [](const auto& in) { return mul(in[0], in[1]); },
             {r(shapes[i]), r(shapes[i])});
    add_case("scale", i, [](const auto& in) { return scale(in[0], -1.7); },
             {r(shapes[i])});
    add_case("tanh", i, [](const auto& in) { return tanh(in[0]); }, {r(shapes[i])});
    add_case("sigmoid", i, [](const auto& in) { return sigmoid(in[0]); },
             {r(shapes[i])});
    add_case("exp", i, [](const auto& in) { return exp(in[0]); }, {r(shapes[i])});
    add_case("log", i, [](const auto& in) { return log(in[0]); },
             {random_tensor(shapes[i], rng, 0.5, 2.0)});
    add_case("sum", i, [](const auto& in) { return sum(in[0]); }, {r(shapes[i])});
    add_case("dropout", i,
             [](const auto& in) {
               Rng mask_rng(99);
               return dropout(in[0], 0.3, true, mask_rng);
             },
             {r(shapes[i])});
  }

  const std::vector<Shape> matrices{{2, 3}, {1, 5}, {4, 2}};
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto rows = matrices[i][0], cols = matrices[i][1];
    add_case("transpose", i, [](const auto& in) { return transpose(in[0]); },
             {r(matrices[i])});
    add_case("average_pool", i, [](const auto& in) { return average_pool(in[0]); },
             {r(matrices[i])});
    add_case("softmax_rows", i, [](const auto& in) { return softmax(in[0], 1); },
             {r(matrices[i])});
    add_case("softmax_cols", i, [](const auto& in) { return softmax(in[0], 0); },
             {r(matrices[i])});
    add_case("layer_norm", i,
             [](const auto& in) { return layer_norm(in[0], in[1], in[2]); },
             {r(matrices[i]), r({cols}), r({cols})});
    add_case("concat_rows", i,
             [](const auto& in) { return concat(in[0], in[1], 0); },
             {r(matrices[i]), r({rows + 1, cols})});
    add_case("concat_cols", i,
             [](const auto& in) { return concat(in[0], in[1], 1); },
             {r(matrices[i]), r({rows, cols + 2})});
    add_case("slice", i,
             [cols](const auto& in) { return slice(in[0], 1, cols / 2, cols); },
             {r(matrices[i])});
    add_case("row", i, [rows](const auto& in) { return row(in[0], rows - 1); },
             {r(matrices[i])});
    add_case("stack_rows", i,
             [](const auto& in) { return stack_rows(std::span<const Tensor>(in)); },
             {r({cols}), r({cols}), r({cols})});
    add_case("repeat_rows", i,
             [rows](const auto& in) { return repeat_rows(in[0], rows + 1); },
             {r({cols})});
    add_case("reshape", i,
             [rows, cols](const auto& in) { return reshape(in[0], {rows * cols}); },
             {r(matrices[i])});
    add_case("softmax_vector", i, [](const auto& in) { return softmax(in[0], 0); },
             {r({cols})});
  }

  const std::vector<std::pair<Shape, std::vector<int>>> lookups{
      {{5, 3}, {0, 2, 2, 4}}, {{3, 2}, {1, 1, 1}}, {{6, 4}, {5, 0, 3, 0}}};
  for (std::size_t i = 0; i < lookups.size(); ++i) {
    auto ids = lookups[i].second;
    add_case("embedding_lookup", i,
             [ids](const auto& in) { return embedding_lookup(in[0], ids); },
             {r(lookups[i].first)});
  }

  const std::vector<std::pair<std::size_t, std::size_t>> classes{{5, 2}, {3, 0}, {2, 1}};
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto target = classes[i].second;
    add_case("cross_entropy", i,
             [target](const auto& in) { return cross_entropy(softmax(in[0], 0), target); },
             {r({classes[i].first})});
  }

  const std::vector<std::pair<std::size_t, std::size_t>> lstm_sizes{{3, 2}, {1, 1}, {4, 3}};
  for (std::size_t i = 0; i < lstm_sizes.size(); ++i) {
    const auto [din, dh] = lstm_sizes[i];
    auto p = LstmParams::init(din, dh, rng);
    auto inputs = lstm_inputs(p);
    inputs.push_back(r({din}));
    inputs.push_back(r({dh}));
    inputs.push_back(r({dh}));
    add_case("lstm_step", i,
             [](const auto& in) {
               auto s = lstm_step(lstm_from(in, 0), in[3], in[4], in[5]);
               return concat(s.h, s.c, 0);
             },
             std::move(inputs));
  }

  const std::vector<std::array<std::size_t, 3>> seq_sizes{{1, 2, 2}, {3, 2, 3}, {5, 3, 2}};
  for (std::size_t i = 0; i < seq_sizes.size(); ++i) {
    const auto [n, din, dh] = seq_sizes[i];
    auto enc = BiLstmEncoder::init(din, dh, rng);
    auto inputs = lstm_inputs(enc.forward);
    for (auto& t : lstm_inputs(enc.backward)) inputs.push_back(t);
    inputs.push_back(r({n, din}));
    add_case("encode_sequence", i,
             [](const auto& in) {
               BiLstmEncoder e{lstm_from(in, 0), lstm_from(in, 3)};
               return encode_sequence(e, in[6]);
             },
             std::move(inputs));
  }

  const std::vector<std::array<std::size_t, 4>> self_sizes{
      {1, 4, 3, 2}, {3, 4, 2, 1}, {4, 6, 3, 3}};
  for (std::size_t i = 0; i < self_sizes.size(); ++i) {
    const auto [n, width, da, hops] = self_sizes[i];
    add_case("self_attention", i,
             [](const auto& in) {
               auto res = self_attention({in[0], in[1]}, in[2]);
               return concat(reshape(res.context, {res.context.size()}),
                             reshape(res.weights, {res.weights.size()}), 0);
             },
             {r({width, da}), r({da, hops}), r({n, width})});
  }

  const std::vector<std::array<std::size_t, 3>> co_sizes{{2, 3, 4}, {1, 2, 2}, {4, 1, 6}};
  for (std::size_t i = 0; i < co_sizes.size(); ++i) {
    const auto [n, m, width] = co_sizes[i];
    add_case("co_attention", i,
             [width](const auto& in) {
               CoAttentionParams p{in[0], in[1], static_cast<double>(width)};
               auto res = co_attention(p, in[2], in[3]);
               return concat(res.review, res.summary, 0);
             },
             {r({width, width}), r({width, width}), r({n, width}), r({m, width})});
  }

  const std::vector<std::vector<std::uint8_t>> label_sets{
      {1, 0, 0, 1}, {0, 1, 0}, {1, 1, 0, 0, 1, 0}};
  for (std::size_t i = 0; i < label_sets.size(); ++i) {
    auto labels = label_sets[i];
    add_case("hard_attention_loss", i,
             [labels](const auto& in) {
               return hard_attention_loss(softmax(in[0], 0), labels);
             },
             {r({labels.size()})});
  }

  const std::vector<std::array<std::size_t, 3>> inf_sizes{{3, 4, 2}, {1, 4, 1}, {5, 6, 3}};
  for (std::size_t i = 0; i < inf_sizes.size(); ++i) {
    const auto [n, width, heads] = inf_sizes[i];
    auto p = AttentionInferenceParams::init(width, heads, rng);
    std::vector<Tensor> inputs;
    for (std::size_t h = 0; h < heads; ++h) {
      inputs.push_back(p.query[h]);
      inputs.push_back(p.key[h]);
      inputs.push_back(p.value[h]);
    }
    inputs.push_back(r({width}));  // gain
    inputs.push_back(r({width}));  // bias
    inputs.push_back(r({n, width}));
    inputs.push_back(r({width}));
    add_case("attention_inference", i,
             [heads](const auto& in) {
               AttentionInferenceParams q;
               for (std::size_t h = 0; h < heads; ++h) {
                 q.query.push_back(in[3 * h]);
                 q.key.push_back(in[3 * h + 1]);
                 q.value.push_back(in[3 * h + 2]);
               }
               q.norm_gain = in[3 * heads];
               q.norm_bias = in[3 * heads + 1];
               return attention_inference(q, in[3 * heads + 2], in[3 * heads + 3]).output;
             },
             std::move(inputs));
  }
  return out;
}

std::vector<GradCheckOutcome> run_model_gradient_checks(std::uint64_t seed,
                                                        std::size_t samples) {
  std::vector<GradCheckOutcome> out;
  EncodedExample example;
  example.review = {2, 5, 3, 7, 4};
  example.summary = {5, 8, 4};
  example.label = 3;
  example.overlap = {0, 1, 0, 0, 1};

  for (auto variant : all_variants()) {
    ModelConfig config;
    config.variant = variant;
    config.embedding_dim = 6;
    config.hidden_size = 4;
    config.heads = 2;
    config.layers = 2;
    config.dropout = 0.0;
    config.vocab_size = 10;
    config.attention_dim = 5;
    config.attention_hops = 2;
    Model model = Model::build(config, seed);
    auto params = model.trainable();
    auto loss_fn = [&] {
      ForwardOptions options;
      options.record_trace = false;
      auto result = model.forward(example, options);
      return add(cross_entropy(result.probs, example.label), result.auxiliary_loss);
    };
    Rng rng(seed + 17);
    auto entries = sample_entries(params, samples, rng);
    const auto report = check_gradients(loss_fn, params, kModelGradStep, entries);
    out.push_back({std::string(variant_name(variant)), report.max_relative_error,
                   kModelGradTolerance, report.checked});
  }
  return out;
}

}  // namespace revsum
