#include "revsum/encoder.hpp"

#include <cmath>
#include <vector>

#include "revsum/errors.hpp"
#include "revsum/ops.hpp"

namespace revsum {

namespace {

double sigmoid_value(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// c_t = sigmoid(f) * c_prev + sigmoid(i) * tanh(g), from packed
// pre-activations [i | f | o | g].
Tensor cell_state(const Tensor& pre, const Tensor& c_prev, std::size_t d) {
  std::vector<double> out(d);
  auto p = pre.values();
  auto c = c_prev.values();
  for (std::size_t j = 0; j < d; ++j) {
    out[j] = sigmoid_value(p[d + j]) * c[j] +
             sigmoid_value(p[j]) * std::tanh(p[3 * d + j]);
  }
  return Tensor::make_result({d}, std::move(out), {pre, c_prev}, [d](detail::Node& self) {
    const auto& p = self.parents[0]->values;
    const auto& c = self.parents[1]->values;
    const auto& g = self.grad;
    if (self.parents[0]->requires_grad) {
      auto& gp = self.parents[0]->ensure_grad();
      for (std::size_t j = 0; j < d; ++j) {
        const double si = sigmoid_value(p[j]);
        const double sf = sigmoid_value(p[d + j]);
        const double tg = std::tanh(p[3 * d + j]);
        gp[j] += g[j] * tg * si * (1.0 - si);
        gp[d + j] += g[j] * c[j] * sf * (1.0 - sf);
        gp[3 * d + j] += g[j] * si * (1.0 - tg * tg);
      }
    }
    if (self.parents[1]->requires_grad) {
      auto& gc = self.parents[1]->ensure_grad();
      for (std::size_t j = 0; j < d; ++j) gc[j] += g[j] * sigmoid_value(p[d + j]);
    }
  });
}

// h_t = sigmoid(o) * tanh(c_t).
Tensor hidden_state(const Tensor& pre, const Tensor& cell, std::size_t d) {
  std::vector<double> out(d);
  auto p = pre.values();
  auto c = cell.values();
  for (std::size_t j = 0; j < d; ++j) {
    out[j] = sigmoid_value(p[2 * d + j]) * std::tanh(c[j]);
  }
  return Tensor::make_result({d}, std::move(out), {pre, cell}, [d](detail::Node& self) {
    const auto& p = self.parents[0]->values;
    const auto& c = self.parents[1]->values;
    const auto& g = self.grad;
    const bool want_pre = self.parents[0]->requires_grad;
    const bool want_cell = self.parents[1]->requires_grad;
    double* gp = want_pre ? self.parents[0]->ensure_grad().data() : nullptr;
    double* gc = want_cell ? self.parents[1]->ensure_grad().data() : nullptr;
    for (std::size_t j = 0; j < d; ++j) {
      const double so = sigmoid_value(p[2 * d + j]);
      const double tc = std::tanh(c[j]);
      if (gp) gp[2 * d + j] += g[j] * tc * so * (1.0 - so);
      if (gc) gc[j] += g[j] * so * (1.0 - tc * tc);
    }
  });
}

// Gate arithmetic given the biased input projection x*W_x + b.
LstmState step_from_projection(const LstmParams& p, const Tensor& input_proj,
                               const Tensor& h_prev, const Tensor& c_prev) {
  const std::size_t d = p.hidden_size();
  Tensor pre = add(input_proj, matmul(h_prev, p.hidden_weights));
  Tensor c = cell_state(pre, c_prev, d);
  Tensor h = hidden_state(pre, c, d);
  return {std::move(h), std::move(c)};
}

}  // namespace

LstmParams LstmParams::init(std::size_t input_size, std::size_t hidden_size,
                            Rng& rng) {
  if (input_size == 0 || hidden_size == 0) {
    throw ConfigError("LSTM sizes must be positive");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  LstmParams p;
  p.input_weights = uniform_parameter({input_size, 4 * hidden_size}, bound, rng);
  p.hidden_weights = uniform_parameter({hidden_size, 4 * hidden_size}, bound, rng);
  std::vector<double> bias(4 * hidden_size, 0.0);
  for (std::size_t j = hidden_size; j < 2 * hidden_size; ++j) bias[j] = 1.0;
  p.bias = Tensor::vector(std::move(bias), true);
  return p;
}

void LstmParams::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".input_weights", input_weights});
  out.push_back({prefix + ".hidden_weights", hidden_weights});
  out.push_back({prefix + ".bias", bias});
}

LstmState lstm_step(const LstmParams& params, const Tensor& x,
                    const Tensor& h_prev, const Tensor& c_prev) {
  const std::size_t d = params.hidden_size();
  if (x.rank() != 1 || x.size() != params.input_size() || h_prev.rank() != 1 ||
      h_prev.size() != d || c_prev.rank() != 1 || c_prev.size() != d) {
    throw ShapeError("lstm_step: input " + shape_string(x.shape()) + ", h " +
                     shape_string(h_prev.shape()) + ", c " +
                     shape_string(c_prev.shape()) + " incompatible with d_in=" +
                     std::to_string(params.input_size()) +
                     ", d_h=" + std::to_string(d));
  }
  return step_from_projection(params, add(matmul(x, params.input_weights), params.bias),
                              h_prev, c_prev);
}

BiLstmEncoder BiLstmEncoder::init(std::size_t input_size,
                                  std::size_t hidden_size, Rng& rng) {
  BiLstmEncoder e;
  e.forward = LstmParams::init(input_size, hidden_size, rng);
  e.backward = LstmParams::init(input_size, hidden_size, rng);
  return e;
}

void BiLstmEncoder::collect(ParameterList& out, const std::string& prefix) const {
  forward.collect(out, prefix + ".fwd");
  backward.collect(out, prefix + ".bwd");
}

Tensor encode_sequence(const BiLstmEncoder& encoder, const Tensor& x) {
  if (x.rank() != 2) {
    throw ShapeError("encode_sequence: expected [n x d_in], got " +
                     shape_string(x.shape()));
  }
  const std::size_t n = x.dim(0);
  if (n == 0) throw EmptySequenceError("encode_sequence: empty sequence");
  if (x.dim(1) != encoder.forward.input_size()) {
    throw ShapeError("encode_sequence: input width " + std::to_string(x.dim(1)) +
                     " but encoder expects " +
                     std::to_string(encoder.forward.input_size()));
  }
  const std::size_t d = encoder.hidden_size();

  auto run = [&](const LstmParams& p, bool reverse) {
    Tensor projected = add(matmul(x, p.input_weights), repeat_rows(p.bias, n));
    std::vector<Tensor> states(n);
    LstmState state{Tensor::zeros({d}), Tensor::zeros({d})};
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t t = reverse ? n - 1 - step : step;
      state = step_from_projection(p, row(projected, t), state.h, state.c);
      states[t] = state.h;
    }
    return stack_rows(states);
  };

  return concat(run(encoder.forward, false), run(encoder.backward, true), 1);
}

}  // namespace revsum
