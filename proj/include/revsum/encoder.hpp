#pragma once

#include <cstddef>
#include <string>

#include "revsum/params.hpp"
#include "revsum/tensor.hpp"

namespace revsum {

/// Weights of a single-direction LSTM. Gates are packed column-wise in the
/// order input, forget, output, candidate, each `hidden` wide.
struct LstmParams {
  Tensor input_weights;   // [d_in x 4*d_h]
  Tensor hidden_weights;  // [d_h x 4*d_h]
  Tensor bias;            // [4*d_h]

  std::size_t input_size() const { return input_weights.dim(0); }
  std::size_t hidden_size() const { return hidden_weights.dim(0); }

  // uniform(-1/sqrt(d_h), 1/sqrt(d_h)) weights, zero biases except the
  // forget gate at 1.0.
  static LstmParams init(std::size_t input_size, std::size_t hidden_size,
                         Rng& rng);
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct LstmState {
  Tensor h;
  Tensor c;
};

LstmState lstm_step(const LstmParams& params, const Tensor& x,
                    const Tensor& h_prev, const Tensor& c_prev);

struct BiLstmEncoder {
  LstmParams forward;
  LstmParams backward;

  std::size_t hidden_size() const { return forward.hidden_size(); }
  std::size_t output_size() const { return 2 * hidden_size(); }

  static BiLstmEncoder init(std::size_t input_size, std::size_t hidden_size,
                            Rng& rng);
  void collect(ParameterList& out, const std::string& prefix) const;
};

/// [n x d_in] -> [n x 2*d_h]; row t is the forward state at t followed by
/// the backward state at t. Both directions start from zero states.
Tensor encode_sequence(const BiLstmEncoder& encoder, const Tensor& x);

}  // namespace revsum
