#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "revsum/random.hpp"
#include "revsum/tensor.hpp"

namespace revsum {

// Matrix product. `a` may be a matrix [m x k] or a row vector [k]; `b` is
// [k x n]. A vector operand yields a vector result [n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Pointwise binary ops; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
// Natural log; inputs must be positive.
Tensor log(const Tensor& x);

// Max-shifted softmax along `axis` (0 for vectors; 0 or 1 for matrices).
Tensor softmax(const Tensor& x, std::size_t axis);

inline constexpr double kLayerNormEps = 1e-5;
// Row-wise normalisation with population variance, eps inside the root.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);

// Column mean of an [n x d] matrix -> [d]. Throws EmptySequenceError for n == 0.
Tensor average_pool(const Tensor& h);
// Sum of all elements -> scalar.
Tensor sum(const Tensor& x);

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end);
// Row `index` of a matrix as a vector.
Tensor row(const Tensor& x, std::size_t index);
// Stacks equal-length vectors into a matrix.
Tensor stack_rows(std::span<const Tensor> rows);
// Tiles a vector [d] into [n x d]. The only broadcast the library offers.
Tensor repeat_rows(const Tensor& v, std::size_t n);
Tensor reshape(const Tensor& x, Shape shape);

// Inverted dropout: identity in eval mode or for rate 0.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

// Gathers rows of `table` [V x e]. Backward scatter-adds into the table.
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);

// -log p[target] for a probability vector `p`.
Tensor cross_entropy(const Tensor& p, std::size_t target);

}  // namespace revsum
