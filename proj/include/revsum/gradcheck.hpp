#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "revsum/random.hpp"
#include "revsum/tensor.hpp"

namespace revsum {

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps vanishing components from
// reporting huge ratios on round-off noise.
inline constexpr double kRelativeErrorFloor = 1e-6;
double relative_error(double analytic, double numeric,
                      double floor = kRelativeErrorFloor);

struct ParamEntry {
  std::size_t tensor;
  std::size_t element;
};

/// Compares backward() gradients of `loss_fn` against central differences
/// with the given step. `loss_fn` must rebuild the graph from the current
/// values of `params` on each call. When `entries` is empty every element
/// of every parameter is checked.
GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn,
                                std::vector<Tensor> params, double step,
                                std::vector<ParamEntry> entries = {});

// Picks `count` entries uniformly over all parameter elements.
std::vector<ParamEntry> sample_entries(const std::vector<Tensor>& params,
                                       std::size_t count, Rng& rng);

}  // namespace revsum
