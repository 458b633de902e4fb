#pragma once

#include <string>
#include <vector>

#include "revsum/random.hpp"
#include "revsum/tensor.hpp"

namespace revsum {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedParameter>;

// Trainable leaf filled from uniform(-bound, bound).
Tensor uniform_parameter(Shape shape, double bound, Rng& rng);

}  // namespace revsum
