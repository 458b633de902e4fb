#include "revsum/params.hpp"

namespace revsum {

Tensor uniform_parameter(Shape shape, double bound, Rng& rng) {
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = uniform(rng, -bound, bound);
  return Tensor::from(std::move(shape), std::move(values), true);
}

}  // namespace revsum
