#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace revsum {

inline constexpr double kOpGradStep = 1e-6;
inline constexpr double kOpGradTolerance = 1e-4;
inline constexpr double kModelGradStep = 1e-4;
inline constexpr double kModelGradTolerance = 1e-3;
inline constexpr std::size_t kModelGradSamples = 20;

struct GradCheckOutcome {
  std::string name;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;

  bool passed() const { return max_relative_error < tolerance; }
};

// Every differentiable op on random inputs of three shapes each, checked
// element by element against central differences.
std::vector<GradCheckOutcome> run_op_gradient_checks(std::uint64_t seed);

// Every model variant at toy size: `samples` random parameter entries
// spot-checked on the full training loss.
std::vector<GradCheckOutcome> run_model_gradient_checks(
    std::uint64_t seed, std::size_t samples = kModelGradSamples);

}  // namespace revsum
