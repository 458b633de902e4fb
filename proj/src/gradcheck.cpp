#include "revsum/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace revsum {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn,
                                std::vector<Tensor> params, double step,
                                std::vector<ParamEntry> entries) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  backward(loss_fn());
  if (entries.empty()) {
    for (std::size_t t = 0; t < params.size(); ++t)
      for (std::size_t e = 0; e < params[t].size(); ++e) entries.push_back({t, e});
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  for (const auto& entry : entries) {
    auto& param = params[entry.tensor];
    const double analytic =
        param.has_grad() ? param.grad()[entry.element] : 0.0;
    double& slot = param.mutable_values()[entry.element];
    const double original = slot;
    slot = original + step;
    const double plus = loss_fn().item();
    slot = original - step;
    const double minus = loss_fn().item();
    slot = original;
    const double numeric = (plus - minus) / (2.0 * step);
    report.max_absolute_error =
        std::max(report.max_absolute_error, std::abs(analytic - numeric));
    report.max_relative_error =
        std::max(report.max_relative_error, relative_error(analytic, numeric));
    ++report.checked;
  }
  return report;
}

std::vector<ParamEntry> sample_entries(const std::vector<Tensor>& params,
                                       std::size_t count, Rng& rng) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.size();
  std::vector<ParamEntry> out;
  if (total == 0) return out;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t flat = uniform_index(rng, total);
    std::size_t t = 0;
    while (flat >= params[t].size()) {
      flat -= params[t].size();
      ++t;
    }
    out.push_back({t, flat});
  }
  return out;
}

}  // namespace revsum
