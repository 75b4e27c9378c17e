#include "condgen/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "condgen/rng.hpp"

namespace condgen::nn {

GradCheckResult grad_check(const LossClosure& loss, ParameterSet& params, std::size_t samples, double step,
                           std::uint64_t seed, double floor) {
  params.zero_grad();
  loss(true);
  const std::size_t total = params.total_size();
  std::vector<std::size_t> coords(total);
  std::iota(coords.begin(), coords.end(), 0);
  if (samples < total) {
    Rng rng(seed);
    for (std::size_t i = 0; i < samples; ++i) std::swap(coords[i], coords[i + rng.uniform_index(total - i)]);
    coords.resize(samples);
  }

  GradCheckResult res;
  for (std::size_t idx : coords) {
    const double analytic = params.grad_at(idx);
    double& w = params.value_at(idx);
    const double saved = w;
    w = saved + step;
    const double up = loss(false);
    w = saved - step;
    const double down = loss(false);
    w = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++res.checked;
    if (rel > res.max_rel_error || res.checked == 1) {
      res.max_rel_error = rel;
      res.worst_coordinate = idx;
      res.worst_analytic = analytic;
      res.worst_numeric = numeric;
    }
  }
  return res;
}

}  // namespace condgen::nn
