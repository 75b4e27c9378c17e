#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "condgen/nn/parameters.hpp"

namespace condgen::nn {

/// Evaluates the loss. With `backward` set it must also accumulate gradients
/// into the (already zeroed) parameter buffers.
using LossClosure = std::function<double(bool backward)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Central finite differences on `samples` coordinates drawn without
/// replacement (all coordinates when samples >= total). The relative error
/// is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const LossClosure& loss, ParameterSet& params, std::size_t samples, double step,
                           std::uint64_t seed, double floor = 1e-6);

}  // namespace condgen::nn
