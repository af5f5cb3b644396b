#pragma once

#include "acklab/tensor.hpp"

#include <functional>

namespace acklab {

// Builds the scalar loss on the given tape. Must be deterministic.
using LossFn = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Compares the tape gradient of `loss` against central differences
// (f(θ+eps) - f(θ-eps)) / (2 eps) for every element of every parameter.
// Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check_detailed(const LossFn& loss, std::span<Parameter* const> params, double eps = 1e-4);

double grad_check(const LossFn& loss, std::span<Parameter* const> params, double eps = 1e-4);

}  // namespace acklab
