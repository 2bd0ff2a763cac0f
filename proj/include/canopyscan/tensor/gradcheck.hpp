#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "canopyscan/tensor/graph.hpp"

namespace canopyscan::tensor {

/// Builds a scalar from the given leaves on a fresh graph.
using ScalarFunction = std::function<Var(Graph&, const std::vector<Var>&)>;

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  /// When positive, input coordinates with |x| < kink_margin are moved to
  /// +/-kink_margin before checking (0 maps to +kink_margin). Use for ops
  /// with a kink at the origin (relu family, abs).
  double kink_margin = 0.0;
};

struct GradCheckReport {
  bool passed = true;
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  /// Inputs moved off a kink by kink_margin.
  std::size_t perturbed = 0;
  /// Coordinates where the central difference at step and step/2 disagree,
  /// i.e. a kink of some intermediate lies within the stencil. Not scored.
  std::size_t skipped = 0;
};

/// Relative error is |a - n| / max(|a|, |n|, 1e-3), with n the central
/// difference (f(x+h) - f(x-h)) / 2h.
GradCheckReport gradient_check(const ScalarFunction& fn, std::vector<Tensor> point,
                               const GradCheckOptions& options = {});

}  // namespace canopyscan::tensor
