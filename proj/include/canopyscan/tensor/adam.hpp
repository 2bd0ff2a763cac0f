#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "canopyscan/tensor/tensor.hpp"

namespace canopyscan::tensor {

struct AdamHyperparams {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::int64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  AdamHyperparams hyper;
};

/// Zero moments sized to the parameter list.
AdamState make_adam_state(std::span<Parameter* const> params, const AdamHyperparams& hyper);

/// One bias-corrected Adam update using each parameter's accumulated grad:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
/// Throws OptimizerError (naming the parameter index) before touching any
/// parameter if a gradient is non-finite.
void adam_step(std::span<Parameter* const> params, AdamState& state);

}  // namespace canopyscan::tensor
