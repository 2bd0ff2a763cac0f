#include "canopyscan/tensor/adam.hpp"

#include <cmath>
#include <string>

#include "canopyscan/common/errors.hpp"

namespace canopyscan::tensor {

AdamState make_adam_state(std::span<Parameter* const> params, const AdamHyperparams& hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const Parameter* p : params) {
    s.first_moment.emplace_back(p->value.size(), 0.0);
    s.second_moment.emplace_back(p->value.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw ContractError("adam_step: optimizer state holds " + std::to_string(state.first_moment.size()) +
                        " moments for " + std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.grad.size() != p.value.size() || state.first_moment[i].size() != p.value.size())
      throw ContractError("adam_step: length mismatch for parameter " + std::to_string(i) + " (" + p.name + ")");
    for (double g : p.grad)
      if (!std::isfinite(g))
        throw OptimizerError("non-finite gradient in parameter " + std::to_string(i) + " (" + p.name + ")");
  }

  const auto& h = state.hyper;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g;
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p.value.data[j] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  }
}

}  // namespace canopyscan::tensor
