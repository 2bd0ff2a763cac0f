#include "canopyscan/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "canopyscan/common/errors.hpp"

namespace canopyscan::tensor {

namespace {

double evaluate(const ScalarFunction& fn, const std::vector<Tensor>& point) {
  Graph g(false);
  std::vector<Var> leaves;
  for (const Tensor& t : point) leaves.push_back(g.constant(t));
  const Var out = fn(g, leaves);
  if (out.value().size() != 1) throw ContractError("gradient_check: function must return a scalar");
  return out.value()[0];
}

double central(const ScalarFunction& fn, std::vector<Tensor>& point, std::size_t k, std::size_t i, double h) {
  const double x = point[k][i];
  point[k][i] = x + h;
  const double up = evaluate(fn, point);
  point[k][i] = x - h;
  const double down = evaluate(fn, point);
  point[k][i] = x;
  return (up - down) / (2.0 * h);
}

}  // namespace

GradCheckReport gradient_check(const ScalarFunction& fn, std::vector<Tensor> point, const GradCheckOptions& options) {
  GradCheckReport report;
  if (options.kink_margin > 0.0) {
    for (Tensor& t : point)
      for (double& v : t.data)
        if (std::abs(v) < options.kink_margin) {
          v = v < 0.0 ? -options.kink_margin : options.kink_margin;
          ++report.perturbed;
        }
  }

  std::vector<std::vector<double>> analytic;
  {
    Graph g(true);
    std::vector<Var> leaves;
    for (const Tensor& t : point) leaves.push_back(g.input(t));
    const Var out = fn(g, leaves);
    g.backward(out);
    for (const Var& v : leaves) analytic.push_back(g.grad(v));
  }

  for (std::size_t k = 0; k < point.size(); ++k) {
    for (std::size_t i = 0; i < point[k].size(); ++i) {
      const double numeric = central(fn, point, k, i, options.step);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
      const double half = central(fn, point, k, i, options.step / 2.0);
      if (std::abs(half - numeric) / denom > options.tolerance) {
        ++report.skipped;
        continue;
      }
      ++report.checked;
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_relative_error || (report.checked == 1 && rel == 0.0)) {
        report.max_relative_error = rel;
        report.worst_input = k;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error < options.tolerance && report.checked > 0;
  return report;
}

}  // namespace canopyscan::tensor
