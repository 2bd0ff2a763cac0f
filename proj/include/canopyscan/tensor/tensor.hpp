#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace canopyscan::tensor {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles. Values are immutable once a tensor is
/// recorded in a graph; parameters are updated only between graphs.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int axis) const { return shape.at(static_cast<std::size_t>(axis)); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  std::span<const double> view() const { return data; }

  bool operator==(const Tensor&) const = default;

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }
};

/// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v);
  void zero_grad();
};

}  // namespace canopyscan::tensor
