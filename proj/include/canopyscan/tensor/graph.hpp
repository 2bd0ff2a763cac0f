#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "canopyscan/tensor/tensor.hpp"

namespace canopyscan::tensor {

class Graph;

/// Handle to a node on a Graph's tape.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  int dim(int axis) const { return value().dim(axis); }
};

enum class OpKind {
  Leaf,
  Conv2d,
  ConvTranspose2d,
  LeakyRelu,
  Relu,
  Tanh,
  Sigmoid,
  InstanceNorm,
  Concat,
  Add,
  Sub,
  Mul,
  Scale,
  Sum,
  Mean,
  L1Loss,
  BceWithLogits,
  Linear,
  Embedding,
  BroadcastSpatial,
  Film,
};

const char* op_name(OpKind kind);

/// Accumulates the node's output gradient into its inputs' gradients.
using BackwardFn = std::function<void(Graph&, std::span<const double> grad_out)>;

struct Node {
  OpKind kind = OpKind::Leaf;
  std::vector<int> inputs;
  Tensor value;
  bool requires_grad = false;
  Parameter* parameter = nullptr;
  BackwardFn backward;
};

/// Tape of operation records in creation order, which is a topological order
/// by construction. When recording is off (inference) no backward closures
/// are kept.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the graph (read with grad()).
  Var input(Tensor value);
  /// Leaf bound to a parameter; backward() adds into parameter.grad.
  Var parameter(Parameter& p);

  Var record(OpKind kind, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  /// Reverse sweep from a scalar loss. Every grad-requiring leaf ends with a
  /// gradient buffer (zeros if disconnected from the loss).
  void backward(Var loss);

  const Tensor& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return recording_; }

  /// Gradient of the loss w.r.t. a node after backward(); throws if absent.
  const std::vector<double>& grad(Var v) const;

  /// Used by backward closures: the gradient buffer to accumulate into, or
  /// nullptr when the input does not require a gradient.
  std::vector<double>* grad_sink(int id);

 private:
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool recording_;
};

}  // namespace canopyscan::tensor
