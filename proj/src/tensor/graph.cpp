#include "canopyscan/tensor/graph.hpp"

#include "canopyscan/common/errors.hpp"

namespace canopyscan::tensor {

const Tensor& Var::value() const {
  if (!graph) throw ContractError("unbound Var");
  return graph->value(id);
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::ConvTranspose2d: return "conv_transpose2d";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::Relu: return "relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::InstanceNorm: return "instance_norm";
    case OpKind::Concat: return "concat";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::L1Loss: return "l1_loss";
    case OpKind::BceWithLogits: return "bce_with_logits";
    case OpKind::Linear: return "linear";
    case OpKind::Embedding: return "embedding";
    case OpKind::BroadcastSpatial: return "broadcast_spatial";
    case OpKind::Film: return "film";
  }
  return "unknown";
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = recording_;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = recording_;
  n.parameter = &p;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::record(OpKind kind, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  bool needs = false;
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.graph != this) throw ContractError(std::string(op_name(kind)) + ": input from another graph");
    n.inputs.push_back(v.id);
    needs = needs || nodes_[static_cast<std::size_t>(v.id)].requires_grad;
  }
  if (recording_ && needs) {
    n.requires_grad = true;
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

std::vector<double>* Graph::grad_sink(int id) {
  auto& node = nodes_.at(static_cast<std::size_t>(id));
  if (!node.requires_grad) return nullptr;
  auto& g = grads_[static_cast<std::size_t>(id)];
  if (g.empty()) g.assign(node.value.size(), 0.0);
  return &g;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw ContractError("backward: loss from another graph");
  const auto& loss_node = nodes_.at(static_cast<std::size_t>(loss.id));
  if (loss_node.value.size() != 1)
    throw ContractError("backward: loss must be scalar, got shape " + to_string(loss_node.value.shape));
  grads_.assign(nodes_.size(), {});
  if (!loss_node.requires_grad) return;
  grads_[static_cast<std::size_t>(loss.id)] = {1.0};

  for (int id = loss.id; id >= 0; --id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    auto& g = grads_[static_cast<std::size_t>(id)];
    if (!node.requires_grad) continue;
    if (g.empty()) g.assign(node.value.size(), 0.0);
    if (node.backward) node.backward(*this, g);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    auto& node = nodes_[id];
    if (!node.requires_grad || node.kind != OpKind::Leaf) continue;
    auto& g = grads_[id];
    if (g.empty()) g.assign(node.value.size(), 0.0);
    if (!node.parameter) continue;
    auto& pg = node.parameter->grad;
    if (pg.size() != g.size()) pg.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
  }
}

const std::vector<double>& Graph::grad(Var v) const {
  if (v.graph != this) throw ContractError("grad: Var from another graph");
  if (static_cast<std::size_t>(v.id) >= grads_.size() || grads_[static_cast<std::size_t>(v.id)].empty())
    throw ContractError("grad: no gradient recorded for node " + std::to_string(v.id));
  return grads_[static_cast<std::size_t>(v.id)];
}

}  // namespace canopyscan::tensor
