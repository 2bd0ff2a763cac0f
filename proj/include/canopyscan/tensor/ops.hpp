#pragma once

#include <optional>
#include <span>
#include <vector>

#include "canopyscan/tensor/graph.hpp"

namespace canopyscan::tensor {

/// Cross-correlation. x [N,C,H,W], weight [K,C,kh,kw], bias [K].
Var conv2d(Var x, Var weight, std::optional<Var> bias, int stride, int padding);

/// Transposed convolution (adjoint of conv2d w.r.t. its input).
/// x [N,C,H,W], weight [C,K,kh,kw], bias [K]; output spatial (H-1)*stride - 2*padding + kh.
Var conv_transpose2d(Var x, Var weight, std::optional<Var> bias, int stride, int padding);

Var leaky_relu(Var x, double slope);
Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);

/// Per-sample, per-channel normalization over H,W with biased variance.
Var instance_norm(Var x, double eps = 1e-5);

Var concat(const std::vector<Var>& parts, int axis);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var sum(Var x);
Var mean(Var x);

/// mean |pred - target|
Var l1_loss(Var pred, Var target);
/// mean of max(z,0) - z*y + log1p(exp(-|z|)), stable for large |z|.
Var bce_with_logits(Var logits, double label);
Var bce_with_logits(Var logits, Var labels);

/// x [N,I], weight [O,I], bias [O] -> [N,O]
Var linear(Var x, Var weight, std::optional<Var> bias);
/// Row gather: table [V,E], ids -> [ids.size(), E]. Throws VocabularyError.
Var embedding(Var table, std::span<const int> ids);
/// v [N,E] -> [N,E,H,W]
Var broadcast_spatial(Var v, int height, int width);
/// x * (1 + gamma) + beta with gamma, beta [N,C] broadcast over H,W.
Var film(Var x, Var gamma, Var beta);

}  // namespace canopyscan::tensor
