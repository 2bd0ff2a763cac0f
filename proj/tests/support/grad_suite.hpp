#pragma once

// Finite-difference gradient cases for every differentiable tensor op.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "canopyscan/tensor/gradcheck.hpp"
#include "canopyscan/tensor/ops.hpp"
#include "support/oracles.hpp"

namespace grad_suite {

using namespace canopyscan::tensor;

struct Case {
  std::string name;
  std::function<std::vector<Tensor>(std::mt19937_64&)> make_point;
  ScalarFunction fn;
  double kink_margin = 0.0;
};

// Contract an op output with fixed pseudo-random weights so every output
// element influences the scalar differently.
inline Var contract(Graph& g, Var out, std::uint64_t salt) {
  std::mt19937_64 rng(0x5eed + salt);
  return sum(mul(out, g.constant(oracle::random_tensor(out.shape(), rng))));
}

inline std::vector<Case> cases() {
  std::vector<Case> c;
  auto shapes = [](std::vector<Shape> s) {
    return [s](std::mt19937_64& rng) {
      std::vector<Tensor> out;
      for (const Shape& sh : s) out.push_back(oracle::random_tensor(sh, rng));
      return out;
    };
  };

  c.push_back({"conv2d", shapes({{2, 2, 5, 6}, {3, 2, 3, 3}, {3}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, conv2d(v[0], v[1], v[2], 2, 1), 1); }});
  c.push_back({"conv_transpose2d", shapes({{2, 3, 3, 4}, {3, 2, 4, 4}, {2}}),
               [](Graph& g, const std::vector<Var>& v) {
                 return contract(g, conv_transpose2d(v[0], v[1], v[2], 2, 1), 2);
               }});
  c.push_back({"leaky_relu", shapes({{2, 3, 4}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, leaky_relu(v[0], 0.2), 3); }, 1e-3});
  c.push_back({"relu", shapes({{2, 3, 4}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, relu(v[0]), 4); }, 1e-3});
  c.push_back({"tanh", shapes({{2, 3, 4}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, tanh(scale(v[0], 2.0)), 5); }});
  c.push_back({"sigmoid", shapes({{2, 3, 4}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, sigmoid(scale(v[0], 3.0)), 6); }});
  c.push_back({"instance_norm", shapes({{2, 2, 3, 4}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, instance_norm(v[0], 1e-5), 7); }});
  c.push_back({"concat", shapes({{2, 1, 3, 3}, {2, 2, 3, 3}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, concat({v[0], v[1]}, 1), 8); }});
  c.push_back({"add", shapes({{3, 4}, {3, 4}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, add(v[0], v[1]), 9); }});
  c.push_back({"sub", shapes({{3, 4}, {3, 4}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, sub(v[0], v[1]), 10); }});
  c.push_back({"mul", shapes({{3, 4}, {3, 4}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, mul(v[0], v[1]), 11); }});
  c.push_back({"scale", shapes({{3, 4}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, scale(v[0], -1.7), 12); }});
  c.push_back({"sum", shapes({{3, 4}}), [](Graph&, const std::vector<Var>& v) { return sum(v[0]); }});
  c.push_back({"mean", shapes({{3, 4}}), [](Graph&, const std::vector<Var>& v) { return mean(v[0]); }});
  c.push_back({"l1_loss", shapes({{2, 1, 4, 4}, {2, 1, 4, 4}}),
               [](Graph&, const std::vector<Var>& v) { return l1_loss(v[0], v[1]); }});
  c.push_back({"bce_with_logits", shapes({{2, 1, 3, 3}, {2, 1, 3, 3}}),
               [](Graph&, const std::vector<Var>& v) { return bce_with_logits(scale(v[0], 4.0), v[1]); }});
  c.push_back({"linear", shapes({{3, 5}, {4, 5}, {4}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, linear(v[0], v[1], v[2]), 13); }});
  c.push_back({"embedding", shapes({{4, 3}}),
               [](Graph& g, const std::vector<Var>& v) {
                 const int ids[] = {2, 0, 2};
                 return contract(g, embedding(v[0], ids), 14);
               }});
  c.push_back({"broadcast_spatial", shapes({{2, 3}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, broadcast_spatial(v[0], 3, 2), 15); }});
  c.push_back({"film", shapes({{2, 3, 2, 2}, {2, 3}, {2, 3}}),
               [](Graph& g, const std::vector<Var>& v) { return contract(g, film(v[0], v[1], v[2]), 16); }});
  c.push_back({"conv2d_leaky_relu_chain", shapes({{1, 2, 6, 6}, {3, 2, 3, 3}}),
               [](Graph&, const std::vector<Var>& v) {
                 return sum(leaky_relu(conv2d(v[0], v[1], std::nullopt, 1, 1), 0.2));
               }});
  return c;
}

}  // namespace grad_suite
