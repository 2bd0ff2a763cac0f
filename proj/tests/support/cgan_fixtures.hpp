#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "canopyscan/cgan/model.hpp"

namespace canopyscan::testing {

inline cgan::ModelConfig small_config(int size = 32, int depth = 3, int vocab = 3) {
  cgan::ModelConfig c;
  c.generator.image_size = size;
  c.generator.depth = depth;
  c.generator.base_channels = 4;
  c.generator.embedding_dim = 4;
  c.generator.species_vocab_size = vocab;
  c.discriminator.base_channels = 4;
  c.discriminator.layers = 2;
  for (int i = 0; i < vocab; ++i) c.species_vocab.push_back("sp" + std::to_string(i));
  return c;
}

inline tensor::Tensor random_rgb(int n, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  tensor::Tensor t({n, 3, size, size});
  for (double& v : t.data) v = u(rng);
  return t;
}

inline std::vector<cgan::TrainingPair> random_pairs(const cgan::ModelConfig& c, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  const int s = c.generator.image_size;
  std::vector<cgan::TrainingPair> out;
  for (int i = 0; i < count; ++i) {
    cgan::TrainingPair p;
    p.rgb = tensor::Tensor({3, s, s});
    for (double& v : p.rgb.data) v = u(rng);
    p.target = tensor::Tensor({1, s, s});
    // a learnable target: a fixed blend of the input channels
    for (int k = 0; k < s * s; ++k) p.target.data[k] = 0.5 * p.rgb.data[k] - 0.3 * p.rgb.data[s * s + k];
    for (double& f : p.cond.features) f = u(rng);
    p.cond.species_id = i % c.generator.species_vocab_size;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace canopyscan::testing
