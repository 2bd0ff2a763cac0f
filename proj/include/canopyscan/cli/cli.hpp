#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "canopyscan/cgan/model.hpp"

namespace canopyscan::cli {

// Process exit codes. Stable: scripts depend on them.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // anything not covered below (I/O, corrupt files)
inline constexpr int kExitUsage = 2;    // bad flags, config or manifest
inline constexpr int kExitMismatch = 3; // checkpoint holds the wrong channel
inline constexpr int kExitService = 4;  // an external service failed

/// Everything `canopyscan train --config` can set. Omitted keys keep the
/// library defaults:
///   {"model_seed": 0,
///    "species_vocab": ["Acer", ...],
///    "generator": {"image_size", "base_channels", "depth", "embedding_dim",
///                  "conditioning_injection"},
///    "discriminator": {"base_channels", "layers"},
///    "thermal": {"encoding": "air_relative" | "absolute", "anomaly_span_c"},
///    "train": {"lambda_l1", "learning_rate", "beta1", "beta2", "epsilon",
///              "batch_size", "max_steps", "seed", "checkpoint_interval"}}
/// Throws ConfigError.
struct TrainSettings {
  cgan::ModelConfig model;
  cgan::TrainConfig train;
  std::uint64_t model_seed = 0;
  bool has_vocab = false;
};
TrainSettings parse_train_settings(const std::string& json_text);

/// Entry point shared by the `canopyscan` executable and the tests.
int run(int argc, const char* const* argv);

}  // namespace canopyscan::cli
