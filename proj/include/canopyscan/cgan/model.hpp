#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "canopyscan/data/dataset.hpp"
#include "canopyscan/solar/solar.hpp"
#include "canopyscan/tensor/adam.hpp"
#include "canopyscan/tensor/graph.hpp"

namespace canopyscan::cgan {

enum class Injection { bottleneck_concat, film };
const char* to_string(Injection i);
Injection injection_from_string(const std::string& s);

/// How the thermal target is put into network space. `absolute` is the plain
/// affine map of physical::thermal_{min,max}_c. `air_relative` maps the
/// difference to the sample's air temperature, (T - t_air) / span, so the
/// generator only has to learn the canopy/background anomaly.
enum class ThermalEncoding { absolute, air_relative };
const char* to_string(ThermalEncoding e);
ThermalEncoding thermal_encoding_from_string(const std::string& s);

struct GeneratorConfig {
  int image_size = 64;
  int base_channels = 16;
  int depth = 4;
  int embedding_dim = 16;
  int species_vocab_size = 1;
  Injection injection = Injection::bottleneck_concat;
  int output_channels = 1;

  void validate() const;
  /// Feature channels after encoder stage i: base * 2^min(i, 3).
  int stage_channels(int stage) const;
};

/// PatchGAN: `layers` stride-2 convolutions, one stride-1 convolution, then a
/// stride-1 single-channel logit layer (all 4x4 kernels).
struct DiscriminatorConfig {
  int base_channels = 16;
  int layers = 3;
  void validate() const;
  int stage_channels(int stage) const { return base_channels << std::min(stage, 3); }
};

struct ModelConfig {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  data::Channel target = data::Channel::nir;
  std::vector<std::string> species_vocab;  // index = species_id
  solar::ConditioningRanges conditioning;
  data::PhysicalRanges physical;
  ThermalEncoding thermal_encoding = ThermalEncoding::air_relative;
  double thermal_anomaly_span_c = 20.0;  // +-span maps to +-1 (air_relative only)

  void validate() const;
  bool operator==(const ModelConfig&) const;
};

/// Named, ordered parameter set. Addresses are stable after construction.
class ParameterSet {
 public:
  tensor::Parameter& add(const std::string& name, tensor::Tensor value);
  tensor::Parameter& at(const std::string& name);
  const tensor::Parameter& at(const std::string& name) const;
  std::vector<tensor::Parameter>& all() { return params_; }
  const std::vector<tensor::Parameter>& all() const { return params_; }
  std::vector<tensor::Parameter*> pointers();
  void zero_grad();
  std::size_t count() const;  // total scalar count
  void reserve(std::size_t n) { params_.reserve(n); }

 private:
  std::vector<tensor::Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// A generator/discriminator pair for one target channel.
struct CganModel {
  ModelConfig config;
  ParameterSet generator;
  ParameterSet discriminator;
};

/// Fresh model: conv weights ~ N(0, 0.02), biases 0, species rows ~ N(0, 1)
/// (asserted pairwise distinct).
CganModel init_model(const ModelConfig& config, std::uint64_t seed);

/// Generator inputs for a batch: normalized features plus species index.
struct Conditioning {
  solar::ConditioningFeatures features{};
  int species_id = 0;
};
Conditioning make_conditioning(const solar::ConditioningVector& cond, const ModelConfig& config);

/// How a forward pass binds parameters: trainable (gradients accumulate into
/// Parameter::grad) or frozen constants.
enum class Binding { trainable, frozen };

/// embedding = W f + b + species_rows[id]; returns [N, embedding_dim].
tensor::Var embed_conditioning(tensor::Graph& g, CganModel& model, std::span<const Conditioning> cond,
                               Binding binding = Binding::trainable);

/// rgb [N,3,S,S] in [-1,1] -> [N,1,S,S] in [-1,1].
tensor::Var generator_forward(tensor::Graph& g, CganModel& model, tensor::Var rgb, std::span<const Conditioning> cond,
                              Binding binding = Binding::trainable);

/// Patch logits [N,1,h,w] for (rgb, candidate).
tensor::Var discriminator_forward(tensor::Graph& g, CganModel& model, tensor::Var rgb, tensor::Var candidate,
                                  Binding binding = Binding::trainable);

/// Inference with no gradient tape. Throws ChannelMismatchError when the
/// model's target differs from `expected`, DimensionError on a wrong size.
tensor::Tensor generate(const CganModel& model, data::Channel expected, const tensor::Tensor& rgb,
                        std::span<const solar::ConditioningVector> cond);

tensor::Tensor discriminate(const CganModel& model, const tensor::Tensor& rgb, const tensor::Tensor& candidate);

// ---- training ----

struct TrainConfig {
  double lambda_l1 = 100.0;
  tensor::AdamHyperparams adam;
  int batch_size = 1;
  int max_steps = 2000;
  std::uint64_t seed = 0;
  int checkpoint_interval = 0;  // 0 = only at the end
  void validate() const;
};

struct LossReport {
  int step = 0;
  double loss_d = 0.0;
  double loss_g_adv = 0.0;
  double loss_g_l1 = 0.0;
  double loss_g_total = 0.0;
};

std::string to_json_line(const LossReport& r);

/// Target channel physical <-> network space. Thermal rasters need the
/// sample's air temperature under the air_relative encoding.
Raster target_to_network(const Raster& physical, const ModelConfig& config, double t_air);
Raster target_from_network(const Raster& network, const ModelConfig& config, double t_air);

/// One training pair in network space.
struct TrainingPair {
  tensor::Tensor rgb;     // [3,S,S]
  tensor::Tensor target;  // [1,S,S]
  Conditioning cond;
};

TrainingPair make_pair(const data::MultiSpectralSample& sample, const ModelConfig& config);

struct Optimizers {
  tensor::AdamState generator;
  tensor::AdamState discriminator;
};
Optimizers make_optimizers(CganModel& model, const tensor::AdamHyperparams& hyper);

/// Pix2pix update: D on real vs detached fake, then G on adversarial + L1.
/// Throws TrainingError naming `step` on a non-finite loss.
LossReport train_step(CganModel& model, Optimizers& opt, std::span<const TrainingPair* const> batch,
                      const TrainConfig& config, int step = 0);

struct TrainOutputs {
  std::filesystem::path checkpoint;  // written at intervals and at the end (empty = don't write)
  std::filesystem::path loss_log;    // JSONL, appended one line per step (empty = don't write)
};

/// Trains on `pairs` for config.max_steps steps, visiting pairs in a seeded
/// shuffle per epoch. Returns the per-step loss reports.
std::vector<LossReport> train(CganModel& model, std::span<const TrainingPair> pairs, const TrainConfig& config,
                              const TrainOutputs& outputs = {});

// ---- checkpoints ----

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const CganModel& model);
CganModel deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const CganModel& model, const std::filesystem::path& path);
CganModel load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

}  // namespace canopyscan::cgan
