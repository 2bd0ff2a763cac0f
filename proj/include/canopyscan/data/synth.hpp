#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "canopyscan/data/dataset.hpp"
#include "canopyscan/health/health.hpp"

namespace canopyscan::data {

/// NIR response of a surface: a * G + b * (i_radiation / 1000) + c * sin(elevation).
struct NirResponse {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  bool operator==(const NirResponse&) const = default;
};

struct SpeciesCoefficients {
  std::string name;
  NirResponse nir;
  double ctd_true = 0.0;  // canopy temperature depression, deg C
};

struct SpeciesPalette {
  NirResponse background{0.5, 0.1, 0.05};
  std::vector<SpeciesCoefficients> species;

  static SpeciesPalette from_json(const std::string& text);
  static SpeciesPalette load(const std::filesystem::path& path);
  /// Non-empty, unique names, pairwise-distinct NIR coefficients.
  void validate() const;
  int index_of(const std::string& name) const;  // -1 if absent
  std::vector<std::string> names() const;
};

struct SynthSceneParams {
  std::uint64_t seed = 0;
  int n_trees = 1;
  SpeciesPalette palette;
  int species_id = 0;  // every crown in the scene shares the conditioning species
  double t_air = 25.0;
  double i_radiation = 600.0;
  solar::SolarPosition sun{180.0, 45.0};
  double noise_sigma = 0.01;  // reflectance units; thermal noise is 10x this in deg C
  int size = 64;
  std::string id = "scene";
  SampleMeta meta;
  PhysicalRanges ranges;
};

struct TreeTruth {
  std::string tree_id;
  int species_id = 0;
  double cx = 0.0, cy = 0.0, radius = 0.0;
  std::size_t pixels = 0;
  double ndvi = 0.0;         // recomputed from the emitted rasters
  double ctd = 0.0;          // recomputed from the emitted rasters
  double ctd_nominal = 0.0;  // the species' ctd_true
};

struct SynthScene {
  MultiSpectralSample sample;
  health::CanopyMask mask;
  std::vector<TreeTruth> trees;
};

/// Deterministic paired scene. Crowns are discs with green-dominant colour
/// (independent of species) and radial shading over a grey background.
/// All rasters are already quantized onto the file grids, so the ground truth
/// survives a write/read round trip exactly.
SynthScene synth_scene(const SynthSceneParams& params);

/// Writes <id>_mask.png and <id>_truth.json; returns the sidecar file name.
std::string write_ground_truth(const std::filesystem::path& dir, const SynthScene& scene);

struct GroundTruthFile {
  std::string mask_file;
  std::vector<TreeTruth> trees;
};
GroundTruthFile read_ground_truth(const std::filesystem::path& path);

struct SynthDatasetConfig {
  int samples = 32;
  std::uint64_t seed = 1;
  SpeciesPalette palette;
  double noise_sigma = 0.01;
  int size = 64;
  std::string id_prefix = "s";
  double t_air_min = 5.0, t_air_max = 35.0;
  double radiation_min = 200.0, radiation_max = 1000.0;
  double elevation_min = 10.0, elevation_max = 70.0;
};

/// Draws per-sample conditioning and species uniformly, writes each scene plus
/// its ground-truth sidecar into `dir`, and returns (and saves) the manifest.
DatasetManifest synth_dataset(const std::filesystem::path& dir, const SynthDatasetConfig& config);

/// The parameters synth_dataset uses for sample `index`; exposed so callers can
/// regenerate an individual scene in memory.
SynthSceneParams synth_dataset_params(const SynthDatasetConfig& config, int index);

}  // namespace canopyscan::data
