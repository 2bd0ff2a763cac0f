#include "canopyscan/data/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "canopyscan/common/errors.hpp"
#include "json.hpp"

namespace canopyscan::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

NirResponse response_from_json(const json& j) {
  return {j.at("a").get<double>(), j.at("b").get<double>(), j.at("c").get<double>()};
}

double nir_value(const NirResponse& k, double green, double radiation, double elevation_deg) {
  return k.a * green + k.b * (radiation / 1000.0) + k.c * std::sin(elevation_deg * std::numbers::pi / 180.0);
}

std::mt19937_64 scene_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

SpeciesPalette SpeciesPalette::from_json(const std::string& text) {
  SpeciesPalette p;
  try {
    const json j = json::parse(text);
    if (j.contains("background")) p.background = response_from_json(j["background"]);
    for (const auto& s : j.at("species"))
      p.species.push_back({s.at("name").get<std::string>(), response_from_json(s), s.at("ctd").get<double>()});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("species palette: ") + e.what());
  }
  p.validate();
  return p;
}

SpeciesPalette SpeciesPalette::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open species palette " + path.string());
  return from_json(std::string(std::istreambuf_iterator<char>(in), {}));
}

void SpeciesPalette::validate() const {
  if (species.empty()) throw ConfigError("species palette is empty");
  std::set<std::string> names;
  for (std::size_t i = 0; i < species.size(); ++i) {
    if (!names.insert(species[i].name).second) throw ConfigError("duplicate species " + species[i].name);
    for (std::size_t j = 0; j < i; ++j)
      if (species[i].nir == species[j].nir)
        throw ConfigError("species " + species[i].name + " and " + species[j].name + " share NIR coefficients");
  }
}

int SpeciesPalette::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < species.size(); ++i)
    if (species[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> SpeciesPalette::names() const {
  std::vector<std::string> out;
  for (const auto& s : species) out.push_back(s.name);
  return out;
}

SynthScene synth_scene(const SynthSceneParams& p) {
  p.palette.validate();
  p.ranges.validate();
  if (p.size < 8) throw SizeError("synthetic scene must be at least 8 pixels");
  if (p.n_trees < 1) throw ConfigError("a scene needs at least one tree");
  if (!(p.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be non-negative");
  if (p.species_id < 0 || p.species_id >= static_cast<int>(p.palette.species.size()))
    throw VocabularyError("species id " + std::to_string(p.species_id) + " not in palette");

  const int S = p.size;
  std::mt19937_64 rng = scene_rng(p.seed, 0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto noise = [&](double sigma) { return sigma > 0.0 ? sigma * gauss(rng) : 0.0; };

  SynthScene scene;
  const auto& sp = p.palette.species[static_cast<std::size_t>(p.species_id)];

  // crown layout
  for (int t = 0; t < p.n_trees; ++t) {
    TreeTruth tree;
    tree.tree_id = p.id + "_t" + std::to_string(t);
    tree.species_id = p.species_id;
    tree.ctd_nominal = sp.ctd_true;
    for (int attempt = 0; attempt < 200; ++attempt) {
      if (p.n_trees == 1) {
        tree.radius = uni(0.25 * S, 0.36 * S);
        tree.cx = S / 2.0 + uni(-0.1 * S, 0.1 * S);
        tree.cy = S / 2.0 + uni(-0.1 * S, 0.1 * S);
      } else {
        tree.radius = uni(0.08 * S, 0.16 * S);
        tree.cx = uni(tree.radius, S - tree.radius);
        tree.cy = uni(tree.radius, S - tree.radius);
      }
      bool clear = true;
      for (const auto& other : scene.trees)
        clear &= std::hypot(tree.cx - other.cx, tree.cy - other.cy) > tree.radius + other.radius + 1.0;
      if (clear) break;
    }
    scene.trees.push_back(tree);
  }

  // per-scene colour draws
  const double grey = uni(0.35, 0.6);
  const double tint_r = uni(0.0, 0.03), tint_b = uni(0.0, 0.03), tint_g = -uni(0.0, 0.03);
  const double grad_x = uni(-0.05, 0.05), grad_y = uni(-0.05, 0.05);
  std::vector<std::array<double, 3>> crown_colour;
  for (std::size_t t = 0; t < scene.trees.size(); ++t)
    crown_colour.push_back({uni(0.12, 0.18), uni(0.45, 0.6), uni(0.08, 0.14)});

  MultiSpectralSample& s = scene.sample;
  s.id = p.id;
  s.meta = p.meta;
  s.cond = {p.i_radiation, p.sun, p.t_air, p.species_id};
  s.rgb = {Raster(S, S), Raster(S, S), Raster(S, S)};
  s.nir = Raster(S, S);
  s.thermal = Raster(S, S);
  scene.mask = {S, S, std::vector<std::uint8_t>(static_cast<std::size_t>(S) * S, 0)};
  std::vector<int> owner(static_cast<std::size_t>(S) * S, -1);

  const double thermal_sigma = 10.0 * p.noise_sigma;
  const auto clamp_t = [&](double t) { return std::clamp(t, p.ranges.thermal_min_c, p.ranges.thermal_max_c); };

  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * S + x;
      int tree = -1;
      double shade = 1.0;
      for (std::size_t t = 0; t < scene.trees.size(); ++t) {
        const auto& tr = scene.trees[t];
        const double d = std::hypot(x + 0.5 - tr.cx, y + 0.5 - tr.cy);
        if (d <= tr.radius) {
          tree = static_cast<int>(t);
          shade = 1.0 - 0.25 * (d / tr.radius) * (d / tr.radius);
          break;
        }
      }
      double r, g, b;
      if (tree >= 0) {
        const auto& c = crown_colour[static_cast<std::size_t>(tree)];
        r = c[0] * shade, g = c[1] * shade, b = c[2] * shade;
      } else {
        const double base = grey + grad_x * (x - S / 2.0) / S + grad_y * (y - S / 2.0) / S;
        r = base + tint_r, g = base + tint_g, b = base + tint_b;
      }
      r = quantize_rgb(std::clamp(r + noise(p.noise_sigma), 0.0, 1.0));
      g = quantize_rgb(std::clamp(g + noise(p.noise_sigma), 0.0, 1.0));
      b = quantize_rgb(std::clamp(b + noise(p.noise_sigma), 0.0, 1.0));
      s.rgb.r.values[i] = r;
      s.rgb.g.values[i] = g;
      s.rgb.b.values[i] = b;

      const NirResponse& k = tree >= 0 ? sp.nir : p.palette.background;
      s.nir.values[i] = quantize_reflectance16(
          std::clamp(nir_value(k, g, p.i_radiation, p.sun.elevation) + noise(p.noise_sigma), 0.0, 1.0));
      const double t_nominal = tree >= 0 ? p.t_air - sp.ctd_true : p.t_air + 5.0;
      s.thermal.values[i] = quantize_thermal(clamp_t(t_nominal + noise(thermal_sigma)));

      owner[i] = tree;
      if (tree >= 0) scene.mask.bits[i] = 1;
    }

  // ground truth from the emitted rasters
  const Raster ndvi = health::ndvi_map(s.nir, s.rgb.r);
  for (std::size_t t = 0; t < scene.trees.size(); ++t) {
    health::CanopyMask own{S, S, std::vector<std::uint8_t>(owner.size(), 0)};
    double ndvi_sum = 0.0;
    for (std::size_t i = 0; i < owner.size(); ++i)
      if (owner[i] == static_cast<int>(t)) own.bits[i] = 1, ndvi_sum += ndvi.values[i];
    auto& tr = scene.trees[t];
    tr.pixels = own.count();
    if (tr.pixels == 0) continue;
    tr.ndvi = ndvi_sum / static_cast<double>(tr.pixels);
    tr.ctd = health::ctd(s.thermal, own, p.t_air);
  }
  return scene;
}

std::string write_ground_truth(const fs::path& dir, const SynthScene& scene) {
  const std::string mask_file = scene.sample.id + "_mask.png";
  Image8 mask{scene.mask.width, scene.mask.height, 1, {}};
  for (auto bit : scene.mask.bits) mask.pixels.push_back(bit ? 255 : 0);
  write_file(dir / mask_file, encode_png(mask));

  json trees = json::array();
  for (const auto& t : scene.trees)
    trees.push_back({{"tree_id", t.tree_id},
                     {"species_id", t.species_id},
                     {"center", {t.cx, t.cy}},
                     {"radius", t.radius},
                     {"pixels", t.pixels},
                     {"ndvi", t.ndvi},
                     {"ctd", t.ctd},
                     {"ctd_nominal", t.ctd_nominal}});
  const std::string text = json{{"mask", mask_file}, {"trees", trees}}.dump(2) + "\n";
  const std::string name = scene.sample.id + "_truth.json";
  write_file(dir / name, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return name;
}

GroundTruthFile read_ground_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open ground truth " + path.string());
  GroundTruthFile out;
  try {
    const json j = json::parse(in);
    out.mask_file = j.at("mask").get<std::string>();
    for (const auto& t : j.at("trees")) {
      TreeTruth tr;
      tr.tree_id = t.at("tree_id").get<std::string>();
      tr.species_id = t.at("species_id").get<int>();
      tr.cx = t.at("center").at(0).get<double>();
      tr.cy = t.at("center").at(1).get<double>();
      tr.radius = t.at("radius").get<double>();
      tr.pixels = t.at("pixels").get<std::size_t>();
      tr.ndvi = t.at("ndvi").get<double>();
      tr.ctd = t.at("ctd").get<double>();
      tr.ctd_nominal = t.at("ctd_nominal").get<double>();
      out.trees.push_back(tr);
    }
  } catch (const json::exception& e) {
    throw ManifestError("malformed ground truth " + path.string() + ": " + e.what());
  }
  return out;
}

SynthSceneParams synth_dataset_params(const SynthDatasetConfig& c, int index) {
  std::mt19937_64 rng = scene_rng(c.seed, 1'000'003ULL + static_cast<std::uint64_t>(index));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  SynthSceneParams p;
  p.palette = c.palette;
  p.noise_sigma = c.noise_sigma;
  p.size = c.size;
  p.id = c.id_prefix + std::to_string(index);
  p.species_id = static_cast<int>(u01(rng) * static_cast<double>(c.palette.species.size()));
  p.species_id = std::min(p.species_id, static_cast<int>(c.palette.species.size()) - 1);
  p.t_air = uni(c.t_air_min, c.t_air_max);
  p.i_radiation = uni(c.radiation_min, c.radiation_max);
  p.sun.azimuth = uni(0.0, 360.0);
  if (p.sun.azimuth >= 360.0) p.sun.azimuth = 0.0;
  p.sun.elevation = uni(c.elevation_min, c.elevation_max);
  p.seed = rng();
  p.meta.source_id = "synthetic";
  p.meta.captured_at = from_unix_millis(1'719'000'000'000LL + 3'600'000LL * index);
  return p;
}

DatasetManifest synth_dataset(const fs::path& dir, const SynthDatasetConfig& config) {
  if (config.samples < 1) throw ConfigError("synthetic dataset needs at least one sample");
  config.palette.validate();
  DatasetManifest m;
  for (int i = 0; i < config.samples; ++i) {
    const SynthScene scene = synth_scene(synth_dataset_params(config, i));
    ManifestEntry e = write_sample(dir, scene.sample, m.normalization);
    e.ground_truth = write_ground_truth(dir, scene);
    m.samples.push_back(std::move(e));
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace canopyscan::data
