#include "canopyscan/health/health.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include "json.hpp"

#include "canopyscan/common/errors.hpp"

namespace canopyscan::health {

namespace {

constexpr int kBins = 256;

void check_unit(const Raster& r, const char* what) {
  for (double v : r.values) {
    if (!std::isfinite(v)) throw InputError(std::string("non-finite value in ") + what);
    if (v < 0.0 || v > 1.0) throw InputError(std::string(what) + " value outside [0,1]: " + std::to_string(v));
  }
}

void require_shape(const Raster& a, const Raster& b, const char* what) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(what) + ": " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                         " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
}

void require_mask(const Raster& r, const CanopyMask& m) {
  if (r.width != m.width || r.height != m.height) throw DimensionError("mask shape differs from raster");
}

GenusRule parse_rule(const nlohmann::json& j, const std::string& key) {
  if (!j.is_object()) throw ConfigError("threshold entry '" + key + "' must be an object");
  GenusRule rule;
  if (j.contains("ndvi_healthy_min")) rule.ndvi_healthy_min = j.at("ndvi_healthy_min").get<double>();
  if (j.contains("ctd_healthy_min")) rule.ctd_healthy_min = j.at("ctd_healthy_min").get<double>();
  return rule;
}

}  // namespace

std::size_t CanopyMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

GenusThresholds::GenusThresholds() { rules_["default"] = GenusRule{}; }

void GenusThresholds::set(const std::string& genus, const GenusRule& rule) {
  if (!(rule.ndvi_healthy_min >= -1.0 && rule.ndvi_healthy_min <= 1.0))
    throw ConfigError("ndvi_healthy_min for '" + genus + "' outside [-1,1]");
  if (!std::isfinite(rule.ctd_healthy_min)) throw ConfigError("ctd_healthy_min for '" + genus + "' not finite");
  rules_[genus] = rule;
}

GenusThresholds GenusThresholds::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("thresholds: ") + e.what());
  }
  if (!j.is_object() || !j.contains("default")) throw ConfigError("thresholds table needs a \"default\" entry");
  GenusThresholds t;
  t.rules_.clear();
  try {
    for (auto it = j.begin(); it != j.end(); ++it) t.set(it.key(), parse_rule(it.value(), it.key()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("thresholds: ") + e.what());
  }
  return t;
}

GenusThresholds GenusThresholds::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open thresholds file " + path.string());
  return from_json(std::string(std::istreambuf_iterator<char>(in), {}));
}

const GenusRule& GenusThresholds::rule_for(const std::string& genus) const {
  auto it = rules_.find(genus);
  return it != rules_.end() ? it->second : rules_.at("default");
}

const char* to_string(HealthClass c) {
  switch (c) {
    case HealthClass::healthy: return "healthy";
    case HealthClass::stressed: return "stressed";
    case HealthClass::unknown: return "unknown";
  }
  return "?";
}

const char* to_string(Provenance p) { return p == Provenance::measured ? "measured" : "generated"; }

std::optional<int> otsu_threshold(const std::vector<double>& histogram) {
  const int bins = static_cast<int>(histogram.size());
  double total = 0.0, weighted = 0.0;
  int occupied = 0;
  for (int i = 0; i < bins; ++i) {
    total += histogram[i];
    weighted += i * histogram[i];
    occupied += histogram[i] > 0.0;
  }
  if (occupied < 2) return std::nullopt;

  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_t = 0;
  for (int t = 0; t < bins - 1; ++t) {
    w0 += histogram[t];
    sum0 += t * histogram[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (weighted - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) best = between, best_t = t;
  }
  return best_t;
}

CanopyMask segment_canopy(const RgbImage& rgb) {
  require_shape(rgb.r, rgb.g, "segment_canopy");
  require_shape(rgb.r, rgb.b, "segment_canopy");
  check_unit(rgb.r, "red");
  check_unit(rgb.g, "green");
  check_unit(rgb.b, "blue");

  CanopyMask mask{rgb.width(), rgb.height(), std::vector<std::uint8_t>(rgb.r.size(), 0)};
  if (rgb.r.size() == 0) return mask;

  std::vector<double> exg(rgb.r.size());
  for (std::size_t i = 0; i < exg.size(); ++i) exg[i] = 2.0 * rgb.g.values[i] - rgb.r.values[i] - rgb.b.values[i];
  const auto [lo_it, hi_it] = std::minmax_element(exg.begin(), exg.end());
  const double lo = *lo_it, range = *hi_it - lo;
  if (!(range > 0.0)) return mask;

  std::vector<int> bin(exg.size());
  std::vector<double> hist(kBins, 0.0);
  for (std::size_t i = 0; i < exg.size(); ++i) {
    bin[i] = std::min(kBins - 1, static_cast<int>((exg[i] - lo) / range * kBins));
    hist[bin[i]] += 1.0;
  }
  const auto t = otsu_threshold(hist);
  if (!t) return mask;
  for (std::size_t i = 0; i < exg.size(); ++i) mask.bits[i] = bin[i] > *t;
  return mask;
}

Raster ndvi_map(const Raster& nir, const Raster& red) {
  require_shape(nir, red, "ndvi_map");
  check_unit(nir, "nir");
  check_unit(red, "red");
  Raster out(nir.width, nir.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = nir.values[i] + red.values[i];
    out.values[i] = s == 0.0 ? 0.0 : (nir.values[i] - red.values[i]) / s;
  }
  return out;
}

double ctd(const Raster& thermal, const CanopyMask& mask, double t_air) {
  require_mask(thermal, mask);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < thermal.size(); ++i) {
    if (!mask.bits[i]) continue;
    sum += thermal.values[i];
    ++n;
  }
  if (n == 0) throw EmptyCanopyError("canopy mask is empty");
  return t_air - sum / static_cast<double>(n);
}

HealthClass classify(double ndvi_mean, double ctd_value, std::size_t pixels, const GenusRule& rule,
                     std::size_t min_pixels) {
  if (pixels == 0 || pixels < min_pixels) return HealthClass::unknown;
  return ndvi_mean >= rule.ndvi_healthy_min && ctd_value >= rule.ctd_healthy_min ? HealthClass::healthy
                                                                                  : HealthClass::stressed;
}

HealthIndexResult tree_health(const std::string& tree_id, const TreeRasters& rasters, const CanopyMask& mask,
                              double t_air, const std::string& genus, const GenusThresholds& thresholds,
                              std::size_t min_pixels, Provenance provenance) {
  require_mask(rasters.nir, mask);
  require_shape(rasters.nir, rasters.red, "tree_health");
  require_shape(rasters.nir, rasters.thermal, "tree_health");

  HealthIndexResult res;
  res.tree_id = tree_id;
  res.provenance = provenance;
  res.ndvi_pixel_count = mask.count();
  if (res.ndvi_pixel_count == 0) return res;

  const Raster ndvi = ndvi_map(rasters.nir, rasters.red);
  double sum = 0.0;
  for (std::size_t i = 0; i < ndvi.size(); ++i)
    if (mask.bits[i]) sum += ndvi.values[i];
  res.ndvi_mean = sum / static_cast<double>(res.ndvi_pixel_count);
  res.ctd = ctd(rasters.thermal, mask, t_air);
  res.health_class =
      classify(res.ndvi_mean, *res.ctd, res.ndvi_pixel_count, thresholds.rule_for(genus), min_pixels);
  return res;
}

}  // namespace canopyscan::health
