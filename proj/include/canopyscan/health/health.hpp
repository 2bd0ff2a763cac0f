#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "canopyscan/common/raster.hpp"

namespace canopyscan::health {

struct CanopyMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 1 = canopy

  std::size_t count() const;
  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  bool operator==(const CanopyMask&) const = default;
};

struct GenusRule {
  double ndvi_healthy_min = 0.4;
  double ctd_healthy_min = 0.0;  // deg C; below this the canopy counts as heat-stressed
};

class GenusThresholds {
 public:
  /// Single "default" entry with the stock rule.
  GenusThresholds();

  /// {"default": {"ndvi_healthy_min": .., "ctd_healthy_min": ..}, "<Genus>": {..}}.
  /// Missing fields inherit from the stock rule. Throws ConfigError.
  static GenusThresholds from_json(const std::string& text);
  static GenusThresholds load(const std::filesystem::path& path);

  void set(const std::string& genus, const GenusRule& rule);
  /// Falls back to "default" for unknown genera.
  const GenusRule& rule_for(const std::string& genus) const;
  const std::map<std::string, GenusRule>& rules() const { return rules_; }

 private:
  std::map<std::string, GenusRule> rules_;
};

enum class HealthClass { healthy, stressed, unknown };
enum class Provenance { measured, generated };

const char* to_string(HealthClass c);
const char* to_string(Provenance p);

struct HealthIndexResult {
  std::string tree_id;
  double ndvi_mean = 0.0;
  std::size_t ndvi_pixel_count = 0;
  std::optional<double> ctd;  // empty when the mask is empty
  HealthClass health_class = HealthClass::unknown;
  Provenance provenance = Provenance::measured;
};

/// Excess-green (2G - R - B) with an Otsu threshold over a 256-bin histogram
/// spanning the observed ExG range. A flat image or a histogram with a single
/// occupied bin gives an empty mask.
CanopyMask segment_canopy(const RgbImage& rgb);

/// Otsu threshold bin (pixels in bins above it are foreground), or nullopt for
/// a degenerate histogram.
std::optional<int> otsu_threshold(const std::vector<double>& histogram);

/// Per-pixel (NIR - R) / (NIR + R); 0 where NIR + R == 0.
Raster ndvi_map(const Raster& nir, const Raster& red);

/// t_air minus the mean thermal value over the mask.
double ctd(const Raster& thermal, const CanopyMask& mask, double t_air);

struct TreeRasters {
  const Raster& nir;
  const Raster& red;
  const Raster& thermal;
};

HealthIndexResult tree_health(const std::string& tree_id, const TreeRasters& rasters, const CanopyMask& mask,
                              double t_air, const std::string& genus, const GenusThresholds& thresholds,
                              std::size_t min_pixels = 50, Provenance provenance = Provenance::measured);

/// Pure classification rule, shared with test oracles.
HealthClass classify(double ndvi_mean, double ctd_value, std::size_t pixels, const GenusRule& rule,
                     std::size_t min_pixels);

}  // namespace canopyscan::health
