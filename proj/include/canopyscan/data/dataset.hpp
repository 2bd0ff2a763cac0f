#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "canopyscan/common/raster.hpp"
#include "canopyscan/common/time.hpp"
#include "canopyscan/data/image_io.hpp"
#include "canopyscan/solar/solar.hpp"

namespace canopyscan::data {

enum class Channel { nir, thermal };
const char* to_string(Channel c);
/// "nir" / "thermal"; anything else is a ConfigError.
Channel channel_from_string(const std::string& s);

struct PhysicalRanges {
  double thermal_min_c = -20.0;
  double thermal_max_c = 60.0;
  void validate() const;
  bool operator==(const PhysicalRanges&) const = default;
};

struct SampleMeta {
  double latitude = 0.0;
  double longitude = 0.0;
  UtcTime captured_at{};
  std::string source_id;
};

struct MultiSpectralSample {
  std::string id;
  RgbImage rgb;   // reflectance [0,1]
  Raster nir;     // reflectance [0,1]
  Raster thermal; // deg C
  solar::ConditioningVector cond;
  SampleMeta meta;

  int width() const { return rgb.width(); }
  int height() const { return rgb.height(); }
  /// Shapes agree, reflectances in [0,1], thermal inside `ranges`; RangeError /
  /// DimensionError otherwise.
  void validate(const PhysicalRanges& ranges) const;
};

// File codecs. RGB: 8-bit, value/255. NIR: 16-bit, raw/65535. Thermal: 16-bit,
// raw*0.01 - 100 deg C. Encoding rounds to the nearest code and clamps.
Image8 encode_rgb(const RgbImage& rgb);
RgbImage decode_rgb(const Image8& img);
Image16 encode_reflectance16(const Raster& r);
Raster decode_reflectance16(const Image16& img);
Image16 encode_thermal16(const Raster& t);
Raster decode_thermal16(const Image16& img);

/// Snap a physical value onto the file grid, so decode(encode(x)) == x.
double quantize_rgb(double v);
double quantize_reflectance16(double v);
double quantize_thermal(double t);
double thermal_from_raw(std::uint16_t raw);

// Network space: reflectance x -> 2x - 1; thermal over [min, max] -> [-1, 1].
double reflectance_to_network(double x);
double network_to_reflectance(double v);
double thermal_to_network(double t, const PhysicalRanges& ranges);
double network_to_thermal(double v, const PhysicalRanges& ranges);

Raster to_network(const Raster& physical, Channel channel, const PhysicalRanges& ranges);
Raster from_network(const Raster& network, Channel channel, const PhysicalRanges& ranges);
RgbImage rgb_to_network(const RgbImage& rgb);
RgbImage rgb_from_network(const RgbImage& net);

struct ManifestEntry {
  std::string id;
  std::string rgb;      // paths relative to the manifest
  std::string nir;
  std::string thermal;
  std::string ground_truth;  // optional sidecar
  solar::ConditioningVector cond;
  SampleMeta meta;
};

struct Splits {
  std::vector<std::string> train, val, test;
  bool empty() const { return train.empty() && val.empty() && test.empty(); }
};

struct DatasetManifest {
  int version = 1;
  PhysicalRanges normalization;
  std::vector<ManifestEntry> samples;
  Splits splits;

  static DatasetManifest from_json(const std::string& text);
  std::string to_json() const;
  /// Schema checks that don't touch the filesystem: unique ids, ranges, and
  /// disjoint splits referencing known ids. ManifestError otherwise.
  void validate() const;
  const ManifestEntry& entry(const std::string& id) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Read-only view over a manifest; samples decode lazily in manifest order.
class Dataset {
 public:
  /// Validates the manifest and that every referenced file exists.
  static Dataset open(const std::filesystem::path& manifest_path);
  Dataset(DatasetManifest manifest, std::filesystem::path base_dir);

  std::size_t size() const { return manifest_.samples.size(); }
  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& base_dir() const { return base_; }

  MultiSpectralSample load(std::size_t index) const;
  MultiSpectralSample load(const std::string& id) const;
  /// Indices of the samples listed in a split, in split order.
  std::vector<std::size_t> indices(const std::vector<std::string>& ids) const;

 private:
  DatasetManifest manifest_;
  std::filesystem::path base_;
};

/// Writes <dir>/<id>_{rgb,nir,thermal}.png and returns the manifest entry
/// with paths relative to `dir`.
ManifestEntry write_sample(const std::filesystem::path& dir, const MultiSpectralSample& sample,
                           const PhysicalRanges& ranges);

/// Deterministic shuffle by seed, then consecutive blocks of floor(f_i * n)
/// ids for train / val / test (1 to 3 fractions).
DatasetManifest split_dataset(DatasetManifest manifest, const std::vector<double>& fractions, std::uint64_t seed);

struct Patch {
  int x = 0;  // window origin in the source sample
  int y = 0;
  MultiSpectralSample sample;
};

/// Row-major windows; every channel cropped with the same window.
std::vector<Patch> patchify(const MultiSpectralSample& sample, int patch_size, int stride);

/// Centre crop to a square, then bilinear resample to size x size.
Raster center_crop_resize(const Raster& r, int size);
RgbImage center_crop_resize(const RgbImage& rgb, int size);

}  // namespace canopyscan::data
