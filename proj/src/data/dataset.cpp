#include "canopyscan/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "canopyscan/common/errors.hpp"
#include "json.hpp"

namespace canopyscan::data {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Channel c) { return c == Channel::nir ? "nir" : "thermal"; }

Channel channel_from_string(const std::string& s) {
  if (s == "nir") return Channel::nir;
  if (s == "thermal") return Channel::thermal;
  throw ConfigError("unknown channel '" + s + "' (expected nir or thermal)");
}

void PhysicalRanges::validate() const {
  if (!(thermal_min_c < thermal_max_c)) throw ManifestError("thermal_min_c must be below thermal_max_c");
}

namespace {

void check_reflectance(const Raster& r, const std::string& what) {
  for (double v : r.values)
    if (!(v >= 0.0 && v <= 1.0)) throw RangeError(what + " reflectance outside [0,1]: " + std::to_string(v));
}

std::uint16_t to_u16(double v) { return static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 65535L)); }

}  // namespace

void MultiSpectralSample::validate(const PhysicalRanges& ranges) const {
  const Raster& ref = rgb.r;
  for (const Raster* r : {&rgb.g, &rgb.b, &nir, &thermal})
    if (!r->same_shape(ref)) throw DimensionError("sample " + id + ": channel dimensions differ");
  check_reflectance(rgb.r, id + " red");
  check_reflectance(rgb.g, id + " green");
  check_reflectance(rgb.b, id + " blue");
  check_reflectance(nir, id + " nir");
  for (double t : thermal.values)
    if (!(t >= ranges.thermal_min_c && t <= ranges.thermal_max_c))
      throw RangeError("sample " + id + ": thermal " + std::to_string(t) + " C outside configured range");
}

Image8 encode_rgb(const RgbImage& rgb) {
  Image8 img{rgb.width(), rgb.height(), 3, {}};
  img.pixels.resize(rgb.r.size() * 3);
  for (std::size_t i = 0; i < rgb.r.size(); ++i) {
    img.pixels[3 * i + 0] = static_cast<std::uint8_t>(std::clamp(std::lround(rgb.r.values[i] * 255.0), 0L, 255L));
    img.pixels[3 * i + 1] = static_cast<std::uint8_t>(std::clamp(std::lround(rgb.g.values[i] * 255.0), 0L, 255L));
    img.pixels[3 * i + 2] = static_cast<std::uint8_t>(std::clamp(std::lround(rgb.b.values[i] * 255.0), 0L, 255L));
  }
  return img;
}

RgbImage decode_rgb(const Image8& img) {
  if (img.channels != 3) throw FormatError("RGB decode expects 3 channels");
  RgbImage out{Raster(img.width, img.height), Raster(img.width, img.height), Raster(img.width, img.height)};
  for (std::size_t i = 0; i < out.r.size(); ++i) {
    out.r.values[i] = img.pixels[3 * i + 0] / 255.0;
    out.g.values[i] = img.pixels[3 * i + 1] / 255.0;
    out.b.values[i] = img.pixels[3 * i + 2] / 255.0;
  }
  return out;
}

Image16 encode_reflectance16(const Raster& r) {
  Image16 img{r.width, r.height, std::vector<std::uint16_t>(r.size())};
  for (std::size_t i = 0; i < r.size(); ++i) img.pixels[i] = to_u16(r.values[i] * 65535.0);
  return img;
}

Raster decode_reflectance16(const Image16& img) {
  Raster out(img.width, img.height);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = img.pixels[i] / 65535.0;
  return out;
}

double thermal_from_raw(std::uint16_t raw) { return raw * 0.01 - 100.0; }

Image16 encode_thermal16(const Raster& t) {
  Image16 img{t.width, t.height, std::vector<std::uint16_t>(t.size())};
  for (std::size_t i = 0; i < t.size(); ++i) img.pixels[i] = to_u16((t.values[i] + 100.0) * 100.0);
  return img;
}

Raster decode_thermal16(const Image16& img) {
  Raster out(img.width, img.height);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = thermal_from_raw(img.pixels[i]);
  return out;
}

double quantize_rgb(double v) { return static_cast<double>(std::clamp(std::lround(v * 255.0), 0L, 255L)) / 255.0; }
double quantize_reflectance16(double v) { return to_u16(v * 65535.0) / 65535.0; }
double quantize_thermal(double t) { return thermal_from_raw(to_u16((t + 100.0) * 100.0)); }

double reflectance_to_network(double x) { return 2.0 * x - 1.0; }
double network_to_reflectance(double v) { return (v + 1.0) / 2.0; }

double thermal_to_network(double t, const PhysicalRanges& r) {
  return 2.0 * (t - r.thermal_min_c) / (r.thermal_max_c - r.thermal_min_c) - 1.0;
}

double network_to_thermal(double v, const PhysicalRanges& r) {
  return (v + 1.0) / 2.0 * (r.thermal_max_c - r.thermal_min_c) + r.thermal_min_c;
}

Raster to_network(const Raster& physical, Channel channel, const PhysicalRanges& ranges) {
  Raster out = physical;
  for (double& v : out.values)
    v = channel == Channel::nir ? reflectance_to_network(v) : thermal_to_network(v, ranges);
  return out;
}

Raster from_network(const Raster& network, Channel channel, const PhysicalRanges& ranges) {
  Raster out = network;
  for (double& v : out.values)
    v = channel == Channel::nir ? network_to_reflectance(v) : network_to_thermal(v, ranges);
  return out;
}

RgbImage rgb_to_network(const RgbImage& rgb) {
  RgbImage out = rgb;
  for (auto* ch : {&out.r, &out.g, &out.b})
    for (double& v : ch->values) v = reflectance_to_network(v);
  return out;
}

RgbImage rgb_from_network(const RgbImage& net) {
  RgbImage out = net;
  for (auto* ch : {&out.r, &out.g, &out.b})
    for (double& v : ch->values) v = network_to_reflectance(v);
  return out;
}

// ---- manifest ----

namespace {

json cond_to_json(const solar::ConditioningVector& c) {
  return {{"i_radiation", c.i_radiation},
          {"azimuth", c.s_angle.azimuth},
          {"elevation", c.s_angle.elevation},
          {"t_air", c.t_air},
          {"species_id", c.species_id}};
}

solar::ConditioningVector cond_from_json(const json& j) {
  solar::ConditioningVector c;
  c.i_radiation = j.at("i_radiation").get<double>();
  c.s_angle.azimuth = j.at("azimuth").get<double>();
  c.s_angle.elevation = j.at("elevation").get<double>();
  c.t_air = j.at("t_air").get<double>();
  c.species_id = j.at("species_id").get<int>();
  return c;
}

json meta_to_json(const SampleMeta& m) {
  return {{"latitude", m.latitude},
          {"longitude", m.longitude},
          {"captured_at", format_rfc3339(m.captured_at)},
          {"source_id", m.source_id}};
}

SampleMeta meta_from_json(const json& j) {
  SampleMeta m;
  m.latitude = j.value("latitude", 0.0);
  m.longitude = j.value("longitude", 0.0);
  if (j.contains("captured_at")) m.captured_at = parse_rfc3339(j.at("captured_at").get<std::string>());
  m.source_id = j.value("source_id", std::string{});
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ManifestError("cannot open manifest " + p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Raster crop(const Raster& r, int x0, int y0, int w, int h) {
  Raster out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = r.at(x0 + x, y0 + y);
  return out;
}

}  // namespace

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw ManifestError("unsupported manifest version " + std::to_string(m.version));
    if (j.contains("normalization")) {
      m.normalization.thermal_min_c = j["normalization"].at("thermal_min_c").get<double>();
      m.normalization.thermal_max_c = j["normalization"].at("thermal_max_c").get<double>();
    }
    for (const auto& s : j.at("samples")) {
      ManifestEntry e;
      e.id = s.at("id").get<std::string>();
      e.rgb = s.at("rgb").get<std::string>();
      e.nir = s.value("nir", std::string{});
      e.thermal = s.value("thermal", std::string{});
      e.ground_truth = s.value("ground_truth", std::string{});
      e.cond = cond_from_json(s.at("conditioning"));
      if (s.contains("meta")) e.meta = meta_from_json(s["meta"]);
      m.samples.push_back(std::move(e));
    }
    if (j.contains("splits")) {
      const auto& sp = j["splits"];
      m.splits.train = sp.value("train", std::vector<std::string>{});
      m.splits.val = sp.value("val", std::vector<std::string>{});
      m.splits.test = sp.value("test", std::vector<std::string>{});
    }
  } catch (const json::exception& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  } catch (const ValidationError& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

std::string DatasetManifest::to_json() const {
  json j;
  j["version"] = version;
  j["normalization"] = {{"thermal_min_c", normalization.thermal_min_c},
                        {"thermal_max_c", normalization.thermal_max_c}};
  json samples_j = json::array();
  for (const auto& e : samples) {
    json s = {{"id", e.id}, {"rgb", e.rgb}, {"nir", e.nir}, {"thermal", e.thermal}};
    if (!e.ground_truth.empty()) s["ground_truth"] = e.ground_truth;
    s["conditioning"] = cond_to_json(e.cond);
    s["meta"] = meta_to_json(e.meta);
    samples_j.push_back(std::move(s));
  }
  j["samples"] = std::move(samples_j);
  j["splits"] = {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}};
  return j.dump(2) + "\n";
}

void DatasetManifest::validate() const {
  normalization.validate();
  std::set<std::string> ids;
  for (const auto& e : samples) {
    if (e.id.empty()) throw ManifestError("sample with empty id");
    if (!ids.insert(e.id).second) throw ManifestError("duplicate sample id " + e.id);
    if (e.rgb.empty()) throw ManifestError("sample " + e.id + " has no rgb file");
  }
  std::set<std::string> seen;
  for (const auto* list : {&splits.train, &splits.val, &splits.test})
    for (const auto& id : *list) {
      if (!ids.count(id)) throw ManifestError("split references unknown sample " + id);
      if (!seen.insert(id).second) throw ManifestError("sample " + id + " appears in more than one split");
    }
}

const ManifestEntry& DatasetManifest::entry(const std::string& id) const {
  for (const auto& e : samples)
    if (e.id == id) return e;
  throw ManifestError("unknown sample id " + id);
}

DatasetManifest load_manifest(const fs::path& path) { return DatasetManifest::from_json(slurp(path)); }

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  manifest.validate();
  const std::string text = manifest.to_json();
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Dataset::Dataset(DatasetManifest manifest, fs::path base_dir) : manifest_(std::move(manifest)), base_(std::move(base_dir)) {
  manifest_.validate();
  for (const auto& e : manifest_.samples)
    for (const auto& [what, rel] : {std::pair{"rgb", &e.rgb}, {"nir", &e.nir}, {"thermal", &e.thermal}}) {
      if (rel->empty()) throw ManifestError("sample " + e.id + ": no " + what + " file");
      if (!fs::exists(base_ / *rel)) throw ManifestError("sample " + e.id + ": missing " + what + " file " + *rel);
    }
}

Dataset Dataset::open(const fs::path& manifest_path) {
  return Dataset(load_manifest(manifest_path), manifest_path.parent_path());
}

MultiSpectralSample Dataset::load(std::size_t index) const {
  const ManifestEntry& e = manifest_.samples.at(index);
  MultiSpectralSample s;
  s.id = e.id;
  s.cond = e.cond;
  s.meta = e.meta;
  try {
    s.rgb = decode_rgb(decode_png_rgb8(read_file(base_ / e.rgb)));
    s.nir = decode_reflectance16(decode_png_gray16(read_file(base_ / e.nir)));
    s.thermal = decode_thermal16(decode_png_gray16(read_file(base_ / e.thermal)));
  } catch (const FormatError& err) {
    throw ManifestError("sample " + e.id + ": " + err.what());
  }
  s.validate(manifest_.normalization);
  return s;
}

MultiSpectralSample Dataset::load(const std::string& id) const {
  for (std::size_t i = 0; i < manifest_.samples.size(); ++i)
    if (manifest_.samples[i].id == id) return load(i);
  throw ManifestError("unknown sample id " + id);
}

std::vector<std::size_t> Dataset::indices(const std::vector<std::string>& ids) const {
  std::vector<std::size_t> out;
  for (const auto& id : ids) {
    auto it = std::find_if(manifest_.samples.begin(), manifest_.samples.end(),
                           [&](const ManifestEntry& e) { return e.id == id; });
    if (it == manifest_.samples.end()) throw ManifestError("unknown sample id " + id);
    out.push_back(static_cast<std::size_t>(it - manifest_.samples.begin()));
  }
  return out;
}

ManifestEntry write_sample(const fs::path& dir, const MultiSpectralSample& sample, const PhysicalRanges& ranges) {
  sample.validate(ranges);
  ManifestEntry e;
  e.id = sample.id;
  e.rgb = sample.id + "_rgb.png";
  e.nir = sample.id + "_nir.png";
  e.thermal = sample.id + "_thermal.png";
  e.cond = sample.cond;
  e.meta = sample.meta;
  write_file(dir / e.rgb, encode_png(encode_rgb(sample.rgb)));
  write_file(dir / e.nir, encode_png(encode_reflectance16(sample.nir)));
  write_file(dir / e.thermal, encode_png(encode_thermal16(sample.thermal)));
  return e;
}

DatasetManifest split_dataset(DatasetManifest manifest, const std::vector<double>& fractions, std::uint64_t seed) {
  if (fractions.empty() || fractions.size() > 3) throw SplitError("between one and three split fractions required");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw SplitError("split fractions must be positive");
    total += f;
  }
  if (total > 1.0 + 1e-12) throw SplitError("split fractions sum above 1");
  const std::size_t n = manifest.samples.size();
  if (n < fractions.size())
    throw SplitError("dataset of " + std::to_string(n) + " samples cannot fill " + std::to_string(fractions.size()) +
                     " splits");

  std::vector<std::string> ids;
  for (const auto& e : manifest.samples) ids.push_back(e.id);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  std::vector<std::string>* lists[3] = {&manifest.splits.train, &manifest.splits.val, &manifest.splits.test};
  manifest.splits = {};
  std::size_t pos = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    // tiny epsilon so e.g. 0.1 * 10 isn't floored to 0 by representation error
    const auto count = static_cast<std::size_t>(std::floor(fractions[k] * static_cast<double>(n) + 1e-9));
    lists[k]->assign(ids.begin() + static_cast<std::ptrdiff_t>(pos), ids.begin() + static_cast<std::ptrdiff_t>(pos + count));
    pos += count;
  }
  manifest.validate();
  return manifest;
}

std::vector<Patch> patchify(const MultiSpectralSample& sample, int patch_size, int stride) {
  if (patch_size <= 0 || stride <= 0) throw SizeError("patch size and stride must be positive");
  if (patch_size > sample.width() || patch_size > sample.height())
    throw SizeError("patch " + std::to_string(patch_size) + " larger than image " + std::to_string(sample.width()) +
                    "x" + std::to_string(sample.height()));
  std::vector<Patch> out;
  for (int y = 0; y + patch_size <= sample.height(); y += stride)
    for (int x = 0; x + patch_size <= sample.width(); x += stride) {
      Patch p;
      p.x = x;
      p.y = y;
      p.sample.id = sample.id + "_p" + std::to_string(out.size());
      p.sample.cond = sample.cond;
      p.sample.meta = sample.meta;
      p.sample.rgb = {crop(sample.rgb.r, x, y, patch_size, patch_size), crop(sample.rgb.g, x, y, patch_size, patch_size),
                      crop(sample.rgb.b, x, y, patch_size, patch_size)};
      p.sample.nir = crop(sample.nir, x, y, patch_size, patch_size);
      p.sample.thermal = crop(sample.thermal, x, y, patch_size, patch_size);
      out.push_back(std::move(p));
    }
  return out;
}

Raster center_crop_resize(const Raster& r, int size) {
  if (size <= 0 || r.width <= 0 || r.height <= 0) throw SizeError("resize needs positive sizes");
  const int side = std::min(r.width, r.height);
  const int x0 = (r.width - side) / 2, y0 = (r.height - side) / 2;
  const double scale = static_cast<double>(side) / size;
  Raster out(size, size);
  for (int y = 0; y < size; ++y) {
    const double sy = std::clamp((y + 0.5) * scale - 0.5, 0.0, side - 1.0);
    const int y1 = static_cast<int>(sy);
    const int y2 = std::min(y1 + 1, side - 1);
    const double fy = sy - y1;
    for (int x = 0; x < size; ++x) {
      const double sx = std::clamp((x + 0.5) * scale - 0.5, 0.0, side - 1.0);
      const int x1 = static_cast<int>(sx);
      const int x2 = std::min(x1 + 1, side - 1);
      const double fx = sx - x1;
      const double top = r.at(x0 + x1, y0 + y1) * (1 - fx) + r.at(x0 + x2, y0 + y1) * fx;
      const double bot = r.at(x0 + x1, y0 + y2) * (1 - fx) + r.at(x0 + x2, y0 + y2) * fx;
      out.at(x, y) = top * (1 - fy) + bot * fy;
    }
  }
  return out;
}

RgbImage center_crop_resize(const RgbImage& rgb, int size) {
  return {center_crop_resize(rgb.r, size), center_crop_resize(rgb.g, size), center_crop_resize(rgb.b, size)};
}

}  // namespace canopyscan::data
