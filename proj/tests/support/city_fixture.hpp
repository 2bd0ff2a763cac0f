#pragma once

// A small synthetic city: inventory trees, one street-level frame per tree,
// a weather station at each frame, and the generator's ground truth for all
// of it. Served through two mock HTTP servers.

#include <chrono>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "canopyscan/data/image_io.hpp"
#include "canopyscan/data/synth.hpp"
#include "canopyscan/health/health.hpp"
#include "canopyscan/ingest/ingest.hpp"
#include "canopyscan/survey/survey.hpp"
#include "json.hpp"
#include "support/mock_server.hpp"

namespace canopyscan::testing {

struct CityFrame {
  std::string image_id;
  double latitude = 0.0, longitude = 0.0;
  UtcTime captured_at{};
  data::SynthScene scene;
  data::Bytes png;
};

struct SyntheticCity {
  std::vector<ingest::TreeRecord> trees;
  std::vector<CityFrame> frames;  // frames[i] shows trees[i]
  ingest::BBox bbox;
  data::SpeciesPalette palette;
};

inline constexpr double kMetresPerDegLat = 6371008.8 * 3.14159265358979323846 / 180.0;

/// `n` trees on a ~110 m grid, each photographed from 5 m north. Species
/// cycle through the palette; conditioning is drawn like synth_dataset's.
inline SyntheticCity make_city(const data::SpeciesPalette& palette, int n = 20, std::uint64_t seed = 2024) {
  SyntheticCity city;
  city.palette = palette;
  data::SynthDatasetConfig cfg;
  cfg.palette = palette;
  cfg.seed = seed;
  const double lat0 = 47.3700, lon0 = 8.5400, step = 0.001;
  const int cols = 5;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "tree-%02d", i + 1);
    const double lat = lat0 + step * (i / cols), lon = lon0 + step * 1.5 * (i % cols);
    const int species = i % static_cast<int>(palette.species.size());
    city.trees.push_back({id, lat, lon, palette.species[species].name, std::nullopt});

    CityFrame f;
    std::snprintf(id, sizeof id, "img-%02d", i + 1);
    f.image_id = id;
    f.latitude = lat + 5.0 / kMetresPerDegLat;
    f.longitude = lon;
    // mid-June mornings to afternoons: sun elevation stays inside the training range
    f.captured_at = parse_rfc3339("2024-06-10T07:00:00Z") + std::chrono::days(i % 10) + std::chrono::minutes(53 * i % 480);

    auto p = data::synth_dataset_params(cfg, i);
    p.species_id = species;
    p.sun = solar::solar_position(f.latitude, f.longitude, f.captured_at);
    p.id = f.image_id;
    p.meta.latitude = f.latitude;
    p.meta.longitude = f.longitude;
    p.meta.captured_at = f.captured_at;
    f.scene = data::synth_scene(p);
    f.png = data::encode_png(data::encode_rgb(f.scene.sample.rgb));
    city.frames.push_back(std::move(f));
  }
  city.bbox = {lon0 - 0.01, lat0 - 0.01, lon0 + 0.02, lat0 + 0.02};
  return city;
}

/// Class the survey should report for tree i, from the generator's truth.
inline health::HealthClass oracle_class(const SyntheticCity& city, std::size_t i,
                                        const health::GenusThresholds& thresholds, std::size_t min_pixels = 50) {
  const auto& t = city.frames[i].scene.trees.at(0);
  return health::classify(t.ndvi, t.ctd, t.pixels, thresholds.rule_for(city.trees[i].genus), min_pixels);
}

/// Image API and weather API for the city. The weather service reports every
/// station on each request and leaves the selection to the client.
inline void serve_city(MockServer& images, MockServer& weather, const SyntheticCity& city) {
  using nlohmann::json;
  images.server().Get("/images", [&city, &images](const httplib::Request& req, httplib::Response& res) {
    double b[4];
    std::sscanf(req.get_param_value("bbox").c_str(), "%lf,%lf,%lf,%lf", &b[0], &b[1], &b[2], &b[3]);
    json list = json::array();
    for (const auto& f : city.frames)
      if (f.longitude >= b[0] && f.latitude >= b[1] && f.longitude <= b[2] && f.latitude <= b[3])
        list.push_back({{"id", f.image_id},
                        {"geometry", {{"type", "Point"}, {"coordinates", {f.longitude, f.latitude}}}},
                        {"captured_at", format_rfc3339(f.captured_at)},
                        {"image_url", images.url() + "/blob/" + f.image_id}});
    res.set_content(json{{"images", list}}.dump(), "application/json");
  });
  images.server().Get(R"(/blob/(.+))", [&city](const httplib::Request& req, httplib::Response& res) {
    for (const auto& f : city.frames)
      if (f.image_id == req.matches[1].str()) {
        res.set_content(std::string(f.png.begin(), f.png.end()), "image/png");
        return;
      }
    res.status = 404;
  });
  weather.server().Get("/observations", [&city](const httplib::Request&, httplib::Response& res) {
    json obs = json::array();
    for (const auto& f : city.frames) {
      const auto& c = f.scene.sample.cond;
      obs.push_back({{"station_id", "st-" + f.image_id},
                     {"latitude", f.latitude},
                     {"longitude", f.longitude},
                     {"time", format_rfc3339(f.captured_at)},
                     {"i_radiation", c.i_radiation},
                     {"t_air", c.t_air}});
    }
    res.set_content(json{{"observations", obs}}.dump(), "application/json");
  });
}

/// Returns the ground-truth channels of the frame it is asked about.
class PerfectTranslator : public survey::Translator {
 public:
  explicit PerfectTranslator(const SyntheticCity& city) {
    for (const auto& f : city.frames) samples_[f.image_id] = &f.scene.sample;
    for (const auto& s : city.palette.species) vocab_.push_back(s.name);
  }
  explicit PerfectTranslator(std::map<std::string, const data::MultiSpectralSample*> samples,
                             std::vector<std::string> vocab)
      : samples_(std::move(samples)), vocab_(std::move(vocab)) {}

  int image_size() const override { return 64; }
  std::optional<int> species_id(const std::string& genus) const override {
    for (std::size_t i = 0; i < vocab_.size(); ++i)
      if (vocab_[i] == genus) return static_cast<int>(i);
    return std::nullopt;
  }
  Raster translate(data::Channel channel, const RgbImage&, const solar::ConditioningVector&,
                   const std::string& image_id) const override {
    const auto* s = samples_.at(image_id);
    return channel == data::Channel::nir ? s->nir : s->thermal;
  }
  std::string model_id(data::Channel) const override { return "ground-truth"; }

 private:
  std::map<std::string, const data::MultiSpectralSample*> samples_;
  std::vector<std::string> vocab_;
};

}  // namespace canopyscan::testing
