#include "canopyscan/survey/survey.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <thread>

#include "canopyscan/data/image_io.hpp"
#include "json.hpp"

namespace canopyscan::survey {

using nlohmann::json;

std::string fnv1a_hex(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Raster run_model(const cgan::CganModel& model, data::Channel channel, const RgbImage& rgb,
                 const solar::ConditioningVector& cond) {
  const int s = model.config.generator.image_size;
  if (rgb.width() != s || rgb.height() != s)
    throw DimensionError("model expects " + std::to_string(s) + "x" + std::to_string(s) + " frames, got " +
                         std::to_string(rgb.width()) + "x" + std::to_string(rgb.height()));
  const RgbImage net = data::rgb_to_network(rgb);
  tensor::Tensor x({1, 3, s, s});
  const std::size_t plane = static_cast<std::size_t>(s) * s;
  std::copy(net.r.values.begin(), net.r.values.end(), x.data.begin());
  std::copy(net.g.values.begin(), net.g.values.end(), x.data.begin() + plane);
  std::copy(net.b.values.begin(), net.b.values.end(), x.data.begin() + 2 * plane);
  const tensor::Tensor y = cgan::generate(model, channel, x, std::span(&cond, 1));
  Raster out(s, s);
  std::copy(y.data.begin(), y.data.end(), out.values.begin());
  return cgan::target_from_network(out, model.config, cond.t_air);
}

namespace {

std::optional<int> vocab_index(const std::vector<std::string>& vocab, const std::string& genus) {
  const auto it = std::find(vocab.begin(), vocab.end(), genus);
  if (it == vocab.end()) return std::nullopt;
  return static_cast<int>(it - vocab.begin());
}

std::string file_id(const std::filesystem::path& p) { return fnv1a_hex(data::read_file(p)); }

}  // namespace

// ---- translators ----

CheckpointTranslator::CheckpointTranslator(const std::filesystem::path& nir_checkpoint,
                                           const std::filesystem::path& thermal_checkpoint)
    : nir_(cgan::load_checkpoint(nir_checkpoint)),
      thermal_(cgan::load_checkpoint(thermal_checkpoint)),
      nir_id_(file_id(nir_checkpoint)),
      thermal_id_(file_id(thermal_checkpoint)) {
  if (nir_.config.target != data::Channel::nir)
    throw ChannelMismatchError(nir_checkpoint.string() + " is a " + data::to_string(nir_.config.target) +
                               " checkpoint, expected nir");
  if (thermal_.config.target != data::Channel::thermal)
    throw ChannelMismatchError(thermal_checkpoint.string() + " is a " + data::to_string(thermal_.config.target) +
                               " checkpoint, expected thermal");
  if (nir_.config.generator.image_size != thermal_.config.generator.image_size)
    throw ConfigError("nir and thermal checkpoints use different image sizes");
  if (nir_.config.species_vocab != thermal_.config.species_vocab)
    throw ConfigError("nir and thermal checkpoints use different species vocabularies");
}

int CheckpointTranslator::image_size() const { return nir_.config.generator.image_size; }

std::optional<int> CheckpointTranslator::species_id(const std::string& genus) const {
  return vocab_index(nir_.config.species_vocab, genus);
}

Raster CheckpointTranslator::translate(data::Channel channel, const RgbImage& rgb,
                                       const solar::ConditioningVector& cond, const std::string&) const {
  return run_model(channel == data::Channel::nir ? nir_ : thermal_, channel, rgb, cond);
}

std::string CheckpointTranslator::model_id(data::Channel channel) const {
  return channel == data::Channel::nir ? nir_id_ : thermal_id_;
}

SingleModelTranslator::SingleModelTranslator(const std::filesystem::path& checkpoint)
    : model_(cgan::load_checkpoint(checkpoint)), id_(file_id(checkpoint)) {}

SingleModelTranslator::SingleModelTranslator(cgan::CganModel model, std::string id)
    : model_(std::move(model)), id_(std::move(id)) {}

int SingleModelTranslator::image_size() const { return model_.config.generator.image_size; }

std::optional<int> SingleModelTranslator::species_id(const std::string& genus) const {
  return vocab_index(model_.config.species_vocab, genus);
}

Raster SingleModelTranslator::translate(data::Channel channel, const RgbImage& rgb,
                                        const solar::ConditioningVector& cond, const std::string&) const {
  return run_model(model_, channel, rgb, cond);  // generate() rejects the other channel
}

std::string SingleModelTranslator::model_id(data::Channel channel) const {
  return channel == model_.config.target ? id_ : std::string{};
}

// ---- survey ----

namespace {

// Everything the per-tree work needs from one street-level frame.
struct Frame {
  std::string image_id;
  std::optional<RgbImage> rgb;  // at model size
  std::optional<solar::WeatherObservation> weather;
  solar::SolarPosition sun;
  std::string problem;
};

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const int k = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (k == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < k; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

TreeOutcome unknown_tree(const ingest::TreeRecord& tree, std::string note) {
  TreeOutcome o;
  o.tree = tree;
  o.result.tree_id = tree.tree_id;
  o.result.health_class = health::HealthClass::unknown;
  o.result.provenance = health::Provenance::generated;
  o.note = std::move(note);
  return o;
}

TreeOutcome assess_tree(const ingest::TreeRecord& tree, const Frame& frame, double distance,
                        const Translator& translator, const health::GenusThresholds& thresholds,
                        const SurveyOptions& options) {
  auto fail = [&](std::string note) {
    TreeOutcome o = unknown_tree(tree, std::move(note));
    o.image_id = frame.image_id;
    o.distance_m = distance;
    return o;
  };
  if (!frame.problem.empty()) return fail(frame.problem);
  const auto species = translator.species_id(tree.genus);
  if (!species) return fail("genus '" + tree.genus + "' is not in the model vocabulary");
  try {
    const auto cond = solar::assemble_conditioning(*frame.weather, frame.sun, *species, translator.bounds());
    const RgbImage& rgb = *frame.rgb;
    const Raster nir = translator.translate(data::Channel::nir, rgb, cond, frame.image_id);
    const Raster thermal = translator.translate(data::Channel::thermal, rgb, cond, frame.image_id);
    const auto mask = health::segment_canopy(rgb);
    TreeOutcome o;
    o.tree = tree;
    o.image_id = frame.image_id;
    o.distance_m = distance;
    o.result = health::tree_health(tree.tree_id, health::TreeRasters{nir, rgb.r, thermal}, mask, cond.t_air,
                                   tree.genus, thresholds, options.min_canopy_pixels, health::Provenance::generated);
    if (o.result.health_class == health::HealthClass::unknown)
      o.note = "canopy mask has " + std::to_string(o.result.ndvi_pixel_count) + " pixels";
    return o;
  } catch (const std::exception& e) {
    return fail(e.what());
  }
}

}  // namespace

SurveyReport run_survey(const ingest::InventoryResult& inventory, const SurveyEndpoints& endpoints,
                        const Translator& translator, const health::GenusThresholds& thresholds,
                        const SurveyOptions& options) {
  options.bbox.validate();
  std::vector<ingest::StreetImageRecord> images;
  try {
    images = ingest::fetch_street_images(endpoints.api_url, endpoints.api_token, options.bbox, options.window,
                                         options.http);
  } catch (const ServiceError& e) {
    throw StageError("images", e.what());
  }

  const auto match = ingest::match_trees_to_images(inventory.records, images, options.max_radius_m);
  std::map<std::string, const ingest::StreetImageRecord*> by_id;
  for (const auto& im : images) by_id[im.image_id] = &im;

  // one frame per matched image, weather fetched once per image
  std::map<std::string, Frame> frames;
  const int size = translator.image_size();
  for (const auto& a : match.assignments) {
    if (frames.count(a.image_id)) continue;
    const auto& rec = *by_id.at(a.image_id);
    Frame f;
    f.image_id = rec.image_id;
    try {
      f.weather = ingest::fetch_weather(endpoints.weather_url, rec.latitude, rec.longitude, rec.captured_at,
                                        options.http);
    } catch (const DataGapError& e) {
      f.problem = std::string("weather: ") + e.what();
    } catch (const ServiceError& e) {
      throw StageError("weather", e.what());
    }
    if (f.problem.empty()) {
      try {
        f.sun = solar::solar_position(rec.latitude, rec.longitude, rec.captured_at);
        f.rgb = data::center_crop_resize(data::decode_rgb(data::decode_image_rgb8(rec.image)), size);
      } catch (const std::exception& e) {
        f.problem = std::string("image ") + rec.image_id + ": " + e.what();
      }
    }
    frames.emplace(a.image_id, std::move(f));
  }

  std::map<std::string, const ingest::TreeImageAssignment*> assigned;
  for (const auto& a : match.assignments) assigned[a.tree_id] = &a;

  const auto& trees = inventory.records;
  std::vector<TreeOutcome> outcomes(trees.size());
  parallel_for(trees.size(), options.workers, [&](std::size_t i) {
    const auto it = assigned.find(trees[i].tree_id);
    if (it == assigned.end()) {
      outcomes[i] = unknown_tree(trees[i], "no street-level image within " + std::to_string(options.max_radius_m) + " m");
      return;
    }
    outcomes[i] = assess_tree(trees[i], frames.at(it->second->image_id), it->second->distance_m, translator,
                              thresholds, options);
  });
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const TreeOutcome& a, const TreeOutcome& b) { return a.tree.tree_id < b.tree.tree_id; });

  SurveyReport report;
  report.generated_at = options.generated_at;
  report.checkpoint_nir = translator.model_id(data::Channel::nir);
  report.checkpoint_thermal = translator.model_id(data::Channel::thermal);
  report.inventory_errors = inventory.errors;
  report.summary.n_trees = outcomes.size();
  for (const auto& o : outcomes) {
    switch (o.result.health_class) {
      case health::HealthClass::healthy: ++report.summary.n_healthy; break;
      case health::HealthClass::stressed: ++report.summary.n_stressed; break;
      case health::HealthClass::unknown: ++report.summary.n_unknown; break;
    }
  }
  report.trees = std::move(outcomes);
  return report;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

json tree_properties(const TreeOutcome& o) {
  const auto& r = o.result;
  return {{"tree_id", o.tree.tree_id},
          {"genus", o.tree.genus},
          {"ndvi_mean", r.ndvi_pixel_count > 0 ? json(r.ndvi_mean) : json(nullptr)},
          {"ctd", opt(r.ctd)},
          {"health_class", health::to_string(r.health_class)},
          {"provenance", health::to_string(r.provenance)}};
}

}  // namespace

std::string to_geojson(const SurveyReport& report) {
  json features = json::array();
  for (const auto& o : report.trees) {
    json props = tree_properties(o);
    props["image_id"] = opt(o.image_id);
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", {o.tree.longitude, o.tree.latitude}}}},
                        {"properties", std::move(props)}});
  }
  return json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump(2) + "\n";
}

std::string to_json(const SurveyReport& report) {
  json trees = json::array();
  for (const auto& o : report.trees) {
    json t = tree_properties(o);
    t["ndvi_pixel_count"] = o.result.ndvi_pixel_count;
    t["image_id"] = opt(o.image_id);
    t["distance_m"] = opt(o.distance_m);
    if (!o.note.empty()) t["note"] = o.note;
    trees.push_back(std::move(t));
  }
  json errors = json::array();
  for (const auto& e : report.inventory_errors) errors.push_back({{"line", e.line}, {"message", e.message}});
  const auto& s = report.summary;
  json j{{"generated_at", format_rfc3339(report.generated_at)},
         {"checkpoints", {{"nir", report.checkpoint_nir}, {"thermal", report.checkpoint_thermal}}},
         {"trees", std::move(trees)},
         {"inventory_errors", std::move(errors)},
         {"summary",
          {{"n_trees", s.n_trees}, {"n_healthy", s.n_healthy}, {"n_stressed", s.n_stressed}, {"n_unknown", s.n_unknown}}}};
  return j.dump(2) + "\n";
}

// ---- evaluation ----

namespace {

std::optional<double> masked_mean(const Raster& r, const health::CanopyMask& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (mask.bits[i]) sum += r.values[i], ++n;
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

const std::vector<std::string>& split_ids(const data::DatasetManifest& m, const std::string& split) {
  if (split == "train") return m.splits.train;
  if (split == "val") return m.splits.val;
  if (split == "test") return m.splits.test;
  throw ConfigError("unknown split '" + split + "' (expected train, val or test)");
}

}  // namespace

EvalReport run_eval(const data::Dataset& dataset, const std::string& split, const Translator& translator,
                    const std::vector<data::Channel>& channels) {
  const auto& ids = split_ids(dataset.manifest(), split);
  if (ids.empty()) throw SplitError("split '" + split + "' is empty");
  if (channels.empty()) throw ConfigError("no channels to evaluate");
  const auto& ranges = dataset.manifest().normalization;
  const int size = translator.image_size();

  EvalReport report;
  report.split = split;
  for (const auto& id : ids) {
    const auto sample = dataset.load(id);
    const RgbImage rgb = data::center_crop_resize(sample.rgb, size);
    const auto mask = health::segment_canopy(rgb);
    for (const auto ch : channels) {
      const Raster truth = data::center_crop_resize(ch == data::Channel::nir ? sample.nir : sample.thermal, size);
      const Raster gen = translator.translate(ch, rgb, sample.cond, sample.id);
      SampleEval e;
      e.id = id;
      e.channel = ch;
      const double span = ch == data::Channel::nir ? 1.0 : ranges.thermal_max_c - ranges.thermal_min_c;
      e.metrics = eval_metrics(gen, truth, span);
      if (ch == data::Channel::nir) {
        const auto a = masked_mean(health::ndvi_map(gen, rgb.r), mask);
        const auto b = masked_mean(health::ndvi_map(truth, rgb.r), mask);
        if (a && b) e.delta_ndvi = *a - *b;
      } else {
        const auto a = masked_mean(gen, mask);
        const auto b = masked_mean(truth, mask);
        if (a && b) e.delta_ctd = (sample.cond.t_air - *a) - (sample.cond.t_air - *b);
      }
      report.samples.push_back(std::move(e));
    }
  }

  for (const auto ch : channels) {
    EvalReport::Aggregate agg;
    agg.channel = ch;
    agg.mean = {0, 0, 0, 0};
    double dn = 0, dc = 0;
    std::size_t nn = 0, nc = 0;
    for (const auto& e : report.samples) {
      if (e.channel != ch) continue;
      ++agg.samples;
      agg.mean.mae += e.metrics.mae;
      agg.mean.rmse += e.metrics.rmse;
      agg.mean.psnr += e.metrics.psnr;
      agg.mean.ssim += e.metrics.ssim;
      if (e.delta_ndvi) dn += std::abs(*e.delta_ndvi), ++nn;
      if (e.delta_ctd) dc += std::abs(*e.delta_ctd), ++nc;
    }
    const double n = static_cast<double>(agg.samples);
    agg.mean.mae /= n;
    agg.mean.rmse /= n;
    agg.mean.psnr /= n;
    agg.mean.ssim /= n;
    if (nn) agg.mean_abs_delta_ndvi = dn / static_cast<double>(nn);
    if (nc) agg.mean_abs_delta_ctd = dc / static_cast<double>(nc);
    report.aggregates.push_back(agg);
  }
  return report;
}

std::string to_json(const EvalReport& report) {
  auto metrics = [](const EvalMetrics& m) {
    return json{{"mae", m.mae}, {"rmse", m.rmse}, {"psnr", m.psnr}, {"ssim", m.ssim}};
  };
  json samples = json::array();
  for (const auto& e : report.samples)
    samples.push_back({{"id", e.id},
                       {"channel", data::to_string(e.channel)},
                       {"metrics", metrics(e.metrics)},
                       {"delta_ndvi", opt(e.delta_ndvi)},
                       {"delta_ctd", opt(e.delta_ctd)}});
  json aggregates = json::array();
  for (const auto& a : report.aggregates)
    aggregates.push_back({{"channel", data::to_string(a.channel)},
                          {"samples", a.samples},
                          {"metrics", metrics(a.mean)},
                          {"mean_abs_delta_ndvi", opt(a.mean_abs_delta_ndvi)},
                          {"mean_abs_delta_ctd", opt(a.mean_abs_delta_ctd)}});
  return json{{"split", report.split}, {"samples", std::move(samples)}, {"aggregate", std::move(aggregates)}}.dump(2) +
         "\n";
}

}  // namespace canopyscan::survey
