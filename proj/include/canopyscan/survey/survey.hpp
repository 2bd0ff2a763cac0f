#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "canopyscan/cgan/model.hpp"
#include "canopyscan/common/errors.hpp"
#include "canopyscan/common/raster.hpp"
#include "canopyscan/common/time.hpp"
#include "canopyscan/health/health.hpp"
#include "canopyscan/ingest/ingest.hpp"
#include "canopyscan/survey/metrics.hpp"

namespace canopyscan::survey {

/// Where the synthetic channels come from. Implementations must be safe to
/// call from several threads at once.
class Translator {
 public:
  virtual ~Translator() = default;
  /// Square input size the translator expects.
  virtual int image_size() const = 0;
  /// Species index for a genus, or nullopt when the vocabulary lacks it.
  virtual std::optional<int> species_id(const std::string& genus) const = 0;
  /// Physical-space raster (reflectance or degrees C) for `rgb` at image_size.
  /// `image_id` identifies the source frame; models ignore it.
  virtual Raster translate(data::Channel channel, const RgbImage& rgb, const solar::ConditioningVector& cond,
                           const std::string& image_id) const = 0;
  /// Identifier of the model behind a channel (recorded in reports).
  virtual std::string model_id(data::Channel channel) const = 0;
  virtual solar::SanityBounds bounds() const { return {}; }
};

/// FNV-1a 64 over the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::vector<std::uint8_t>& bytes);

/// A pair of trained models, one per channel.
class CheckpointTranslator : public Translator {
 public:
  /// Throws ChannelMismatchError if either file holds the other channel, and
  /// ConfigError if the two disagree on image size or species vocabulary.
  CheckpointTranslator(const std::filesystem::path& nir_checkpoint, const std::filesystem::path& thermal_checkpoint);

  int image_size() const override;
  std::optional<int> species_id(const std::string& genus) const override;
  Raster translate(data::Channel channel, const RgbImage& rgb, const solar::ConditioningVector& cond,
                   const std::string& image_id) const override;
  std::string model_id(data::Channel channel) const override;

 private:
  cgan::CganModel nir_, thermal_;
  std::string nir_id_, thermal_id_;
};

/// One model for one channel; the other channel is unavailable.
class SingleModelTranslator : public Translator {
 public:
  explicit SingleModelTranslator(const std::filesystem::path& checkpoint);
  explicit SingleModelTranslator(cgan::CganModel model, std::string id = "in-memory");

  int image_size() const override;
  std::optional<int> species_id(const std::string& genus) const override;
  Raster translate(data::Channel channel, const RgbImage& rgb, const solar::ConditioningVector& cond,
                   const std::string& image_id) const override;
  std::string model_id(data::Channel channel) const override;
  data::Channel channel() const { return model_.config.target; }
  const cgan::CganModel& model() const { return model_; }

 private:
  cgan::CganModel model_;
  std::string id_;
};

/// Runs a model on one physical-space RGB frame already at model size.
Raster run_model(const cgan::CganModel& model, data::Channel channel, const RgbImage& rgb,
                 const solar::ConditioningVector& cond);

// ---- survey ----

struct SurveyOptions {
  ingest::BBox bbox;
  ingest::TimeWindow window{from_unix_millis(0), parse_rfc3339("2100-01-01T00:00:00Z")};
  double max_radius_m = 20.0;
  int workers = 4;
  std::size_t min_canopy_pixels = 50;
  UtcTime generated_at{};
  ingest::HttpOptions http;
};

struct SurveyEndpoints {
  std::string api_url;
  std::string api_token;
  std::string weather_url;
};

struct TreeOutcome {
  ingest::TreeRecord tree;
  health::HealthIndexResult result;
  std::optional<std::string> image_id;
  std::optional<double> distance_m;
  std::string note;  // why the tree is unknown, when it is
};

struct SurveySummary {
  std::size_t n_trees = 0, n_healthy = 0, n_stressed = 0, n_unknown = 0;
};

struct SurveyReport {
  UtcTime generated_at{};
  std::string checkpoint_nir, checkpoint_thermal;
  std::vector<TreeOutcome> trees;  // sorted by tree_id
  std::vector<ingest::RowError> inventory_errors;
  SurveySummary summary;
};

/// A hard failure of an external service, naming the pipeline stage.
class StageError : public ServiceError {
 public:
  StageError(std::string stage, const std::string& what)
      : ServiceError(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Fetch images, match trees, fetch weather per image, translate, segment,
/// compute NDVI (red band taken from the input frame) and CTD, classify.
/// Every inventory tree appears in the report; trees without a usable image
/// are `unknown`. Throws StageError when a fetch fails outright.
SurveyReport run_survey(const ingest::InventoryResult& inventory, const SurveyEndpoints& endpoints,
                        const Translator& translator, const health::GenusThresholds& thresholds,
                        const SurveyOptions& options);

/// RFC 7946 FeatureCollection, one Point per tree, [longitude, latitude].
std::string to_geojson(const SurveyReport& report);
std::string to_json(const SurveyReport& report);

// ---- evaluation ----

struct SampleEval {
  std::string id;
  data::Channel channel = data::Channel::nir;
  EvalMetrics metrics;
  std::optional<double> delta_ndvi;  // generated minus ground truth; NIR only
  std::optional<double> delta_ctd;   // thermal only
};

struct EvalReport {
  std::string split;
  std::vector<SampleEval> samples;
  // per channel: mean of per-sample metrics, mean |delta|
  struct Aggregate {
    data::Channel channel = data::Channel::nir;
    std::size_t samples = 0;
    EvalMetrics mean;
    std::optional<double> mean_abs_delta_ndvi, mean_abs_delta_ctd;
  };
  std::vector<Aggregate> aggregates;
};

/// Evaluates `channels` on one split of a dataset against its ground-truth
/// channels. Indexes use a canopy mask segmented from the RGB frame, shared
/// by the generated and ground-truth pipelines. Throws SplitError on an empty
/// split.
EvalReport run_eval(const data::Dataset& dataset, const std::string& split, const Translator& translator,
                    const std::vector<data::Channel>& channels);

std::string to_json(const EvalReport& report);

}  // namespace canopyscan::survey
