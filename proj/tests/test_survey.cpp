#include <cmath>
#include <random>

#include "canopyscan/common/errors.hpp"
#include "canopyscan/survey/metrics.hpp"
#include "canopyscan/survey/survey.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/cgan_fixtures.hpp"
#include "support/city_fixture.hpp"
#include "support/temp_dir.hpp"

using namespace canopyscan;
using namespace canopyscan::survey;
using canopyscan::testing::MockServer;
using nlohmann::json;

namespace {

// Closed-form pair shared with the Python reference that froze the values below.
std::pair<Raster, Raster> metric_fixture() {
  Raster ref(24, 20), gen(24, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 24; ++x) {
      const double r = 0.5 + 0.3 * std::sin(0.37 * x) * std::cos(0.23 * y);
      ref.at(x, y) = r;
      gen.at(x, y) = r + 0.05 * std::cos(0.5 * x + 0.7 * y) + 0.01 * (((7 * x + 13 * y) % 5) - 2);
    }
  return {gen, ref};
}

Raster random_raster(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  Raster r(w, h);
  for (double& v : r.values) v = u(rng);
  return r;
}

const data::SpeciesPalette& palette() {
  static const auto p = data::SpeciesPalette::load(canopyscan::testing::fixtures_dir() / "species_palette.json");
  return p;
}

SurveyOptions city_options(const canopyscan::testing::SyntheticCity& city) {
  SurveyOptions o;
  o.bbox = city.bbox;
  o.http.backoff_base = std::chrono::milliseconds(1);
  o.http.timeout = std::chrono::milliseconds(5000);
  return o;
}

ingest::InventoryResult inventory_of(const canopyscan::testing::SyntheticCity& city) {
  ingest::InventoryResult inv;
  inv.records = city.trees;
  return inv;
}

}  // namespace

TEST_CASE("metrics: identical rasters") {
  std::mt19937_64 rng(1);
  const Raster a = random_raster(32, 32, rng);
  const auto m = eval_metrics(a, a, 1.0);
  CHECK(m.mae == 0.0);
  CHECK(m.rmse == 0.0);
  CHECK(m.ssim == 1.0);
  CHECK(m.psnr == kPsnrCap);
}

TEST_CASE("metrics: constant offset") {
  std::mt19937_64 rng(2);
  const Raster a = random_raster(16, 16, rng);
  Raster b = a;
  for (double& v : b.values) v += 0.1;
  const auto m = eval_metrics(b, a, 1.0);
  CHECK(m.mae == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(m.rmse == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(m.psnr == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(m.ssim < 1.0);
}

TEST_CASE("metrics: fixture pair against the reference implementation") {
  // numpy for the pixel metrics; skimage structural_similarity with
  // gaussian_weights=True, sigma=1.5, use_sample_covariance=False, data_range=1
  const auto [gen, ref] = metric_fixture();
  const auto m = eval_metrics(gen, ref, 1.0);
  CHECK(std::abs(m.mae - 0.03306445985864808) < 1e-6);
  CHECK(std::abs(m.rmse - 0.03800938839880047) < 1e-6);
  CHECK(std::abs(m.psnr - 28.40218236966539) < 1e-6);
  CHECK(std::abs(m.ssim - 0.9207168363537619) < 1e-6);
}

TEST_CASE("metrics: properties and errors") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Raster a = random_raster(12, 14, rng), b = random_raster(12, 14, rng);
    const auto m = eval_metrics(a, b, 1.0);
    CHECK(m.rmse >= m.mae);
    CHECK(m.mae >= 0.0);
    CHECK(m.ssim < 1.0);
    CHECK(m.ssim >= -1.0);
    CHECK(m.ssim == doctest::Approx(ssim(b, a, 1.0)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(eval_metrics(Raster(12, 12), Raster(12, 13), 1.0), DimensionError);
  CHECK_THROWS_AS(eval_metrics(Raster(8, 8), Raster(8, 8), 1.0), DimensionError);
}

TEST_CASE("checkpoint ids are FNV-1a 64") {
  CHECK(fnv1a_hex({}) == "cbf29ce484222325");
  CHECK(fnv1a_hex({'a'}) == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex({'f', 'o', 'o', 'b', 'a', 'r'}) == "85944171f73967e8");
}

TEST_CASE("run_model checks channel and size") {
  auto cfg = canopyscan::testing::small_config(32, 3, 2);
  SingleModelTranslator t(cgan::init_model(cfg, 1));
  RgbImage rgb{Raster(32, 32, 0.3), Raster(32, 32, 0.5), Raster(32, 32, 0.2)};
  solar::ConditioningVector cond{500, {180, 40}, 20, 1};
  const Raster out = t.translate(data::Channel::nir, rgb, cond, "x");
  CHECK(out.width == 32);
  for (double v : out.values) CHECK((v >= 0.0 && v <= 1.0));
  CHECK_THROWS_AS(t.translate(data::Channel::thermal, rgb, cond, "x"), ChannelMismatchError);
  RgbImage small{Raster(16, 16), Raster(16, 16), Raster(16, 16)};
  CHECK_THROWS_AS(t.translate(data::Channel::nir, small, cond, "x"), DimensionError);
  CHECK(t.species_id("sp1") == 1);
  CHECK_FALSE(t.species_id("Quercus").has_value());
}

TEST_CASE("survey: synthetic city with the perfect translator") {
  const auto city = canopyscan::testing::make_city(palette());
  MockServer images, weather;
  canopyscan::testing::serve_city(images, weather, city);
  images.start();
  weather.start();
  const health::GenusThresholds thresholds;
  const canopyscan::testing::PerfectTranslator perfect(city);
  const auto report =
      run_survey(inventory_of(city), {images.url(), "token", weather.url()}, perfect, thresholds, city_options(city));

  REQUIRE(report.trees.size() == 20);
  const auto& s = report.summary;
  CHECK(s.n_healthy + s.n_stressed + s.n_unknown == s.n_trees);
  CHECK(s.n_unknown == 0);
  CHECK(s.n_healthy > 0);
  CHECK(s.n_stressed > 0);
  for (std::size_t i = 0; i < city.trees.size(); ++i) {
    const auto& o = report.trees[i];
    CHECK(o.tree.tree_id == city.trees[i].tree_id);  // already in id order
    CHECK(o.result.health_class == canopyscan::testing::oracle_class(city, i, thresholds));
    CHECK(o.result.provenance == health::Provenance::generated);
    CHECK(*o.image_id == city.frames[i].image_id);
    CHECK(*o.distance_m == doctest::Approx(5.0).epsilon(1e-6));
  }

  const json gj = json::parse(to_geojson(report));
  CHECK(gj["type"] == "FeatureCollection");
  REQUIRE(gj["features"].size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& f = gj["features"][i];
    CHECK(f["geometry"]["type"] == "Point");
    CHECK(f["geometry"]["coordinates"][0].get<double>() == city.trees[i].longitude);
    CHECK(f["geometry"]["coordinates"][1].get<double>() == city.trees[i].latitude);
    CHECK(f["properties"]["provenance"] == "generated");
    CHECK(f["properties"]["genus"] == city.trees[i].genus);
  }
  const json rep = json::parse(to_json(report));
  CHECK(rep["summary"]["n_trees"] == 20);
  CHECK(rep["checkpoints"]["nir"] == "ground-truth");
}

TEST_CASE("survey: unmatched trees and unknown genera degrade single trees") {
  const auto city = canopyscan::testing::make_city(palette(), 6);
  auto inv = inventory_of(city);
  inv.records.push_back({"zz-far", 47.40, 8.56, "Acer", std::nullopt});  // ~3 km from any frame
  inv.records[1].genus = "Ginkgo";
  MockServer images, weather;
  canopyscan::testing::serve_city(images, weather, city);
  images.start();
  weather.start();

  const canopyscan::testing::PerfectTranslator perfect(city);
  const auto report = run_survey(inv, {images.url(), "token", weather.url()}, perfect, {}, city_options(city));
  REQUIRE(report.trees.size() == 7);
  CHECK(report.trees.back().tree.tree_id == "zz-far");
  CHECK(report.trees.back().result.health_class == health::HealthClass::unknown);
  CHECK_FALSE(report.trees.back().image_id.has_value());
  CHECK(report.trees[1].result.health_class == health::HealthClass::unknown);
  CHECK(report.trees[1].note.find("Ginkgo") != std::string::npos);
  CHECK(report.summary.n_unknown == 2);
  const json gj = json::parse(to_geojson(report));
  CHECK(gj["features"].size() == 7);
  CHECK(gj["features"][6]["properties"]["health_class"] == "unknown");
  CHECK(gj["features"][6]["properties"]["ndvi_mean"].is_null());
}

TEST_CASE("survey: weather gap for one frame") {
  const auto city = canopyscan::testing::make_city(palette(), 4);
  MockServer images, weather;
  canopyscan::testing::serve_city(images, weather, city);
  // a second weather service that never saw frame 2's hour
  MockServer sparse;
  sparse.server().Get("/observations", [&city](const httplib::Request&, httplib::Response& res) {
    json obs = json::array();
    for (std::size_t i = 0; i < city.frames.size(); ++i) {
      if (i == 1) continue;
      const auto& f = city.frames[i];
      obs.push_back({{"station_id", "s" + std::to_string(i)},
                     {"latitude", f.latitude},
                     {"longitude", f.longitude},
                     {"time", format_rfc3339(f.captured_at)},
                     {"i_radiation", f.scene.sample.cond.i_radiation},
                     {"t_air", f.scene.sample.cond.t_air}});
    }
    res.set_content(json{{"observations", obs}}.dump(), "application/json");
  });
  images.start();
  sparse.start();
  const canopyscan::testing::PerfectTranslator perfect(city);
  const auto report = run_survey(inventory_of(city), {images.url(), "token", sparse.url()}, perfect, {},
                                 city_options(city));
  REQUIRE(report.trees.size() == 4);
  // frame 2's nearest remaining station is ~110 m away but its hour differs by days
  CHECK(report.trees[1].result.health_class == health::HealthClass::unknown);
  CHECK(report.trees[1].note.find("weather") != std::string::npos);
  CHECK(report.trees[0].result.health_class != health::HealthClass::unknown);
}

TEST_CASE("survey: hard service failures name the stage") {
  const auto city = canopyscan::testing::make_city(palette(), 3);
  MockServer images, weather;
  canopyscan::testing::serve_city(images, weather, city);
  MockServer broken;
  broken.server().Get("/observations", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  broken.server().Get("/images", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  images.start();
  broken.start();
  const canopyscan::testing::PerfectTranslator perfect(city);
  auto opts = city_options(city);
  try {
    run_survey(inventory_of(city), {broken.url(), "token", broken.url()}, perfect, {}, opts);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "images");
  }
  try {
    run_survey(inventory_of(city), {images.url(), "token", broken.url()}, perfect, {}, opts);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "weather");
  }
  CHECK_THROWS_AS(run_survey(inventory_of(city), {images.url(), "", broken.url()}, perfect, {}, opts), StageError);
}

TEST_CASE("survey: output does not depend on worker count or repetition") {
  const auto city = canopyscan::testing::make_city(palette(), 10);
  MockServer images, weather;
  canopyscan::testing::serve_city(images, weather, city);
  images.start();
  weather.start();
  auto inv = inventory_of(city);
  std::reverse(inv.records.begin(), inv.records.end());
  const canopyscan::testing::PerfectTranslator perfect(city);
  auto opts = city_options(city);
  const std::string first = to_geojson(run_survey(inv, {images.url(), "t", weather.url()}, perfect, {}, opts));
  CHECK(to_geojson(run_survey(inv, {images.url(), "t", weather.url()}, perfect, {}, opts)) == first);
  opts.workers = 1;
  CHECK(to_geojson(run_survey(inv, {images.url(), "t", weather.url()}, perfect, {}, opts)) == first);
  CHECK(json::parse(first)["features"][0]["properties"]["tree_id"] == "tree-01");
}

TEST_CASE("eval: perfect translator has zero index error") {
  canopyscan::testing::TempDir dir("eval");
  data::SynthDatasetConfig cfg;
  cfg.palette = palette();
  cfg.samples = 10;
  auto manifest = data::synth_dataset(dir.path(), cfg);
  for (std::size_t i = 0; i < manifest.samples.size(); ++i)
    (i % 2 ? manifest.splits.test : manifest.splits.train).push_back(manifest.samples[i].id);
  data::save_manifest(manifest, dir / "manifest.json");
  const auto ds = data::Dataset::open(dir / "manifest.json");

  std::vector<data::MultiSpectralSample> samples;
  for (std::size_t i = 0; i < ds.size(); ++i) samples.push_back(ds.load(i));
  std::map<std::string, const data::MultiSpectralSample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;
  const canopyscan::testing::PerfectTranslator perfect(by_id, palette().names());

  const auto report = run_eval(ds, "test", perfect, {data::Channel::nir, data::Channel::thermal});
  REQUIRE(report.samples.size() == 2 * manifest.splits.test.size());
  double mae_sum = 0.0;
  for (const auto& e : report.samples) {
    CHECK(e.metrics.mae == 0.0);
    CHECK(e.metrics.ssim == 1.0);
    if (e.channel == data::Channel::nir) {
      REQUIRE(e.delta_ndvi.has_value());
      CHECK(*e.delta_ndvi == 0.0);
      mae_sum += e.metrics.mae;
    } else {
      REQUIRE(e.delta_ctd.has_value());
      CHECK(*e.delta_ctd == 0.0);
    }
  }
  REQUIRE(report.aggregates.size() == 2);
  CHECK(report.aggregates[0].mean.mae == doctest::Approx(mae_sum / manifest.splits.test.size()).epsilon(1e-12));
  CHECK(*report.aggregates[0].mean_abs_delta_ndvi == 0.0);
  CHECK(*report.aggregates[1].mean_abs_delta_ctd == 0.0);
  CHECK_THROWS_AS(run_eval(ds, "val", perfect, {data::Channel::nir}), SplitError);
  CHECK(json::parse(to_json(report))["aggregate"].size() == 2);
}

TEST_CASE("eval: aggregate is the mean of per-sample metrics") {
  canopyscan::testing::TempDir dir("eval2");
  data::SynthDatasetConfig cfg;
  cfg.palette = palette();
  cfg.samples = 6;
  auto manifest = data::synth_dataset(dir.path(), cfg);
  for (const auto& e : manifest.samples) manifest.splits.test.push_back(e.id);
  data::save_manifest(manifest, dir / "manifest.json");
  const auto ds = data::Dataset::open(dir / "manifest.json");

  auto mc = canopyscan::testing::small_config(64, 4, static_cast<int>(palette().species.size()));
  mc.species_vocab = palette().names();
  const SingleModelTranslator model(cgan::init_model(mc, 5));
  const auto report = run_eval(ds, "test", model, {data::Channel::nir});
  double mae = 0, rmse = 0;
  for (const auto& e : report.samples) mae += e.metrics.mae, rmse += e.metrics.rmse;
  const double n = static_cast<double>(report.samples.size());
  CHECK(std::abs(report.aggregates[0].mean.mae - mae / n) < 1e-12);
  CHECK(std::abs(report.aggregates[0].mean.rmse - rmse / n) < 1e-12);
  CHECK(report.aggregates[0].mean.mae > 0.0);
}
