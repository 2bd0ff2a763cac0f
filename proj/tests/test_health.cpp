#include <cmath>
#include <random>

#include "canopyscan/common/errors.hpp"
#include "canopyscan/health/health.hpp"
#include "doctest.h"

using namespace canopyscan;
using namespace canopyscan::health;

namespace {

RgbImage fill(int w, int h, double r, double g, double b) { return {Raster(w, h, r), Raster(w, h, g), Raster(w, h, b)}; }

// Reference: two-class Otsu written directly from the between-class variance
// over every candidate split of the sorted distinct ExG values.
std::vector<std::uint8_t> reference_two_value_mask(const RgbImage& img) {
  std::vector<std::uint8_t> out(img.r.size());
  double hi = -1e9;
  for (std::size_t i = 0; i < out.size(); ++i)
    hi = std::max(hi, 2 * img.g.values[i] - img.r.values[i] - img.b.values[i]);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (2 * img.g.values[i] - img.r.values[i] - img.b.values[i]) == hi;
  return out;
}

}  // namespace

TEST_CASE("green half of a green/gray image") {
  auto img = fill(8, 6, 0.5, 0.5, 0.5);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 4; ++x) img.r.at(x, y) = 0.0, img.g.at(x, y) = 1.0, img.b.at(x, y) = 0.0;
  const auto m = segment_canopy(img);
  CHECK(m.width == 8);
  CHECK(m.height == 6);
  CHECK(m.count() == 24);
  CHECK(m.bits == reference_two_value_mask(img));
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) CHECK(m.at(x, y) == (x < 4));
}

TEST_CASE("degenerate histograms give empty masks") {
  const auto gray = segment_canopy(fill(5, 7, 0.5, 0.5, 0.5));
  CHECK(gray.width == 5);
  CHECK(gray.height == 7);
  CHECK(gray.count() == 0);
  CHECK(gray.bits.size() == 35);
  CHECK(!otsu_threshold(std::vector<double>(256, 0.0)).has_value());
  std::vector<double> one(256, 0.0);
  one[17] = 9;
  CHECK(!otsu_threshold(one).has_value());
}

TEST_CASE("segmentation input errors") {
  auto img = fill(3, 3, 0.1, 0.2, 0.3);
  img.g.at(1, 1) = NAN;
  CHECK_THROWS_AS(segment_canopy(img), InputError);
  img.g.at(1, 1) = INFINITY;
  CHECK_THROWS_AS(segment_canopy(img), InputError);
  auto bad = fill(3, 3, 0.1, 0.2, 0.3);
  bad.b = Raster(2, 3, 0.0);
  CHECK_THROWS_AS(segment_canopy(bad), DimensionError);
}

TEST_CASE("segmentation idempotent and scale invariant") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    RgbImage img{Raster(32, 32), Raster(32, 32), Raster(32, 32)};
    for (std::size_t i = 0; i < img.r.size(); ++i) {
      const bool leaf = u(rng) < 0.4;
      img.r.values[i] = leaf ? 0.1 + 0.1 * u(rng) : 0.4 + 0.2 * u(rng);
      img.g.values[i] = leaf ? 0.5 + 0.3 * u(rng) : 0.4 + 0.2 * u(rng);
      img.b.values[i] = leaf ? 0.1 + 0.1 * u(rng) : 0.4 + 0.2 * u(rng);
    }
    const auto m = segment_canopy(img);
    CHECK(m == segment_canopy(img));
    for (double a : {0.5, 0.25, 0.75}) {
      RgbImage s = img;
      for (auto* ch : {&s.r, &s.g, &s.b})
        for (double& v : ch->values) v *= a;
      CHECK(segment_canopy(s) == m);
    }
  }
}

TEST_CASE("ndvi examples") {
  Raster nir(3, 1), red(3, 1);
  nir.values = {0.3, 0.6, 0.0};
  red.values = {0.3, 0.2, 0.0};
  const auto n = ndvi_map(nir, red);
  CHECK(n.values[0] == 0.0);
  CHECK(n.values[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(n.values[2] == 0.0);
  CHECK_THROWS_AS(ndvi_map(Raster(2, 2), Raster(2, 3)), DimensionError);
  nir.values[0] = 1.5;
  CHECK_THROWS_AS(ndvi_map(nir, red), InputError);
}

TEST_CASE("ndvi range and scale invariance") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1), a(0.01, 1.0);
  Raster nir(40, 40), red(40, 40);
  for (int rep = 0; rep < 50; ++rep) {
    for (std::size_t i = 0; i < nir.size(); ++i) nir.values[i] = u(rng), red.values[i] = u(rng);
    const auto n = ndvi_map(nir, red);
    for (double v : n.values) REQUIRE((v >= -1.0 && v <= 1.0));
    const double s = a(rng);
    Raster sn = nir, sr = red;
    for (double& v : sn.values) v *= s;
    for (double& v : sr.values) v *= s;
    const auto m = ndvi_map(sn, sr);
    for (std::size_t i = 0; i < n.size(); ++i) REQUIRE(std::abs(m.values[i] - n.values[i]) <= 1e-12);
  }
}

TEST_CASE("ctd") {
  CanopyMask all{2, 2, {1, 1, 1, 1}};
  CHECK(ctd(Raster(2, 2, 22.0), all, 25.0) == doctest::Approx(3.0));
  Raster t(2, 1);
  t.values = {30.0, 32.0};
  CHECK(ctd(t, CanopyMask{2, 1, {1, 1}}, 30.0) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(ctd(t, CanopyMask{2, 1, {0, 0}}, 30.0), EmptyCanopyError);
  CHECK_THROWS_AS(ctd(t, all, 30.0), DimensionError);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(10, 40), d(-5, 5);
  Raster th(16, 16);
  for (double& v : th.values) v = u(rng);
  CanopyMask m{16, 16, std::vector<std::uint8_t>(256, 1)};
  for (int i = 0; i < 100; ++i) {
    const double t0 = u(rng), dt = d(rng);
    CHECK(std::abs(ctd(th, m, t0 + dt) - ctd(th, m, t0) - dt) <= 1e-12);
  }
}

TEST_CASE("tree health classification") {
  const GenusThresholds thr;
  const int n = 10;
  Raster red(n, n, 0.1), nir(n, n), thermal(n, n, 23.0);
  for (double& v : nir.values) v = 0.1 * 1.7 / 0.3;  // ndvi 0.7
  CanopyMask full{n, n, std::vector<std::uint8_t>(n * n, 1)};
  auto r = tree_health("t1", {nir, red, thermal}, full, 25.0, "Acer", thr);
  CHECK(r.ndvi_mean == doctest::Approx(0.7));
  CHECK(*r.ctd == doctest::Approx(2.0));
  CHECK(r.health_class == HealthClass::healthy);
  CHECK(r.ndvi_pixel_count == 100);

  CanopyMask tiny{n, n, std::vector<std::uint8_t>(n * n, 0)};
  tiny.bits[0] = tiny.bits[1] = tiny.bits[2] = 1;
  CHECK(tree_health("t2", {nir, red, thermal}, tiny, 25.0, "Acer", thr).health_class == HealthClass::unknown);

  CanopyMask none{n, n, std::vector<std::uint8_t>(n * n, 0)};
  const auto e = tree_health("t3", {nir, red, thermal}, none, 25.0, "Acer", thr);
  CHECK(e.health_class == HealthClass::unknown);
  CHECK(e.ndvi_pixel_count == 0);
  CHECK(!e.ctd.has_value());

  // boundary: ndvi exactly at the minimum is healthy
  CHECK(classify(0.4, 0.0, 60, GenusRule{0.4, 0.0}, 50) == HealthClass::healthy);
  CHECK(classify(0.3999, 1.0, 60, GenusRule{0.4, 0.0}, 50) == HealthClass::stressed);
  CHECK(classify(0.9, -0.1, 60, GenusRule{0.4, 0.0}, 50) == HealthClass::stressed);
  CHECK(classify(0.9, 1.0, 49, GenusRule{0.4, 0.0}, 50) == HealthClass::unknown);
}

TEST_CASE("genus thresholds json") {
  const auto t = GenusThresholds::from_json(
      R"({"default": {"ndvi_healthy_min": 0.4, "ctd_healthy_min": 0.0}, "Quercus": {"ndvi_healthy_min": 0.5, "ctd_healthy_min": 1.5}})");
  CHECK(t.rule_for("Quercus").ndvi_healthy_min == 0.5);
  CHECK(t.rule_for("Quercus").ctd_healthy_min == 1.5);
  CHECK(t.rule_for("Ulmus").ndvi_healthy_min == 0.4);
  CHECK_THROWS_AS(GenusThresholds::from_json(R"({"Acer": {}})"), ConfigError);
  CHECK_THROWS_AS(GenusThresholds::from_json(R"({"default": {"ndvi_healthy_min": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(GenusThresholds::from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(GenusThresholds::from_json(R"({"default": {"ndvi_healthy_min": "x"}})"), ConfigError);
  CHECK_THROWS_AS(GenusThresholds::load("/nonexistent/thr.json"), ConfigError);
}
