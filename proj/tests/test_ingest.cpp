#include <atomic>
#include <cmath>
#include <fstream>
#include <set>

#include "canopyscan/common/errors.hpp"
#include "canopyscan/ingest/ingest.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/mock_server.hpp"
#include "support/temp_dir.hpp"

using namespace canopyscan;
using namespace canopyscan::ingest;
using canopyscan::testing::MockServer;
using nlohmann::json;

namespace {

struct FakeImage {
  std::string id;
  double lat, lon;
};

// Paginated image API: bbox filter, optional `limit`, offset-style page tokens.
class ImageApi {
 public:
  std::vector<FakeImage> images;
  std::string token = "secret";
  int default_page = 100;
  std::atomic<int> list_calls{0};

  void install(MockServer& m) {
    auto& s = m.server();
    s.Get("/images", [this, &m](const httplib::Request& req, httplib::Response& res) {
      ++list_calls;
      if (req.get_header_value("Authorization") != "Bearer " + token) {
        res.status = 401;
        return;
      }
      double b[4];
      std::sscanf(req.get_param_value("bbox").c_str(), "%lf,%lf,%lf,%lf", &b[0], &b[1], &b[2], &b[3]);
      std::vector<const FakeImage*> hits;
      for (const auto& im : images)
        if (im.lon >= b[0] && im.lat >= b[1] && im.lon <= b[2] && im.lat <= b[3]) hits.push_back(&im);
      const int limit = req.has_param("limit") ? std::stoi(req.get_param_value("limit")) : default_page;
      const int start = req.has_param("page_token") ? std::stoi(req.get_param_value("page_token")) : 0;
      json out{{"images", json::array()}};
      const int end = std::min<int>(start + limit, static_cast<int>(hits.size()));
      for (int i = start; i < end; ++i)
        out["images"].push_back({{"id", hits[i]->id},
                                 {"geometry", {{"type", "Point"}, {"coordinates", {hits[i]->lon, hits[i]->lat}}}},
                                 {"captured_at", "2024-06-21T12:00:00Z"},
                                 {"compass_angle", -90.0},
                                 {"image_url", m.url() + "/blob/" + hits[i]->id}});
      if (end < static_cast<int>(hits.size())) out["next_page_token"] = std::to_string(end);
      res.set_content(out.dump(), "application/json");
    });
    s.Get(R"(/blob/(.+))", [](const httplib::Request& req, httplib::Response& res) {
      res.set_content("bytes-of-" + req.matches[1].str(), "application/octet-stream");
    });
  }
};

HttpOptions fast() {
  HttpOptions o;
  o.timeout = std::chrono::milliseconds(2000);
  o.backoff_base = std::chrono::milliseconds(1);
  return o;
}

const BBox kBox{8.50, 47.30, 8.60, 47.40};
const TimeWindow kWindow{parse_rfc3339("2024-06-01T00:00:00Z"), parse_rfc3339("2024-07-01T00:00:00Z")};

// Independent distance: chord between unit vectors, then the arc.
double chord_distance_m(double lat1, double lon1, double lat2, double lon2) {
  const double d = M_PI / 180.0;
  auto v = [d](double lat, double lon) {
    return std::array<double, 3>{std::cos(lat * d) * std::cos(lon * d), std::cos(lat * d) * std::sin(lon * d),
                                 std::sin(lat * d)};
  };
  const auto a = v(lat1, lon1), b = v(lat2, lon2);
  const double c = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
  return 2.0 * 6371008.8 * std::asin(c / 2.0);
}

}  // namespace

TEST_CASE("street images: two in the bbox, one outside") {
  MockServer m;
  ImageApi api;
  api.images = {{"a1", 47.35, 8.55}, {"a2", 47.36, 8.56}, {"far", 48.0, 9.0}};
  api.install(m);
  m.start();
  const auto recs = fetch_street_images(m.url(), "secret", kBox, kWindow, fast());
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].image_id == "a1");
  CHECK(recs[0].latitude == 47.35);
  CHECK(recs[0].longitude == 8.55);
  CHECK(*recs[0].camera_heading == 270.0);
  CHECK(std::string(recs[1].image.begin(), recs[1].image.end()) == "bytes-of-a2");
}

TEST_CASE("street images: empty bbox is an empty list") {
  MockServer m;
  ImageApi api;
  api.images = {{"far", 48.0, 9.0}};
  api.install(m);
  m.start();
  CHECK(fetch_street_images(m.url(), "secret", kBox, kWindow, fast()).empty());
}

TEST_CASE("street images: pagination returns every record once") {
  MockServer m;
  ImageApi api;
  for (int i = 0; i < 7; ++i) api.images.push_back({"img" + std::to_string(i), 47.31 + 0.01 * i, 8.51});
  api.install(m);
  m.start();
  for (int page : {1, 2, 3, 100}) {
    auto o = fast();
    o.page_size = page;
    const auto recs = fetch_street_images(m.url(), "secret", kBox, kWindow, o);
    std::set<std::string> ids;
    for (const auto& r : recs) ids.insert(r.image_id);
    CHECK(recs.size() == 7);
    CHECK(ids.size() == 7);
  }
}

TEST_CASE("street images: duplicate ids across pages are dropped") {
  MockServer m;
  m.server().Get("/images", [&m](const httplib::Request& req, httplib::Response& res) {
    json item{{"id", 42},
              {"geometry", {{"coordinates", {8.55, 47.35}}}},
              {"captured_at", 1718971200000LL},
              {"image_url", m.url() + "/blob"}};
    json out{{"images", {item}}};
    if (!req.has_param("page_token")) out["next_page_token"] = "p2";
    res.set_content(out.dump(), "application/json");
  });
  m.server().Get("/blob", [](const httplib::Request&, httplib::Response& res) { res.set_content("x", "image/jpeg"); });
  m.start();
  const auto recs = fetch_street_images(m.url(), "secret", kBox, kWindow, fast());
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].image_id == "42");
  CHECK(format_rfc3339(recs[0].captured_at) == "2024-06-21T12:00:00Z");
  CHECK_FALSE(recs[0].camera_heading.has_value());
}

TEST_CASE("street images: 401 surfaces without retry") {
  MockServer m;
  ImageApi api;
  api.install(m);
  m.start();
  CHECK_THROWS_AS(fetch_street_images(m.url(), "wrong", kBox, kWindow, fast()), AuthError);
  CHECK(api.list_calls == 1);
  CHECK_THROWS_AS(fetch_street_images(m.url(), "", kBox, kWindow, fast()), AuthError);
}

TEST_CASE("street images: transient 5xx is retried") {
  MockServer m;
  std::atomic<int> calls{0};
  m.server().Get("/images", [&calls](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"images": []})", "application/json");
  });
  m.start();
  CHECK(fetch_street_images(m.url(), "t", kBox, kWindow, fast()).empty());
  CHECK(calls == 3);

  calls = -10;  // never recovers within 3 attempts
  CHECK_THROWS_AS(fetch_street_images(m.url(), "t", kBox, kWindow, fast()), ServiceError);
  CHECK(calls == -7);
}

TEST_CASE("street images: malformed body is a protocol error with an excerpt") {
  MockServer m;
  m.server().Get("/images", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("<html>upstream exploded</html>", "text/html");
  });
  m.server().Get("/v2/images", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"images": [{"id": "x", "geometry": {"coordinates": [200, 10]}}]})", "application/json");
  });
  m.start();
  try {
    fetch_street_images(m.url(), "t", kBox, kWindow, fast());
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    CHECK(std::string(e.what()).find("upstream exploded") != std::string::npos);
  }
  CHECK_THROWS_AS(fetch_street_images(m.url() + "/v2", "t", kBox, kWindow, fast()), ProtocolError);
}

TEST_CASE("street images: invalid requests") {
  CHECK_THROWS_AS(fetch_street_images("http://127.0.0.1:9", "t", BBox{1, 1, 0, 2}, kWindow, fast()),
                  ValidationError);
  auto o = fast();
  o.max_attempts = 1;
  o.timeout = std::chrono::milliseconds(300);
  CHECK_THROWS_AS(fetch_street_images("http://127.0.0.1:9", "t", kBox, kWindow, o), TransportError);
}

namespace {

void serve_observations(MockServer& m, json observations) {
  m.server().Get("/observations", [observations](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"observations", observations}}.dump(), "application/json");
  });
}

}  // namespace

TEST_CASE("weather: matching hour returns the station's values") {
  MockServer m;
  serve_observations(m, json::array({{{"station_id", "ZRH"},
                                      {"latitude", 47.38},
                                      {"longitude", 8.54},
                                      {"time", "2024-06-21T12:00:00Z"},
                                      {"i_radiation", 650.0},
                                      {"t_air", 22.5}}}));
  m.start();
  const auto w = fetch_weather(m.url(), 47.37, 8.55, parse_rfc3339("2024-06-21T12:20:00Z"), fast());
  CHECK(w.i_radiation == 650.0);
  CHECK(w.t_air == 22.5);
  CHECK(w.station_id == "ZRH");
  CHECK_THROWS_AS(fetch_weather(m.url(), 47.37, 8.55, parse_rfc3339("2024-06-21T13:30:00Z"), fast()), DataGapError);
  CHECK_THROWS_AS(fetch_weather(m.url(), 95.0, 8.55, parse_rfc3339("2024-06-21T12:00:00Z"), fast()),
                  ValidationError);
}

TEST_CASE("weather: the nearer station wins") {
  const auto t = parse_rfc3339("2024-06-21T12:00:00Z");
  std::vector<StationObservation> obs{{"FAR", 47.50, 8.70, t, 100.0, 10.0}, {"NEAR", 47.371, 8.551, t, 700.0, 25.0}};
  const auto w = select_observation(obs, 47.37, 8.55, t);
  CHECK(w.station_id == "NEAR");
  CHECK(chord_distance_m(47.37, 8.55, 47.371, 8.551) < chord_distance_m(47.37, 8.55, 47.50, 8.70));

  // same station, two timestamps: the closer in time
  std::vector<StationObservation> two{{"S", 47.37, 8.55, t, 1.0, 1.0},
                                      {"S", 47.37, 8.55, t + std::chrono::minutes(20), 2.0, 2.0}};
  CHECK(select_observation(two, 47.37, 8.55, t + std::chrono::minutes(15)).i_radiation == 2.0);
  CHECK_THROWS_AS(select_observation({}, 0, 0, t), DataGapError);
}

TEST_CASE("inventory csv: rows, normalization, partial failure") {
  const std::string good =
      "tree_id,latitude,longitude,genus,species\n"
      "t1,47.1,8.1,ACER,platanoides\n"
      "t2,47.2,8.2,quercus,\n"
      "t3,47.3,8.3,Tilia,cordata\n";
  auto r = parse_csv_inventory(good);
  REQUIRE(r.records.size() == 3);
  CHECK(r.errors.empty());
  CHECK(r.records[0].genus == "Acer");
  CHECK(r.records[1].genus == "Quercus");
  CHECK_FALSE(r.records[1].species.has_value());
  CHECK(*r.records[2].species == "cordata");

  const std::string bad =
      "tree_id,latitude,longitude,genus,species\n"
      "t1,47.1,8.1,Acer,\n"
      "t2,abc,8.2,Acer,\n"
      "t3,47.3,8.3,Acer,\n";
  r = parse_csv_inventory(bad);
  CHECK(r.records.size() == 2);
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].line == 3);
  CHECK(r.errors[0].message.find("abc") != std::string::npos);

  CHECK_THROWS_AS(parse_csv_inventory("tree_id,latitude,genus\nt1,1,Acer\n"), FormatError);
}

TEST_CASE("inventory csv: quoting, column order, CRLF, BOM") {
  const std::string text =
      "\xEF\xBB\xBFGenus,Tree_ID,longitude,latitude,species\r\n"
      "\"ulmus\",\"a,1\",8.5,47.5,\"glabra \"\"x\"\"\"\r\n"
      "acer,b2,8.6,47.6,\r\n";
  const auto r = parse_csv_inventory(text);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].tree_id == "a,1");
  CHECK(r.records[0].genus == "Ulmus");
  CHECK(*r.records[0].species == "glabra \"x\"");
  CHECK(r.records[1].latitude == 47.6);
}

TEST_CASE("inventory geojson and file loading") {
  const std::string gj = R"({"type": "FeatureCollection", "features": [
    {"type": "Feature", "geometry": {"type": "Point", "coordinates": [8.5, 47.5]},
     "properties": {"tree_id": "g1", "genus": "PLATANUS", "species": "x acerifolia"}},
    {"type": "Feature", "geometry": {"type": "Point", "coordinates": [8.5, 147.5]},
     "properties": {"tree_id": "g2", "genus": "Acer"}}]})";
  const auto r = parse_geojson_inventory(gj);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].latitude == 47.5);
  CHECK(r.records[0].genus == "Platanus");
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].line == 2);
  CHECK_THROWS_AS(parse_geojson_inventory(R"({"type": "Feature"})"), FormatError);

  canopyscan::testing::TempDir dir("inv");
  std::ofstream(dir / "t.csv") << "tree_id,latitude,longitude,genus,species\nq,1,2,tilia,\n";
  CHECK(load_tree_inventory(dir / "t.csv", InventoryFormat::csv).records.size() == 1);
  CHECK(inventory_format_from_string("geojson") == InventoryFormat::geojson);
  CHECK_THROWS(inventory_format_from_string("xml"));
}

TEST_CASE("haversine against an independent chord formula") {
  CHECK(haversine_m(47.0, 8.0, 47.0, 8.0) == 0.0);
  const double pts[][4] = {{47.37, 8.54, 47.38, 8.56}, {-33.9, 151.2, 40.7, -74.0}, {0, 0, 0, 90}, {10, 179.9, 10, -179.9}};
  for (const auto& p : pts) {
    const double h = haversine_m(p[0], p[1], p[2], p[3]);
    CHECK(h == doctest::Approx(chord_distance_m(p[0], p[1], p[2], p[3])).epsilon(1e-9));
    CHECK(h == haversine_m(p[2], p[3], p[0], p[1]));
  }
}

TEST_CASE("tree to image matching") {
  const double r = 6371008.8;
  const double dlat_8m = 8.0 / r * 180.0 / M_PI;
  auto image = [](std::string id, double lat, double lon) {
    StreetImageRecord s;
    s.image_id = std::move(id);
    s.latitude = lat;
    s.longitude = lon;
    return s;
  };
  std::vector<TreeRecord> trees{{"near", 47.0 + dlat_8m, 8.0, "Acer", {}}, {"far", 47.009, 8.0, "Acer", {}}};
  std::vector<StreetImageRecord> images{image("only", 47.0, 8.0)};
  auto m = match_trees_to_images(trees, images, 15.0);
  REQUIRE(m.assignments.size() == 1);
  CHECK(m.assignments[0].tree_id == "near");
  CHECK(m.assignments[0].image_id == "only");
  CHECK(m.assignments[0].distance_m == doctest::Approx(8.0).epsilon(1e-9));
  REQUIRE(m.unmatched.size() == 1);
  CHECK(m.unmatched[0] == "far");

  // equidistant north and south of the tree
  std::vector<TreeRecord> mid{{"m", 47.0, 8.0, "Acer", {}}};
  std::vector<StreetImageRecord> pair{image("zeta", 47.0 - dlat_8m, 8.0), image("alpha", 47.0 + dlat_8m, 8.0)};
  CHECK(haversine_m(47.0, 8.0, pair[0].latitude, 8.0) == haversine_m(47.0, 8.0, pair[1].latitude, 8.0));
  m = match_trees_to_images(mid, pair, 15.0);
  REQUIRE(m.assignments.size() == 1);
  CHECK(m.assignments[0].image_id == "alpha");
}
