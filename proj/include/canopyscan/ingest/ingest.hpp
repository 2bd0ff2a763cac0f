#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "canopyscan/common/time.hpp"
#include "canopyscan/data/image_io.hpp"
#include "canopyscan/solar/solar.hpp"

namespace canopyscan::ingest {

inline constexpr const char* kTokenEnvVar = "CANOPYSCAN_API_TOKEN";

/// Reads the API token from CANOPYSCAN_API_TOKEN; empty if unset.
std::string token_from_env();

struct BBox {
  double min_lon = 0.0, min_lat = 0.0, max_lon = 0.0, max_lat = 0.0;
  /// ValidationError unless min < max on both axes and coordinates are valid.
  void validate() const;
  bool contains(double latitude, double longitude) const;
};

struct TimeWindow {
  UtcTime start{};
  UtcTime end{};
};

struct HttpOptions {
  std::chrono::milliseconds timeout{30'000};
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{200};  // doubled after each failed attempt
  int per_host_limit = 4;
  int page_size = 0;  // 0 leaves it to the server
};

struct StreetImageRecord {
  std::string image_id;
  data::Bytes image;
  double latitude = 0.0;
  double longitude = 0.0;
  UtcTime captured_at{};
  std::optional<double> camera_heading;
  std::string image_url;
};

/// Mapillary-shaped street imagery API:
///   GET {base}/images?bbox=minlon,minlat,maxlon,maxlat&start=..&end=..[&limit=..][&page_token=..]
///   Authorization: Bearer <token>
///   -> {"images": [{"id", "geometry": {"coordinates": [lon, lat]}, "captured_at",
///                   "compass_angle", "image_url"}], "next_page_token": "..." | null}
/// Immutable after construction; safe to share between threads.
class StreetImageClient {
 public:
  StreetImageClient(std::string api_base_url, std::string token, HttpOptions options = {});
  /// All pages, deduplicated by image id (first occurrence wins), image bytes
  /// downloaded. AuthError on 401/403, ProtocolError on a malformed body,
  /// TransportError / ServiceError after retries are exhausted.
  std::vector<StreetImageRecord> fetch(const BBox& bbox, const TimeWindow& window) const;

 private:
  std::string base_;
  std::string token_;
  HttpOptions options_;
};

std::vector<StreetImageRecord> fetch_street_images(const std::string& api_base_url, const std::string& token,
                                                   const BBox& bbox, const TimeWindow& window,
                                                   const HttpOptions& options = {});

/// GET {base}/observations?lat=..&lon=..&time=..
///   -> {"observations": [{"station_id", "latitude", "longitude", "time", "i_radiation", "t_air"}]}
/// Picks the nearest station having an observation within +-1 h, then that
/// station's observation nearest in time. DataGapError if none qualifies.
class WeatherClient {
 public:
  explicit WeatherClient(std::string api_base_url, HttpOptions options = {});
  solar::WeatherObservation fetch(double latitude, double longitude, UtcTime time) const;

 private:
  std::string base_;
  HttpOptions options_;
};

solar::WeatherObservation fetch_weather(const std::string& api_base_url, double latitude, double longitude,
                                        UtcTime time, const HttpOptions& options = {});

struct StationObservation {
  std::string station_id;
  double latitude = 0.0;
  double longitude = 0.0;
  UtcTime time{};
  double i_radiation = 0.0;
  double t_air = 0.0;
};

/// The selection rule used by WeatherClient, on already-parsed observations.
solar::WeatherObservation select_observation(std::span<const StationObservation> observations, double latitude,
                                             double longitude, UtcTime time,
                                             std::chrono::minutes window = std::chrono::minutes{60});

// ---- inventory ----

struct TreeRecord {
  std::string tree_id;
  double latitude = 0.0;
  double longitude = 0.0;
  std::string genus;
  std::optional<std::string> species;
};

struct RowError {
  int line = 0;  // 1-based physical line (CSV) or feature number (GeoJSON)
  std::string message;
};

struct InventoryResult {
  std::vector<TreeRecord> records;
  std::vector<RowError> errors;
};

enum class InventoryFormat { csv, geojson };
InventoryFormat inventory_format_from_string(const std::string& s);

/// Header row required (columns in any order): tree_id, latitude, longitude,
/// genus, species. Bad rows are collected; a missing column is a FormatError.
InventoryResult parse_csv_inventory(const std::string& text);
InventoryResult parse_geojson_inventory(const std::string& text);
InventoryResult load_tree_inventory(const std::filesystem::path& path, InventoryFormat format);

/// "ACER" -> "Acer", "quercus RUBRA" -> "Quercus rubra".
std::string normalize_genus(const std::string& genus);

// ---- matching ----

/// Great-circle distance on a sphere of radius 6371008.8 m.
double haversine_m(double lat1, double lon1, double lat2, double lon2);

struct TreeImageAssignment {
  std::string tree_id;
  std::string image_id;
  double distance_m = 0.0;
};

struct MatchResult {
  std::vector<TreeImageAssignment> assignments;  // in tree order
  std::vector<std::string> unmatched;            // tree ids
};

/// Nearest image per tree within max_radius_m; ties go to the smaller image id.
MatchResult match_trees_to_images(std::span<const TreeRecord> trees, std::span<const StreetImageRecord> images,
                                  double max_radius_m);

}  // namespace canopyscan::ingest
