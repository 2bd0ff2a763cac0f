#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>

#include "canopyscan/common/errors.hpp"
#include "canopyscan/ingest/ingest.hpp"
#include "http.hpp"
#include "json.hpp"

namespace canopyscan::ingest {

using nlohmann::json;

std::string token_from_env() {
  const char* v = std::getenv(kTokenEnvVar);
  return v ? std::string(v) : std::string{};
}

void BBox::validate() const {
  auto lat_ok = [](double v) { return v >= -90.0 && v <= 90.0; };
  auto lon_ok = [](double v) { return v >= -180.0 && v <= 180.0; };
  if (!(lat_ok(min_lat) && lat_ok(max_lat) && lon_ok(min_lon) && lon_ok(max_lon)))
    throw ValidationError("bbox coordinates out of range");
  if (!(min_lon < max_lon && min_lat < max_lat)) throw ValidationError("bbox must have min < max on both axes");
}

bool BBox::contains(double latitude, double longitude) const {
  return latitude >= min_lat && latitude <= max_lat && longitude >= min_lon && longitude <= max_lon;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  return buf;
}

json parse_body(const std::string& body, const std::string& what) {
  try {
    return json::parse(body);
  } catch (const json::exception&) {
    throw ProtocolError(what + ": response is not JSON: " + detail::excerpt(body));
  }
}

bool valid_coords(double lat, double lon) { return std::abs(lat) <= 90.0 && std::abs(lon) <= 180.0; }

}  // namespace

StreetImageClient::StreetImageClient(std::string api_base_url, std::string token, HttpOptions options)
    : base_(std::move(api_base_url)), token_(std::move(token)), options_(options) {
  if (token_.empty()) throw AuthError(std::string("no API token; set ") + kTokenEnvVar);
  while (!base_.empty() && base_.back() == '/') base_.pop_back();
  detail::split_url(base_);
}

std::vector<StreetImageRecord> StreetImageClient::fetch(const BBox& bbox, const TimeWindow& window) const {
  bbox.validate();
  if (window.end < window.start) throw ValidationError("time window ends before it starts");

  std::vector<StreetImageRecord> out;
  std::set<std::string> seen;
  std::string page_token;
  for (int page = 0;; ++page) {
    if (page > 100'000) throw ProtocolError("pagination does not terminate");
    std::multimap<std::string, std::string> q{
        {"bbox", fmt(bbox.min_lon) + "," + fmt(bbox.min_lat) + "," + fmt(bbox.max_lon) + "," + fmt(bbox.max_lat)},
        {"start", format_rfc3339(window.start)},
        {"end", format_rfc3339(window.end)}};
    if (options_.page_size > 0) q.emplace("limit", std::to_string(options_.page_size));
    if (!page_token.empty()) q.emplace("page_token", page_token);
    const auto res = detail::get_with_retry(base_ + "/images", q, token_, options_);
    const json body = parse_body(res.body, "images");

    try {
      for (const auto& item : body.at("images")) {
        StreetImageRecord r;
        r.image_id = item.at("id").is_string() ? item.at("id").get<std::string>() : item.at("id").dump();
        const auto& coords = item.at("geometry").at("coordinates");
        r.longitude = coords.at(0).get<double>();
        r.latitude = coords.at(1).get<double>();
        if (!valid_coords(r.latitude, r.longitude))
          throw ProtocolError("image " + r.image_id + " has invalid coordinates: " + detail::excerpt(item.dump()));
        const auto& ts = item.at("captured_at");
        r.captured_at = ts.is_number() ? from_unix_millis(ts.get<long long>()) : parse_rfc3339(ts.get<std::string>());
        if (item.contains("compass_angle") && !item["compass_angle"].is_null()) {
          double h = std::fmod(item["compass_angle"].get<double>(), 360.0);
          r.camera_heading = h < 0 ? h + 360.0 : h;
        }
        r.image_url = item.at("image_url").get<std::string>();
        if (seen.insert(r.image_id).second) out.push_back(std::move(r));
      }
      page_token.clear();
      if (body.contains("next_page_token") && !body["next_page_token"].is_null())
        page_token = body["next_page_token"].get<std::string>();
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("images: unexpected payload (") + e.what() + "): " + detail::excerpt(res.body));
    } catch (const ValidationError& e) {
      throw ProtocolError(std::string("images: ") + e.what() + ": " + detail::excerpt(res.body));
    }
    if (page_token.empty()) break;
  }

  for (auto& r : out) {
    const auto img = detail::get_with_retry(r.image_url, {}, "", options_);
    r.image.assign(img.body.begin(), img.body.end());
  }
  return out;
}

std::vector<StreetImageRecord> fetch_street_images(const std::string& api_base_url, const std::string& token,
                                                   const BBox& bbox, const TimeWindow& window,
                                                   const HttpOptions& options) {
  return StreetImageClient(api_base_url, token, options).fetch(bbox, window);
}

WeatherClient::WeatherClient(std::string api_base_url, HttpOptions options)
    : base_(std::move(api_base_url)), options_(options) {
  while (!base_.empty() && base_.back() == '/') base_.pop_back();
  detail::split_url(base_);
}

solar::WeatherObservation select_observation(std::span<const StationObservation> observations, double latitude,
                                             double longitude, UtcTime time, std::chrono::minutes window) {
  const StationObservation* best = nullptr;
  double best_dist = 0.0;
  long long best_dt = 0;
  for (const auto& o : observations) {
    const long long dt = std::llabs(to_unix_millis(o.time) - to_unix_millis(time));
    if (dt > std::chrono::duration_cast<std::chrono::milliseconds>(window).count()) continue;
    const double dist = haversine_m(latitude, longitude, o.latitude, o.longitude);
    const bool better = !best || dist < best_dist || (dist == best_dist && dt < best_dt) ||
                        (dist == best_dist && dt == best_dt && o.station_id < best->station_id);
    if (better) best = &o, best_dist = dist, best_dt = dt;
  }
  if (!best)
    throw DataGapError("no weather observation within " + std::to_string(window.count()) + " min of " +
                       format_rfc3339(time));
  return {best->i_radiation, best->t_air, best->station_id, best->time};
}

solar::WeatherObservation WeatherClient::fetch(double latitude, double longitude, UtcTime time) const {
  if (!valid_coords(latitude, longitude)) throw ValidationError("weather request coordinates out of range");
  const auto res = detail::get_with_retry(
      base_ + "/observations", {{"lat", fmt(latitude)}, {"lon", fmt(longitude)}, {"time", format_rfc3339(time)}}, "",
      options_);
  const json body = parse_body(res.body, "observations");
  std::vector<StationObservation> obs;
  try {
    for (const auto& o : body.at("observations")) {
      StationObservation s;
      s.station_id = o.at("station_id").get<std::string>();
      s.latitude = o.at("latitude").get<double>();
      s.longitude = o.at("longitude").get<double>();
      s.time = parse_rfc3339(o.at("time").get<std::string>());
      s.i_radiation = o.at("i_radiation").get<double>();
      s.t_air = o.at("t_air").get<double>();
      obs.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("observations: unexpected payload (") + e.what() + "): " + detail::excerpt(res.body));
  } catch (const ValidationError& e) {
    throw ProtocolError(std::string("observations: ") + e.what());
  }
  return select_observation(obs, latitude, longitude, time);
}

solar::WeatherObservation fetch_weather(const std::string& api_base_url, double latitude, double longitude,
                                        UtcTime time, const HttpOptions& options) {
  return WeatherClient(api_base_url, options).fetch(latitude, longitude, time);
}

}  // namespace canopyscan::ingest
