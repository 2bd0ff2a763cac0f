#include "canopyscan/solar/solar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "canopyscan/common/errors.hpp"

namespace canopyscan::solar {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  if (r >= 360.0) r -= 360.0;
  return r;
}

struct SunGeometry {
  double declination;    // degrees
  double equation_of_time;  // minutes
};

double julian_day(UtcTime t) {
  return static_cast<double>(to_unix_millis(t)) / 86'400'000.0 + 2440587.5;
}

SunGeometry sun_geometry(double julian) {
  const double jc = (julian - 2451545.0) / 36525.0;
  const double mean_long = wrap360(280.46646 + jc * (36000.76983 + jc * 0.0003032));
  const double mean_anom = 357.52911 + jc * (35999.05029 - 0.0001537 * jc);
  const double ecc = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc);
  const double center = std::sin(mean_anom * kDeg) * (1.914602 - jc * (0.004817 + 0.000014 * jc)) +
                        std::sin(2.0 * mean_anom * kDeg) * (0.019993 - 0.000101 * jc) +
                        std::sin(3.0 * mean_anom * kDeg) * 0.000289;
  const double true_long = mean_long + center;
  const double omega = 125.04 - 1934.136 * jc;
  const double app_long = true_long - 0.00569 - 0.00478 * std::sin(omega * kDeg);
  const double mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0;
  const double obliq = mean_obliq + 0.00256 * std::cos(omega * kDeg);
  const double decl = std::asin(std::sin(obliq * kDeg) * std::sin(app_long * kDeg)) / kDeg;

  const double y = std::pow(std::tan(obliq * kDeg / 2.0), 2);
  const double l0 = mean_long * kDeg, m = mean_anom * kDeg;
  const double eot = 4.0 / kDeg *
                     (y * std::sin(2.0 * l0) - 2.0 * ecc * std::sin(m) + 4.0 * ecc * y * std::sin(m) * std::cos(2.0 * l0) -
                      0.5 * y * y * std::sin(4.0 * l0) - 1.25 * ecc * ecc * std::sin(2.0 * m));
  return {decl, eot};
}

double refraction_deg(double elevation) {
  if (elevation > 85.0 || elevation <= -1.0) return 0.0;
  const double te = std::tan(elevation * kDeg);
  double arcsec;
  if (elevation > 5.0)
    arcsec = 58.1 / te - 0.07 / (te * te * te) + 0.000086 / std::pow(te, 5);
  else if (elevation > -0.575)
    arcsec = 1735.0 + elevation * (-518.2 + elevation * (103.4 + elevation * (-12.79 + elevation * 0.711)));
  else
    arcsec = -20.772 / te;
  return arcsec / 3600.0;
}

void validate_site(double latitude, double longitude) {
  if (!(std::abs(latitude) <= 90.0)) throw ValidationError("latitude out of range: " + std::to_string(latitude));
  if (!(std::abs(longitude) <= 180.0)) throw ValidationError("longitude out of range: " + std::to_string(longitude));
}

}  // namespace

SolarPosition solar_position(double latitude, double longitude, UtcTime time) {
  validate_site(latitude, longitude);
  const auto ymd = std::chrono::year_month_day{std::chrono::floor<std::chrono::days>(time)};
  const int year = static_cast<int>(ymd.year());
  if (year < 1950 || year > 2100) throw ValidationError("time outside 1950-2100: " + format_rfc3339(time));

  const SunGeometry sun = sun_geometry(julian_day(time));
  const auto since_midnight = time - std::chrono::floor<std::chrono::days>(time);
  const double minutes = std::chrono::duration<double, std::ratio<60>>(since_midnight).count();
  double true_solar = std::fmod(minutes + sun.equation_of_time + 4.0 * longitude, 1440.0);
  if (true_solar < 0.0) true_solar += 1440.0;
  const double hour_angle = true_solar / 4.0 - 180.0;

  const double lat = latitude * kDeg, decl = sun.declination * kDeg, ha = hour_angle * kDeg;
  const double cos_zenith =
      std::clamp(std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(ha), -1.0, 1.0);
  const double zenith = std::acos(cos_zenith) / kDeg;
  const double geometric_elev = 90.0 - zenith;

  const double az =
      std::atan2(std::sin(ha), std::cos(ha) * std::sin(lat) - std::tan(decl) * std::cos(lat)) / kDeg + 180.0;

  SolarPosition pos;
  pos.azimuth = wrap360(az);
  pos.elevation = std::clamp(geometric_elev + refraction_deg(geometric_elev), -90.0, 90.0);
  return pos;
}

UtcTime solar_noon(double longitude, std::chrono::sys_days date) {
  validate_site(0.0, longitude);
  using namespace std::chrono;
  const UtcTime midnight = time_point_cast<milliseconds>(date);
  double noon_minutes = 720.0 - 4.0 * longitude;
  for (int iter = 0; iter < 3; ++iter) {
    const UtcTime guess = midnight + milliseconds{static_cast<long long>(std::llround(noon_minutes * 60'000.0))};
    noon_minutes = 720.0 - 4.0 * longitude - sun_geometry(julian_day(guess)).equation_of_time;
  }
  return midnight + milliseconds{static_cast<long long>(std::llround(noon_minutes * 60'000.0))};
}

ConditioningVector assemble_conditioning(const WeatherObservation& weather, const SolarPosition& sun,
                                         int species_id, const SanityBounds& bounds) {
  if (!(weather.i_radiation >= 0.0))
    throw ValidationError("radiation must be non-negative, got " + std::to_string(weather.i_radiation));
  if (!(weather.t_air >= bounds.t_air_min && weather.t_air <= bounds.t_air_max))
    throw ValidationError("air temperature outside sanity bounds: " + std::to_string(weather.t_air));
  if (species_id < 0) throw ValidationError("species id must be non-negative");
  if (!(sun.azimuth >= 0.0 && sun.azimuth < 360.0 && sun.elevation >= -90.0 && sun.elevation <= 90.0))
    throw ValidationError("solar position out of range");
  return {weather.i_radiation, sun, weather.t_air, species_id};
}

double normalize_to_unit(double value, double lo, double hi) {
  if (!(lo < hi)) throw ValidationError("normalization range requires min < max");
  return std::clamp(2.0 * (value - lo) / (hi - lo) - 1.0, -1.0, 1.0);
}

ConditioningFeatures normalize_conditioning(const ConditioningVector& cond, const ConditioningRanges& ranges) {
  const double az = cond.s_angle.azimuth * kDeg;
  return {normalize_to_unit(cond.i_radiation, ranges.radiation_min, ranges.radiation_max), std::sin(az),
          std::cos(az), normalize_to_unit(cond.s_angle.elevation, ranges.elevation_min, ranges.elevation_max),
          normalize_to_unit(cond.t_air, ranges.t_air_min, ranges.t_air_max)};
}

}  // namespace canopyscan::solar
