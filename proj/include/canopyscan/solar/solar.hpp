#pragma once

#include <array>
#include <chrono>
#include <string>

#include "canopyscan/common/time.hpp"

namespace canopyscan::solar {

/// Azimuth in [0, 360) clockwise from north; elevation in [-90, 90], both in
/// degrees, elevation including atmospheric refraction.
struct SolarPosition {
  double azimuth = 0.0;
  double elevation = 0.0;
};

struct WeatherObservation {
  double i_radiation = 0.0;  // W/m^2
  double t_air = 0.0;        // deg C
  std::string station_id;
  UtcTime observed_at{};
};

/// Generator conditioning: incident radiation, sun angle, air temperature and
/// the tree's species (or genus) vocabulary index.
struct ConditioningVector {
  double i_radiation = 0.0;
  SolarPosition s_angle;
  double t_air = 0.0;
  int species_id = 0;
};

struct ConditioningRanges {
  double radiation_min = 0.0;
  double radiation_max = 1000.0;
  double elevation_min = -90.0;
  double elevation_max = 90.0;
  double t_air_min = -20.0;
  double t_air_max = 60.0;
};

/// Plausibility bounds applied when assembling a ConditioningVector.
struct SanityBounds {
  double t_air_min = -60.0;
  double t_air_max = 60.0;
};

inline constexpr std::size_t kConditioningFeatures = 5;
using ConditioningFeatures = std::array<double, kConditioningFeatures>;

/// NOAA solar position equations (Meeus-based, as in the NOAA solar
/// calculator). Refraction is applied for apparent elevations above -1 deg.
/// Throws ValidationError for |lat| > 90, |lon| > 180 or years outside 1950-2100.
SolarPosition solar_position(double latitude, double longitude, UtcTime time);

/// UTC instant of local solar noon (hour angle zero) on the given UTC date.
UtcTime solar_noon(double longitude, std::chrono::sys_days date);

ConditioningVector assemble_conditioning(const WeatherObservation& weather, const SolarPosition& sun,
                                         int species_id, const SanityBounds& bounds = {});

/// [radiation_n, sin(az), cos(az), elevation_n, t_air_n]; the scalar fields are
/// mapped affinely onto [-1, 1] and clamped at the range bounds.
ConditioningFeatures normalize_conditioning(const ConditioningVector& cond, const ConditioningRanges& ranges = {});

/// 2 (x - lo) / (hi - lo) - 1, clamped to [-1, 1].
double normalize_to_unit(double value, double lo, double hi);

}  // namespace canopyscan::solar
