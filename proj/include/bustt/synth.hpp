#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bustt/density.hpp"
#include "bustt/trip.hpp"

#include "json.hpp"

namespace bustt {

// One synthetic route: a smooth mean travel-time curve over the service day
// (flat base plus morning and afternoon peak bumps, the afternoon one taller),
// a noise family whose scale follows the peaks (heteroscedastic by default),
// a weekly drift, and a fixed weekday timetable given by per-hour trip counts.
struct RouteLaw {
  std::string line;
  std::string direction = "East";
  int n_stops = 30;
  double distance_km = 8.0;
  Region region = Region::residential;

  double base_tt = 30.0;          // minutes
  double morning_bump = 5.0;      // peak centered 07:30
  double afternoon_bump = 7.0;    // peak centered 16:00, usually taller
  double bump_width = 75.0;       // gaussian bump sd, minutes
  Family noise_family = Family::normal;
  double noise_scale_base = 2.0;
  double noise_scale_peak = 0.0;  // extra scale at the peaks
  double weekly_drift = 0.0;      // minutes added per elapsed week
  std::vector<double> trips_per_hour = std::vector<double>(22, 1.0);

  std::string route_id() const { return line + "-" + direction; }
  double mean_tt(double scheduled_departure, int week_index) const;
  double noise_scale(double scheduled_departure) const;
};

struct SynthConfig {
  Date start_date{};  // must be a Monday
  int weeks = 6;
  std::vector<RouteLaw> routes;
};

SynthConfig synth_config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json synth_config_to_json(const SynthConfig& config);

/// Weekday trips over the configured span; deterministic per (config, seed).
std::vector<TripRecord> generate(const SynthConfig& config, std::uint64_t seed);

/// The exact conditional density the generator used for this trip's TT.
/// Throws when the trip's route is not part of the config.
DensityModel oracle_density(const SynthConfig& config, const TripRecord& trip);

/// Elapsed whole weeks between the config start and the trip date.
int week_index_of(const SynthConfig& config, const Date& date);

}  // namespace bustt
