#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bustt/dates.hpp"

namespace bustt {

// Service-day clock: minutes since 04:00. The observed network runs from
// 04:00 to 25:59, i.e. [0, 1320) on this clock; trips after midnight stay
// attached to the previous service day.
constexpr double kServiceSpanMinutes = 1320.0;
constexpr double kServiceClockOffsetMinutes = 240.0;  // 04:00 from midnight

enum class Weekday : std::uint8_t { mon = 0, tue, wed, thu, fri };

enum class Region : std::uint8_t {
  residential = 0,
  cross_cc,
  from_cc,
  to_cc,
  from_indust,
  to_indust,
};

const char* to_string(Weekday d);
const char* to_string(Region r);
Weekday parse_weekday(const std::string& s);  // accepts "Mon" or "Monday"
Region parse_region(const std::string& s);

/// One observed terminal-to-terminal trip.
struct TripRecord {
  std::string trip_id;
  std::string line;       // "A"
  std::string direction;  // "East"
  Date date{};
  Weekday day_of_week = Weekday::mon;
  int week_number = 0;
  double scheduled_departure = 0;  // service-clock minutes, [0, 1320)
  double actual_departure = 0;     // service-clock minutes
  double actual_arrival = 0;       // service-clock minutes
  double travel_time = 0;          // minutes, actual_arrival - actual_departure
  int n_stops = 1;
  double distance_km = 0;
  Region region = Region::residential;

  std::string route_id() const { return line + "-" + direction; }
};

bool satisfies_invariants(const TripRecord& t);

/// Stable 64-bit digest of a trip list (canonical field serialization, order-sensitive).
std::uint64_t fingerprint(const std::vector<TripRecord>& trips);

}  // namespace bustt
