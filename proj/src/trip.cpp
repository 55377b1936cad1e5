#include "bustt/trip.hpp"

#include <array>
#include <cstring>

#include "bustt/error.hpp"

namespace bustt {

namespace {

constexpr std::array<const char*, 5> kWeekdayNames = {"Mon", "Tue", "Wed", "Thu", "Fri"};
constexpr std::array<const char*, 5> kWeekdayLong = {"Monday", "Tuesday", "Wednesday", "Thursday",
                                                     "Friday"};
constexpr std::array<const char*, 6> kRegionNames = {"residential", "cross_cc",   "from_cc",
                                                     "to_cc",       "from_indust", "to_indust"};

void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void hash_string(std::uint64_t& h, const std::string& s) {
  hash_bytes(h, s.data(), s.size());
  hash_bytes(h, "\x1f", 1);
}

void hash_double(std::uint64_t& h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  hash_bytes(h, &bits, sizeof(bits));
}

}  // namespace

const char* to_string(Weekday d) { return kWeekdayNames[static_cast<std::size_t>(d)]; }
const char* to_string(Region r) { return kRegionNames[static_cast<std::size_t>(r)]; }

Weekday parse_weekday(const std::string& s) {
  for (std::size_t i = 0; i < kWeekdayNames.size(); ++i) {
    if (s == kWeekdayNames[i] || s == kWeekdayLong[i]) return static_cast<Weekday>(i);
  }
  if (s == "Sat" || s == "Saturday" || s == "Sun" || s == "Sunday")
    throw_error(ErrorKind::data, "weekend day: '" + s + "'");
  throw_error(ErrorKind::invalid_argument, "unknown weekday: '" + s + "'");
}

Region parse_region(const std::string& s) {
  for (std::size_t i = 0; i < kRegionNames.size(); ++i) {
    if (s == kRegionNames[i]) return static_cast<Region>(i);
  }
  throw_error(ErrorKind::invalid_argument, "unknown region type: '" + s + "'");
}

bool satisfies_invariants(const TripRecord& t) {
  return t.travel_time > 0 && t.actual_arrival > t.actual_departure &&
         t.scheduled_departure >= 0 && t.scheduled_departure < kServiceSpanMinutes &&
         t.n_stops >= 1 && t.distance_km > 0;
}

std::uint64_t fingerprint(const std::vector<TripRecord>& trips) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const TripRecord& t : trips) {
    hash_string(h, t.trip_id);
    hash_string(h, t.line);
    hash_string(h, t.direction);
    hash_string(h, format_date(t.date));
    hash_bytes(h, &t.day_of_week, sizeof(t.day_of_week));
    hash_bytes(h, &t.week_number, sizeof(t.week_number));
    hash_double(h, t.scheduled_departure);
    hash_double(h, t.actual_departure);
    hash_double(h, t.actual_arrival);
    hash_double(h, t.travel_time);
    hash_bytes(h, &t.n_stops, sizeof(t.n_stops));
    hash_double(h, t.distance_km);
    hash_bytes(h, &t.region, sizeof(t.region));
  }
  return h;
}

}  // namespace bustt
