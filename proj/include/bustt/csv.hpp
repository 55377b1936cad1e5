#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "bustt/trip.hpp"

namespace bustt {

// Raw feed rows: comma-separated, header
//   trip_id,route_id,direction,date,day_of_week,week_number,
//   sched_dep_ms,act_dep_ms,act_arr_ms,n_stops,distance_km,region_type
// with the three timestamps in milliseconds since midnight of the service day.

enum class RejectReason {
  missing_field,
  bad_number,
  bad_date,
  bad_enum,
  weekend,
  holiday,
  excluded_trip,
  arrival_not_after_departure,
  out_of_service_span,
};

const char* to_string(RejectReason r);

struct RejectedRow {
  std::size_t line_no = 0;
  RejectReason reason = RejectReason::missing_field;
  std::string detail;
};

struct IngestOptions {
  std::set<std::string> holiday_dates;      // ISO dates to drop
  std::set<std::string> excluded_trip_ids;  // vias / detours, supplied externally
};

struct IngestResult {
  std::vector<TripRecord> trips;
  std::vector<RejectedRow> rejected;
};

/// Parses a raw feed; malformed rows are rejected individually, never abort the run.
IngestResult ingest_avl(std::istream& in, const IngestOptions& opts = {});
IngestResult ingest_avl_file(const std::string& path, const IngestOptions& opts = {});

/// Serializes trips back to the feed format (round-trips through ingest_avl).
void write_trips_csv(std::ostream& out, const std::vector<TripRecord>& trips);
void write_trips_csv_file(const std::string& path, const std::vector<TripRecord>& trips);

void write_rejections_csv(std::ostream& out, const std::vector<RejectedRow>& rows);

}  // namespace bustt
