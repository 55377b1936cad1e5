#include "bustt/csv.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "bustt/error.hpp"

namespace bustt {

namespace {

constexpr const char* kHeader =
    "trip_id,route_id,direction,date,day_of_week,week_number,sched_dep_ms,act_dep_ms,act_arr_ms,"
    "n_stops,distance_km,region_type";

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_service_minutes(double ms) { return ms / 60000.0 - kServiceClockOffsetMinutes; }

long long to_ms(double service_minutes) {
  return std::llround((service_minutes + kServiceClockOffsetMinutes) * 60000.0);
}

struct RowError {
  RejectReason reason;
  std::string detail;
};

TripRecord parse_row(const std::vector<std::string>& f, const IngestOptions& opts) {
  if (f.size() != 12) throw RowError{RejectReason::missing_field, "expected 12 fields"};
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i].empty()) throw RowError{RejectReason::missing_field, "empty field " + std::to_string(i)};
  }

  TripRecord t;
  t.trip_id = f[0];
  t.line = f[1];
  t.direction = f[2];
  if (opts.excluded_trip_ids.count(t.trip_id))
    throw RowError{RejectReason::excluded_trip, t.trip_id};

  try {
    t.date = parse_date(f[3]);
  } catch (const Error&) {
    throw RowError{RejectReason::bad_date, f[3]};
  }
  if (opts.holiday_dates.count(f[3])) throw RowError{RejectReason::holiday, f[3]};

  try {
    t.day_of_week = parse_weekday(f[4]);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::data) throw RowError{RejectReason::weekend, f[4]};
    throw RowError{RejectReason::bad_enum, f[4]};
  }

  const auto number = [](const std::string& s, const char* name) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw RowError{RejectReason::bad_number, std::string(name) + "='" + s + "'"};
    }
  };

  t.week_number = static_cast<int>(number(f[5], "week_number"));
  t.scheduled_departure = to_service_minutes(number(f[6], "sched_dep_ms"));
  t.actual_departure = to_service_minutes(number(f[7], "act_dep_ms"));
  t.actual_arrival = to_service_minutes(number(f[8], "act_arr_ms"));
  t.n_stops = static_cast<int>(number(f[9], "n_stops"));
  t.distance_km = number(f[10], "distance_km");

  try {
    t.region = parse_region(f[11]);
  } catch (const Error&) {
    throw RowError{RejectReason::bad_enum, f[11]};
  }

  if (t.scheduled_departure < 0 || t.scheduled_departure >= kServiceSpanMinutes)
    throw RowError{RejectReason::out_of_service_span, f[6]};
  if (t.actual_arrival <= t.actual_departure)
    throw RowError{RejectReason::arrival_not_after_departure,
                   "dep=" + f[7] + " arr=" + f[8]};
  t.travel_time = t.actual_arrival - t.actual_departure;
  if (t.n_stops < 1) throw RowError{RejectReason::bad_number, "n_stops=" + f[9]};
  if (t.distance_km <= 0) throw RowError{RejectReason::bad_number, "distance_km=" + f[10]};
  return t;
}

}  // namespace

const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::missing_field: return "MissingField";
    case RejectReason::bad_number: return "BadNumber";
    case RejectReason::bad_date: return "BadDate";
    case RejectReason::bad_enum: return "BadEnum";
    case RejectReason::weekend: return "Weekend";
    case RejectReason::holiday: return "Holiday";
    case RejectReason::excluded_trip: return "ExcludedTrip";
    case RejectReason::arrival_not_after_departure: return "ArrivalNotAfterDeparture";
    case RejectReason::out_of_service_span: return "OutOfServiceSpan";
  }
  return "Unknown";
}

IngestResult ingest_avl(std::istream& in, const IngestOptions& opts) {
  IngestResult result;
  std::string line;
  if (!std::getline(in, line)) throw_error(ErrorKind::data, "empty input stream");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader)
    throw_error(ErrorKind::data, "unexpected header row: '" + line + "'");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      result.trips.push_back(parse_row(split_line(line), opts));
    } catch (const RowError& e) {
      result.rejected.push_back({line_no, e.reason, e.detail});
    }
  }
  return result;
}

IngestResult ingest_avl_file(const std::string& path, const IngestOptions& opts) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorKind::data, "cannot open '" + path + "'");
  return ingest_avl(in, opts);
}

void write_trips_csv(std::ostream& out, const std::vector<TripRecord>& trips) {
  out << kHeader << "\n";
  for (const TripRecord& t : trips) {
    out << t.trip_id << ',' << t.line << ',' << t.direction << ',' << format_date(t.date) << ','
        << to_string(t.day_of_week) << ',' << t.week_number << ',' << to_ms(t.scheduled_departure)
        << ',' << to_ms(t.actual_departure) << ',' << to_ms(t.actual_arrival) << ',' << t.n_stops
        << ',' << t.distance_km << ',' << to_string(t.region) << "\n";
  }
}

void write_trips_csv_file(const std::string& path, const std::vector<TripRecord>& trips) {
  std::ofstream out(path);
  if (!out) throw_error(ErrorKind::data, "cannot write '" + path + "'");
  write_trips_csv(out, trips);
}

void write_rejections_csv(std::ostream& out, const std::vector<RejectedRow>& rows) {
  out << "line_no,reason,detail\n";
  for (const RejectedRow& r : rows) {
    out << r.line_no << ',' << to_string(r.reason) << ',' << r.detail << "\n";
  }
}

}  // namespace bustt
