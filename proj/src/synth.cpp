#include "bustt/synth.hpp"

#include <algorithm>
#include <cmath>

#include "bustt/error.hpp"

namespace bustt {

namespace {

constexpr double kMorningPeakCenter = 210.0;    // 07:30 on the service clock
constexpr double kAfternoonPeakCenter = 720.0;  // 16:00

double bump(double x, double center, double width) {
  const double z = (x - center) / width;
  return std::exp(-0.5 * z * z);
}

// Conditional TT law used by both the sampler and the oracle. The two share
// one construction so the oracle is exact by definition.
DensityModel conditional_law(const RouteLaw& route, double departure, int week_index) {
  const double mean = route.mean_tt(departure, week_index);
  const double scale = route.noise_scale(departure);
  require(scale >= 0, ErrorKind::invalid_argument, "noise scale must be >= 0");
  require(mean > 0, ErrorKind::invalid_argument, "mean travel time must be positive");

  switch (route.noise_family) {
    case Family::normal:
      return DensityModel(Parametric{Family::normal, mean, std::max(scale * scale, kVarianceFloor)});
    case Family::logistic:
      return DensityModel(
          Parametric{Family::logistic, mean, std::max(scale * std::sqrt(3.0) / 3.14159265358979, 1e-2)});
    case Family::cauchy:
      return DensityModel(Parametric{Family::cauchy, mean, std::max(scale, 1e-2)});
    case Family::log_normal: {
      // Location chosen so the mean tracks the curve; relative spread scale/mean.
      const double s2 = std::log1p(scale * scale / (mean * mean));
      const double mu = std::log(mean) - 0.5 * s2;
      return DensityModel(Parametric{Family::log_normal, mu, std::max(s2, 1e-8)});
    }
    case Family::gamma: {
      const double shape = (mean * mean) / std::max(scale * scale, kVarianceFloor);
      return DensityModel(Parametric{Family::gamma, shape, mean / shape});
    }
    case Family::log_logistic: {
      const double beta = std::max(mean / std::max(scale, 1e-6), 2.0);
      return DensityModel(Parametric{Family::log_logistic, mean, beta});
    }
  }
  throw_error(ErrorKind::invalid_argument, "unreachable noise family");
}

}  // namespace

double RouteLaw::mean_tt(double scheduled_departure, int week_index) const {
  return base_tt + morning_bump * bump(scheduled_departure, kMorningPeakCenter, bump_width) +
         afternoon_bump * bump(scheduled_departure, kAfternoonPeakCenter, bump_width) +
         weekly_drift * static_cast<double>(week_index);
}

double RouteLaw::noise_scale(double scheduled_departure) const {
  const double peak_profile =
      std::max(bump(scheduled_departure, kMorningPeakCenter, bump_width),
               bump(scheduled_departure, kAfternoonPeakCenter, bump_width));
  return noise_scale_base + noise_scale_peak * peak_profile;
}

int week_index_of(const SynthConfig& config, const Date& date) {
  const int days = days_between(config.start_date, date);
  require(days >= 0 && days < config.weeks * 7, ErrorKind::invalid_argument,
          "date outside the configured span");
  return days / 7;
}

std::vector<TripRecord> generate(const SynthConfig& config, std::uint64_t seed) {
  require(weekday_index(config.start_date) == 0, ErrorKind::invalid_argument,
          "start date must be a Monday");
  require(config.weeks >= 1, ErrorKind::invalid_argument, "need at least one week");
  require(!config.routes.empty(), ErrorKind::invalid_argument, "no routes configured");

  std::vector<TripRecord> trips;
  for (std::size_t ri = 0; ri < config.routes.size(); ++ri) {
    const RouteLaw& route = config.routes[ri];
    require(route.trips_per_hour.size() == 22, ErrorKind::invalid_argument,
            "trips_per_hour needs 22 entries (service hours 4:00..25:59)");

    const std::uint64_t route_seed = derive_seed(derive_seed(seed, "synth"), ri);

    // Fixed weekday timetable for the integer part of each hourly count, with
    // a per-(route,hour) phase. A fractional part adds one extra recorded
    // trip on a seeded subset of days (sparse hours).
    std::vector<double> timetable;
    std::vector<std::pair<double, double>> extras;  // (probability, minute within the day)
    Rng phase_rng(derive_seed(route_seed, "timetable"));
    for (int hour = 0; hour < 22; ++hour) {
      const double f = route.trips_per_hour[static_cast<std::size_t>(hour)];
      require(f >= 0, ErrorKind::invalid_argument, "trip frequencies must be >= 0");
      const int count = static_cast<int>(f);
      const double frac = f - count;
      const double phase = phase_rng.uniform();
      if (count > 0) {
        const double spacing = 60.0 / count;
        for (int k = 0; k < count; ++k) {
          timetable.push_back(hour * 60.0 + spacing * (static_cast<double>(k) + phase));
        }
      }
      if (frac > 0) {
        extras.emplace_back(frac, hour * 60.0 + 60.0 * phase_rng.uniform());
      }
    }

    Rng draw_rng(derive_seed(route_seed, "draws"));
    Rng extra_rng(derive_seed(route_seed, "extras"));
    int seq = 0;
    for (int week = 0; week < config.weeks; ++week) {
      for (int day = 0; day < 5; ++day) {
        const Date date = add_days(config.start_date, week * 7 + day);
        std::vector<double> departures = timetable;
        for (const auto& [prob, minute] : extras) {
          if (extra_rng.uniform() < prob) departures.push_back(minute);
        }
        std::sort(departures.begin(), departures.end());
        for (const double dep : departures) {
          TripRecord t;
          t.trip_id = route.route_id() + "-" + format_date(date) + "-" +
                      std::to_string(seq++);
          t.line = route.line;
          t.direction = route.direction;
          t.date = date;
          t.day_of_week = static_cast<Weekday>(day);
          t.week_number = iso_week(date);
          t.scheduled_departure = dep;
          t.n_stops = route.n_stops;
          t.distance_km = route.distance_km;
          t.region = route.region;

          double tt;
          if (route.noise_scale(dep) == 0.0) {
            tt = route.mean_tt(dep, week);  // deterministic limit
          } else {
            const DensityModel law = conditional_law(route, dep, week);
            tt = law.sample(draw_rng);  // clamps keep generated TTs positive
          }
          t.travel_time = tt;
          t.actual_departure = dep;
          t.actual_arrival = dep + tt;
          trips.push_back(std::move(t));
        }
      }
    }
  }
  return trips;
}

DensityModel oracle_density(const SynthConfig& config, const TripRecord& trip) {
  for (const RouteLaw& route : config.routes) {
    if (route.route_id() != trip.route_id()) continue;
    return conditional_law(route, trip.scheduled_departure,
                           week_index_of(config, trip.date));
  }
  throw_error(ErrorKind::invalid_argument, "trip route not in the generator config");
}

SynthConfig synth_config_from_json(const nlohmann::ordered_json& j) {
  SynthConfig config;
  config.start_date = parse_date(j.at("start_date"));
  config.weeks = j.at("weeks");
  for (const auto& rj : j.at("routes")) {
    RouteLaw r;
    r.line = rj.at("line");
    r.direction = rj.value("direction", "East");
    r.n_stops = rj.value("n_stops", 30);
    r.distance_km = rj.value("distance_km", 8.0);
    r.region = parse_region(rj.value("region", "residential"));
    r.base_tt = rj.value("base_tt", 30.0);
    r.morning_bump = rj.value("morning_bump", 5.0);
    r.afternoon_bump = rj.value("afternoon_bump", 7.0);
    r.bump_width = rj.value("bump_width", 75.0);
    r.noise_family = parse_family(rj.value("noise_family", "normal"));
    r.noise_scale_base = rj.value("noise_scale_base", 2.0);
    r.noise_scale_peak = rj.value("noise_scale_peak", 0.0);
    r.weekly_drift = rj.value("weekly_drift", 0.0);
    r.trips_per_hour = rj.at("trips_per_hour").get<std::vector<double>>();
    config.routes.push_back(std::move(r));
  }
  return config;
}

nlohmann::ordered_json synth_config_to_json(const SynthConfig& config) {
  nlohmann::ordered_json routes = nlohmann::ordered_json::array();
  for (const RouteLaw& r : config.routes) {
    routes.push_back({{"line", r.line},
                      {"direction", r.direction},
                      {"n_stops", r.n_stops},
                      {"distance_km", r.distance_km},
                      {"region", to_string(r.region)},
                      {"base_tt", r.base_tt},
                      {"morning_bump", r.morning_bump},
                      {"afternoon_bump", r.afternoon_bump},
                      {"bump_width", r.bump_width},
                      {"noise_family", to_string(r.noise_family)},
                      {"noise_scale_base", r.noise_scale_base},
                      {"noise_scale_peak", r.noise_scale_peak},
                      {"weekly_drift", r.weekly_drift},
                      {"trips_per_hour", r.trips_per_hour}});
  }
  return {{"start_date", format_date(config.start_date)},
          {"weeks", config.weeks},
          {"routes", std::move(routes)}};
}

}  // namespace bustt
