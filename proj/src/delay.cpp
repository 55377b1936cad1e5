#include "bustt/delay.hpp"

#include <algorithm>
#include <cmath>

#include "bustt/error.hpp"
#include "bustt/parallel.hpp"

namespace bustt {

bool VehicleSchedule::has_tight_connections(double min_expected_tt) const {
  for (std::size_t i = 1; i < trips.size(); ++i) {
    if (trips[i].planned_departure <
        trips[i - 1].planned_departure + min_expected_tt + trips[i].min_connection_before)
      return true;
  }
  return false;
}

namespace {

void check_schedule(const VehicleSchedule& schedule) {
  require(!schedule.trips.empty(), ErrorKind::invalid_argument, "empty schedule");
  require(schedule.planned_cost >= 0, ErrorKind::invalid_argument, "planned cost must be >= 0");
  require(schedule.delay_weight >= 0, ErrorKind::invalid_argument, "delay weight must be >= 0");
  for (std::size_t i = 1; i < schedule.trips.size(); ++i) {
    require(schedule.trips[i].planned_departure > schedule.trips[i - 1].planned_departure,
            ErrorKind::invalid_argument, "planned departures must increase");
    require(schedule.trips[i].min_connection_before >= 0, ErrorKind::invalid_argument,
            "minimum connection times must be >= 0");
  }
}

// The departure recursion shared by the realized and the Monte Carlo paths;
// writes the per-trip secondary delays.
void propagate(const VehicleSchedule& schedule, std::span<const double> tts,
               std::span<double> delays_out) {
  double prev_departure = schedule.trips[0].planned_departure;
  delays_out[0] = 0.0;
  for (std::size_t i = 1; i < schedule.trips.size(); ++i) {
    const double ready =
        prev_departure + tts[i - 1] + schedule.trips[i].min_connection_before;
    const double departure = std::max(ready, schedule.trips[i].planned_departure);
    delays_out[i] = departure - schedule.trips[i].planned_departure;
    prev_departure = departure;
  }
}

}  // namespace

RealizedTimes realized_departures(const VehicleSchedule& schedule,
                                  std::span<const double> realized_tts) {
  check_schedule(schedule);
  const std::size_t m = schedule.trips.size();
  require(realized_tts.size() == m - 1, ErrorKind::invalid_argument,
          "need one realized travel time per trip except the last");
  for (const double t : realized_tts)
    require(t > 0, ErrorKind::invalid_argument, "travel times must be positive");

  RealizedTimes out;
  out.secondary_delays.assign(m, 0.0);
  propagate(schedule, realized_tts, out.secondary_delays);
  out.departures.resize(m);
  out.arrivals.resize(m - 1);
  for (std::size_t i = 0; i < m; ++i)
    out.departures[i] = schedule.trips[i].planned_departure + out.secondary_delays[i];
  for (std::size_t i = 0; i + 1 < m; ++i)
    out.arrivals[i] = out.departures[i] + realized_tts[i];
  return out;
}

std::vector<double> realized_secondary_delays(const VehicleSchedule& schedule,
                                              std::span<const double> realized_tts) {
  return realized_departures(schedule, realized_tts).secondary_delays;
}

namespace {

void mc_replicates(const VehicleSchedule& schedule, std::span<const DensityModel> densities,
                   std::size_t n_samples, std::uint64_t seed, std::vector<double>& delays,
                   std::vector<std::uint64_t>& clamped, int jobs, bool serial) {
  check_schedule(schedule);
  const std::size_t m = schedule.trips.size();
  require(densities.size() == m - 1, ErrorKind::invalid_argument,
          "need one density per trip except the last");
  require(n_samples >= 1, ErrorKind::invalid_argument, "need at least one replicate");

  delays.assign(n_samples * m, 0.0);
  clamped.assign(n_samples, 0);
  const std::uint64_t mc_seed = derive_seed(seed, "mc-delay");

  const auto replicate = [&](std::size_t r) {
    Rng rng(derive_seed(mc_seed, static_cast<std::uint64_t>(r)));
    SampleStats stats;
    std::vector<double> tts(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) tts[i] = densities[i].sample(rng, &stats);
    propagate(schedule, tts, {delays.data() + r * m, m});
    clamped[r] = stats.clamped;
  };

  if (serial) {
    for_each_index_serial(n_samples, replicate);
  } else {
    for_each_index_omp(n_samples, jobs, replicate);
  }
}

}  // namespace

void mc_delay_replicates_serial(const VehicleSchedule& schedule,
                                std::span<const DensityModel> densities, std::size_t n_samples,
                                std::uint64_t seed, std::vector<double>& delays,
                                std::vector<std::uint64_t>& clamped) {
  mc_replicates(schedule, densities, n_samples, seed, delays, clamped, 1, true);
}

void mc_delay_replicates_omp(const VehicleSchedule& schedule,
                             std::span<const DensityModel> densities, std::size_t n_samples,
                             std::uint64_t seed, std::vector<double>& delays,
                             std::vector<std::uint64_t>& clamped, int jobs) {
  mc_replicates(schedule, densities, n_samples, seed, delays, clamped, jobs, false);
}

DelayProfile expected_secondary_delay_mc(const VehicleSchedule& schedule,
                                         std::span<const DensityModel> densities,
                                         std::size_t n_samples, std::uint64_t seed, int jobs) {
  std::vector<double> delays;
  std::vector<std::uint64_t> clamped;
  mc_replicates(schedule, densities, n_samples, seed, delays, clamped, jobs, jobs == 1);

  const std::size_t m = schedule.trips.size();
  DelayProfile profile;
  profile.samples = n_samples;
  profile.expected_delay.resize(m);
  profile.standard_error.resize(m);
  for (const std::uint64_t c : clamped) profile.clamped_draws += c;

  // Column-wise pairwise sums keep the reduction order fixed.
  std::vector<double> column(n_samples);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t r = 0; r < n_samples; ++r) column[r] = delays[r * m + i];
    const double mean = pairwise_sum(column) / static_cast<double>(n_samples);
    for (std::size_t r = 0; r < n_samples; ++r) {
      const double d = column[r] - mean;
      column[r] = d * d;
    }
    const double var = n_samples > 1
                           ? pairwise_sum(column) / static_cast<double>(n_samples - 1)
                           : 0.0;
    profile.expected_delay[i] = mean;
    profile.standard_error[i] = std::sqrt(var / static_cast<double>(n_samples));
  }
  profile.expected_delay[0] = 0.0;  // first trip departs as planned, exactly
  profile.standard_error[0] = 0.0;
  return profile;
}

double schedule_cost(const VehicleSchedule& schedule, const DelayProfile& profile) {
  require(profile.expected_delay.size() == schedule.trips.size(), ErrorKind::invalid_argument,
          "profile does not match the schedule");
  double total = 0;
  for (const double e : profile.expected_delay) total += e;
  return schedule.planned_cost + schedule.delay_weight * total;
}

double delay_mse(std::span<const double> predicted, std::span<const double> realized) {
  require(predicted.size() == realized.size() && !predicted.empty(), ErrorKind::invalid_argument,
          "prediction/realization mismatch");
  double sse = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = realized[i] - predicted[i];
    sse += d * d;
  }
  return sse / static_cast<double>(predicted.size());
}

VehicleSchedule schedule_from_json(const nlohmann::ordered_json& j) {
  VehicleSchedule s;
  for (const auto& tj : j.at("trips")) {
    ScheduledTrip t;
    t.trip_id = tj.at("trip_id");
    t.planned_departure = tj.at("d");
    t.min_connection_before = tj.value("l_prev", 0.0);
    s.trips.push_back(std::move(t));
  }
  s.planned_cost = j.value("q_s", 0.0);
  s.delay_weight = j.value("beta", 0.0);
  return s;
}

nlohmann::ordered_json schedule_to_json(const VehicleSchedule& schedule) {
  nlohmann::ordered_json trips = nlohmann::ordered_json::array();
  for (const ScheduledTrip& t : schedule.trips) {
    trips.push_back({{"trip_id", t.trip_id}, {"d", t.planned_departure},
                     {"l_prev", t.min_connection_before}});
  }
  return {{"trips", std::move(trips)}, {"q_s", schedule.planned_cost},
          {"beta", schedule.delay_weight}};
}

nlohmann::ordered_json profile_to_json(const VehicleSchedule& schedule,
                                       const DelayProfile& profile) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < profile.expected_delay.size(); ++i) {
    rows.push_back({{"trip_id", schedule.trips[i].trip_id},
                    {"expected_delay", profile.expected_delay[i]},
                    {"standard_error", profile.standard_error[i]}});
  }
  nlohmann::ordered_json j;
  j["trips"] = std::move(rows);
  j["samples"] = profile.samples;
  j["clamped_draws"] = profile.clamped_draws;
  j["schedule_cost"] = schedule_cost(schedule, profile);
  return j;
}

}  // namespace bustt
