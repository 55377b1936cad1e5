#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bustt/density.hpp"

#include "json.hpp"

namespace bustt {

struct ScheduledTrip {
  std::string trip_id;
  double planned_departure = 0;       // service-clock minutes
  double min_connection_before = 0;   // deadhead + minimum driver break from the previous trip
};

// Ordered trips of one vehicle. Planned departures must increase; a departure
// tighter than the minimum connection only warns (slack-free schedules are
// legal, just delay-prone).
struct VehicleSchedule {
  std::vector<ScheduledTrip> trips;
  double planned_cost = 0;   // q_s
  double delay_weight = 0;   // beta

  std::size_t size() const { return trips.size(); }
  bool has_tight_connections(double min_expected_tt) const;
};

struct RealizedTimes {
  std::vector<double> departures;        // size m
  std::vector<double> arrivals;          // size m-1 (last trip's TT is not needed)
  std::vector<double> secondary_delays;  // size m, first is exactly 0
};

// D_1 = d_1; D_i = max(D_{i-1} + t_{i-1} + l_{i-1,i}, d_i); A_i = D_i + t_i.
// Takes one realized TT per trip except the last (m-1 values).
RealizedTimes realized_departures(const VehicleSchedule& schedule,
                                  std::span<const double> realized_tts);

/// r_i = D_i - d_i; nonnegative by construction.
std::vector<double> realized_secondary_delays(const VehicleSchedule& schedule,
                                              std::span<const double> realized_tts);

struct DelayProfile {
  std::vector<double> expected_delay;  // E(R_i) per trip, first exactly 0
  std::vector<double> standard_error;
  std::size_t samples = 0;
  std::uint64_t clamped_draws = 0;
};

// Seeded Monte Carlo over independent TT draws. Replicates use RNG streams
// derived from the seed and a fixed pairwise-sum reduction, so results do not
// depend on the number of threads.
DelayProfile expected_secondary_delay_mc(const VehicleSchedule& schedule,
                                         std::span<const DensityModel> densities,  // m-1 models
                                         std::size_t n_samples, std::uint64_t seed,
                                         int jobs = 1);

// Replicate kernels (delay of every trip per replicate, row-major
// n_samples x m); serial reference and OpenMP version produce identical bytes.
void mc_delay_replicates_serial(const VehicleSchedule& schedule,
                                std::span<const DensityModel> densities, std::size_t n_samples,
                                std::uint64_t seed, std::vector<double>& delays,
                                std::vector<std::uint64_t>& clamped);
void mc_delay_replicates_omp(const VehicleSchedule& schedule,
                             std::span<const DensityModel> densities, std::size_t n_samples,
                             std::uint64_t seed, std::vector<double>& delays,
                             std::vector<std::uint64_t>& clamped, int jobs);

/// c_s = q_s + beta * sum_i E(R_i).
double schedule_cost(const VehicleSchedule& schedule, const DelayProfile& profile);

/// Mean squared error between realized and predicted secondary delays.
double delay_mse(std::span<const double> predicted, std::span<const double> realized);

VehicleSchedule schedule_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json schedule_to_json(const VehicleSchedule& schedule);
nlohmann::ordered_json profile_to_json(const VehicleSchedule& schedule, const DelayProfile& profile);

}  // namespace bustt
