#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bustt/trip.hpp"

namespace bustt {

struct SplitConfig {
  std::optional<Date> training_start;  // default: earliest trip date
  Date training_end{};
  int gap_days = 7;  // full week dropped between training and test
  Date test_start{};
  Date test_end{};
  double validation_fraction = 0.2;  // last recorded trips per route
};

struct DatasetSplit {
  std::vector<TripRecord> reduced_training;
  std::vector<TripRecord> validation;
  std::vector<TripRecord> test;
  std::vector<std::string> routes_without_validation;  // too few training trips
  std::vector<std::string> test_only_routes;           // absent from training, excluded from per-route models
  SplitConfig config;

  /// reduced_training + validation, in recording order.
  std::vector<TripRecord> full_training() const;
};

// Chronological split. Validation holds the last `validation_fraction` of
// trips recorded per route (rounded down, at least one when the route has
// >= 5 training trips); trips dated inside the gap appear nowhere. Recording
// order is (date, actual_departure, trip_id).
DatasetSplit chronological_split(const std::vector<TripRecord>& trips, const SplitConfig& config);

}  // namespace bustt
