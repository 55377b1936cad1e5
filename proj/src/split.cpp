#include "bustt/split.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "bustt/error.hpp"

namespace bustt {

namespace {

bool recording_order(const TripRecord& a, const TripRecord& b) {
  return std::make_tuple(to_days(a.date).time_since_epoch().count(), a.actual_departure,
                         a.trip_id) < std::make_tuple(to_days(b.date).time_since_epoch().count(),
                                                      b.actual_departure, b.trip_id);
}

}  // namespace

std::vector<TripRecord> DatasetSplit::full_training() const {
  std::vector<TripRecord> all = reduced_training;
  all.insert(all.end(), validation.begin(), validation.end());
  std::sort(all.begin(), all.end(), recording_order);
  return all;
}

DatasetSplit chronological_split(const std::vector<TripRecord>& trips, const SplitConfig& config) {
  require(to_days(config.test_end) >= to_days(config.test_start), ErrorKind::data,
          "empty test window");
  require(days_between(config.training_end, config.test_start) > config.gap_days, ErrorKind::data,
          "test window must start strictly after the " + std::to_string(config.gap_days) +
              "-day gap following training");
  require(config.validation_fraction >= 0 && config.validation_fraction < 1,
          ErrorKind::invalid_argument, "validation fraction must be in [0,1)");

  DatasetSplit split;
  split.config = config;

  std::map<std::string, std::vector<TripRecord>> training_by_route;
  std::map<std::string, std::vector<TripRecord>> test_by_route;

  for (const TripRecord& t : trips) {
    const auto day = to_days(t.date);
    const bool after_start =
        !config.training_start || day >= to_days(*config.training_start);
    if (after_start && day <= to_days(config.training_end)) {
      training_by_route[t.route_id()].push_back(t);
    } else if (day >= to_days(config.test_start) && day <= to_days(config.test_end)) {
      test_by_route[t.route_id()].push_back(t);
    }
    // Anything else (in particular the gap week) is dropped.
  }

  for (auto& [route, group] : training_by_route) {
    std::sort(group.begin(), group.end(), recording_order);
    const std::size_t n = group.size();
    std::size_t n_val =
        static_cast<std::size_t>(static_cast<double>(n) * config.validation_fraction);
    if (n >= 5 && n_val == 0) n_val = 1;
    if (n_val == 0) split.routes_without_validation.push_back(route);
    const std::size_t n_train = n - n_val;
    for (std::size_t i = 0; i < n; ++i) {
      (i < n_train ? split.reduced_training : split.validation).push_back(group[i]);
    }
  }

  for (auto& [route, group] : test_by_route) {
    if (!training_by_route.count(route)) {
      split.test_only_routes.push_back(route);
    }
    std::sort(group.begin(), group.end(), recording_order);
    split.test.insert(split.test.end(), group.begin(), group.end());
  }

  return split;
}

}  // namespace bustt
