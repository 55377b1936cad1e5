#pragma once

#include <string>
#include <vector>

#include "bustt/trip.hpp"

namespace bustt {

enum class RobustScale {
  mad_sigma,  // 1.4826 * median(|t - median|)
  stddev,     // plain standard deviation
};

struct MadFilterOptions {
  double multiplier = 6.0;
  RobustScale scale = RobustScale::mad_sigma;
  std::size_t min_group_size = 3;  // smaller route groups pass through unfiltered
};

struct MadFilterResult {
  std::vector<TripRecord> kept;
  std::vector<TripRecord> discarded;
  std::vector<std::string> unfiltered_routes;  // groups too small to filter
};

// Per-route outlier removal on travel time. A trip is discarded when
// |t - median| > multiplier * scale; a zero scale (all-identical sample)
// keeps the whole group.
MadFilterResult mad_filter(const std::vector<TripRecord>& trips,
                           const MadFilterOptions& opts = {});

double median(std::vector<double> values);

}  // namespace bustt
