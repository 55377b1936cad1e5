#include "bustt/filter.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "bustt/error.hpp"

namespace bustt {

namespace {

constexpr double kMadToSigma = 1.4826;  // consistency factor for normal data

double stddev(const std::vector<double>& values) {
  double mean = 0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

}  // namespace

double median(std::vector<double> values) {
  require(!values.empty(), ErrorKind::invalid_argument, "median of empty sample");
  const std::size_t n = values.size();
  std::sort(values.begin(), values.end());
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MadFilterResult mad_filter(const std::vector<TripRecord>& trips, const MadFilterOptions& opts) {
  require(opts.multiplier > 0, ErrorKind::invalid_argument, "multiplier must be positive");

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < trips.size(); ++i) groups[trips[i].route_id()].push_back(i);

  MadFilterResult result;
  std::vector<char> discard(trips.size(), 0);

  for (const auto& [route, idx] : groups) {
    if (idx.size() < opts.min_group_size) {
      result.unfiltered_routes.push_back(route);
      continue;
    }
    std::vector<double> tts;
    tts.reserve(idx.size());
    for (const std::size_t i : idx) tts.push_back(trips[i].travel_time);

    const double center = median(tts);
    double scale = 0;
    if (opts.scale == RobustScale::mad_sigma) {
      std::vector<double> dev;
      dev.reserve(tts.size());
      for (const double t : tts) dev.push_back(std::abs(t - center));
      scale = kMadToSigma * median(dev);
    } else {
      scale = stddev(tts);
    }
    if (scale == 0) continue;  // all-identical sample: keep everything

    const double cutoff = opts.multiplier * scale;
    for (const std::size_t i : idx) {
      if (std::abs(trips[i].travel_time - center) > cutoff) discard[i] = 1;
    }
  }

  for (std::size_t i = 0; i < trips.size(); ++i) {
    (discard[i] ? result.discarded : result.kept).push_back(trips[i]);
  }
  return result;
}

}  // namespace bustt
