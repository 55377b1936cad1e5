#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "bustt/features.hpp"
#include "bustt/trip.hpp"

namespace bustt {

enum class DtwMode { five_periods, minutes };

// Departure-time windows partitioning the [0, 1320) service span.
// The five named periods are: before morning peak [4:00,6:00), morning peak
// [6:00,9:00), midday [9:00,14:00), afternoon peak [14:00,18:00), evening
// [18:00,26:00).
struct DtwSpec {
  DtwMode mode = DtwMode::minutes;
  int window_minutes = 60;  // 30 or 60 as studied

  int window_count() const;
  int window_index(double scheduled_departure) const;
  std::string label() const;  // "5p", "60min", "30min"
};

struct KnnSpec {
  int k = 13;
};

/// Root of summed squared differences; requires matching schemas.
double euclidean_distance(const FeatureVector& x, const FeatureVector& y);

// Scaling ranges for the two kNN distance features (scheduled departure and
// week number), fitted on the training set so both enter the distance on
// comparable [0,1] scales.
struct KnnScaling {
  double dep_lo = 0, dep_hi = 1;
  double week_lo = 0, week_hi = 1;
};

struct KnnSelection {
  std::vector<TripRecord> trips;
  bool short_sample = false;  // route had fewer than k trips
};

/// Same-route trips whose scheduled departure shares the query's window.
/// Throws ErrorKind::no_similar_trips on an empty selection.
std::vector<TripRecord> select_edtw(const TripRecord& query,
                                    std::span<const TripRecord> training,
                                    const DtwSpec& spec);

/// The k same-route trips nearest in (scheduled departure, week number);
/// ties at the cut broken by earlier date then trip_id.
KnnSelection select_knn(const TripRecord& query, std::span<const TripRecord> training,
                        const KnnSpec& spec, const KnnScaling& scaling);

KnnScaling fit_knn_scaling(std::span<const TripRecord> training);

// Immutable per-route view over a training set; queries are read-only and
// safe to run concurrently.
class TrainingIndex {
public:
  explicit TrainingIndex(std::vector<TripRecord> training);

  const std::vector<TripRecord>& route_pool(const std::string& route_id) const;
  bool has_route(const std::string& route_id) const;

  std::vector<TripRecord> select_edtw(const TripRecord& query, const DtwSpec& spec) const;
  KnnSelection select_knn(const TripRecord& query, const KnnSpec& spec) const;

  const KnnScaling& scaling() const { return scaling_; }
  std::size_t size() const { return size_; }

private:
  std::map<std::string, std::vector<TripRecord>> by_route_;
  KnnScaling scaling_;
  std::size_t size_ = 0;
};

}  // namespace bustt
