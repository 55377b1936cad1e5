#include "bustt/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "bustt/error.hpp"

namespace bustt {

namespace {

// Five named periods over the service span [0, 1320), minutes since 04:00:
// 4:00-6:00, 6:00-9:00 (am peak), 9:00-14:00, 14:00-18:00 (pm peak), 18:00-26:00.
constexpr double kPeriodBounds[] = {0, 120, 300, 600, 840, 1320};

// Queries outside the training range clip to [0,1], like every min-max
// encoded feature.
double scaled(double v, double lo, double hi) {
  return hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.0;
}

}  // namespace

int DtwSpec::window_count() const {
  if (mode == DtwMode::five_periods) return 5;
  return static_cast<int>(kServiceSpanMinutes) / window_minutes;
}

int DtwSpec::window_index(double scheduled_departure) const {
  require(scheduled_departure >= 0 && scheduled_departure < kServiceSpanMinutes,
          ErrorKind::invalid_argument, "departure outside the service span");
  if (mode == DtwMode::five_periods) {
    for (int p = 1; p <= 5; ++p) {
      if (scheduled_departure < kPeriodBounds[p]) return p - 1;
    }
    return 4;
  }
  return static_cast<int>(scheduled_departure / window_minutes);
}

std::string DtwSpec::label() const {
  if (mode == DtwMode::five_periods) return "5p";
  return std::to_string(window_minutes) + "min";
}

double euclidean_distance(const FeatureVector& x, const FeatureVector& y) {
  require(x.schema_id == y.schema_id, ErrorKind::invalid_argument, "feature schema mismatch");
  require(x.values.size() == y.values.size(), ErrorKind::invalid_argument,
          "feature length mismatch");
  double s = 0;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    const double d = x.values[i] - y.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

KnnScaling fit_knn_scaling(std::span<const TripRecord> training) {
  require(!training.empty(), ErrorKind::data, "empty training set");
  KnnScaling s;
  s.dep_lo = s.dep_hi = training[0].scheduled_departure;
  s.week_lo = s.week_hi = training[0].week_number;
  for (const TripRecord& t : training) {
    s.dep_lo = std::min(s.dep_lo, t.scheduled_departure);
    s.dep_hi = std::max(s.dep_hi, t.scheduled_departure);
    s.week_lo = std::min(s.week_lo, static_cast<double>(t.week_number));
    s.week_hi = std::max(s.week_hi, static_cast<double>(t.week_number));
  }
  return s;
}

namespace {

double knn_distance(const TripRecord& a, const TripRecord& b, const KnnScaling& s) {
  const double dd = scaled(a.scheduled_departure, s.dep_lo, s.dep_hi) -
                    scaled(b.scheduled_departure, s.dep_lo, s.dep_hi);
  const double dw = scaled(a.week_number, s.week_lo, s.week_hi) -
                    scaled(b.week_number, s.week_lo, s.week_hi);
  return std::sqrt(dd * dd + dw * dw);
}

std::vector<TripRecord> edtw_from_pool(const TripRecord& query,
                                       const std::vector<TripRecord>& pool, const DtwSpec& spec) {
  const int window = spec.window_index(query.scheduled_departure);
  std::vector<TripRecord> out;
  for (const TripRecord& t : pool) {
    if (spec.window_index(t.scheduled_departure) == window) out.push_back(t);
  }
  if (out.empty())
    throw_error(ErrorKind::no_similar_trips,
                "no training trips for route " + query.route_id() + " in window " +
                    std::to_string(window) + " (" + spec.label() + ")");
  return out;
}

KnnSelection knn_from_pool(const TripRecord& query, const std::vector<TripRecord>& pool,
                           const KnnSpec& spec, const KnnScaling& scaling) {
  require(spec.k >= 1, ErrorKind::invalid_argument, "k must be >= 1");
  if (pool.empty())
    throw_error(ErrorKind::no_similar_trips, "no training trips for route " + query.route_id());

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) order[i] = i;
  std::vector<double> dist(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) dist[i] = knn_distance(query, pool[i], scaling);

  const auto rank = [&](std::size_t a, std::size_t b) {
    return std::make_tuple(dist[a], to_days(pool[a].date).time_since_epoch().count(),
                           pool[a].trip_id) <
           std::make_tuple(dist[b], to_days(pool[b].date).time_since_epoch().count(),
                           pool[b].trip_id);
  };

  KnnSelection sel;
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(spec.k), pool.size());
  sel.short_sample = take < static_cast<std::size_t>(spec.k);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    rank);
  sel.trips.reserve(take);
  for (std::size_t i = 0; i < take; ++i) sel.trips.push_back(pool[order[i]]);
  return sel;
}

}  // namespace

std::vector<TripRecord> select_edtw(const TripRecord& query, std::span<const TripRecord> training,
                                    const DtwSpec& spec) {
  std::vector<TripRecord> pool;
  for (const TripRecord& t : training) {
    if (t.route_id() == query.route_id()) pool.push_back(t);
  }
  if (pool.empty())
    throw_error(ErrorKind::no_similar_trips, "route " + query.route_id() + " not in training");
  return edtw_from_pool(query, pool, spec);
}

KnnSelection select_knn(const TripRecord& query, std::span<const TripRecord> training,
                        const KnnSpec& spec, const KnnScaling& scaling) {
  std::vector<TripRecord> pool;
  for (const TripRecord& t : training) {
    if (t.route_id() == query.route_id()) pool.push_back(t);
  }
  return knn_from_pool(query, pool, spec, scaling);
}

TrainingIndex::TrainingIndex(std::vector<TripRecord> training) {
  require(!training.empty(), ErrorKind::data, "empty training set");
  scaling_ = fit_knn_scaling(training);
  size_ = training.size();
  for (TripRecord& t : training) by_route_[t.route_id()].push_back(std::move(t));
  for (auto& [route, pool] : by_route_) {
    std::sort(pool.begin(), pool.end(), [](const TripRecord& a, const TripRecord& b) {
      return std::make_tuple(a.scheduled_departure, to_days(a.date).time_since_epoch().count(),
                             a.trip_id) <
             std::make_tuple(b.scheduled_departure, to_days(b.date).time_since_epoch().count(),
                             b.trip_id);
    });
  }
}

bool TrainingIndex::has_route(const std::string& route_id) const {
  return by_route_.count(route_id) > 0;
}

const std::vector<TripRecord>& TrainingIndex::route_pool(const std::string& route_id) const {
  const auto it = by_route_.find(route_id);
  if (it == by_route_.end())
    throw_error(ErrorKind::no_similar_trips, "route " + route_id + " not in training");
  return it->second;
}

std::vector<TripRecord> TrainingIndex::select_edtw(const TripRecord& query,
                                                   const DtwSpec& spec) const {
  return edtw_from_pool(query, route_pool(query.route_id()), spec);
}

KnnSelection TrainingIndex::select_knn(const TripRecord& query, const KnnSpec& spec) const {
  return knn_from_pool(query, route_pool(query.route_id()), spec, scaling_);
}

}  // namespace bustt
