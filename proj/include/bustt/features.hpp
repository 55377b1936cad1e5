#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bustt/trip.hpp"

#include "json.hpp"

namespace bustt {

enum class FeatureEncoding {
  one_hot,  // categorical levels observed in training
  min_max,  // scaled to [0,1] over the training range, clipped outside
};

struct FeatureDef {
  std::string name;  // "day_of_week", "region", "route", "distance_km",
                     // "n_stops", "scheduled_departure", "week_number"
  FeatureEncoding encoding = FeatureEncoding::min_max;
  std::vector<std::string> levels;  // one_hot: training levels, sorted
  double lo = 0.0;                  // min_max: training range, frozen after fit
  double hi = 1.0;
  std::size_t offset = 0;  // first column in the encoded vector

  std::size_t width() const {
    return encoding == FeatureEncoding::one_hot ? levels.size() : 1;
  }
};

struct FeatureVector {
  std::vector<double> values;
  std::uint64_t schema_id = 0;
  bool clipped = false;        // some numeric value fell outside the training range
  bool unknown_level = false;  // some categorical level was unseen in training
};

// Ordered feature layout with scaling ranges fitted on training data only.
// Encoding is a pure function of (trip, frozen schema).
class FeatureSchema {
public:
  FeatureSchema() = default;

  /// Fits ranges/levels for the named features on the training trips.
  static FeatureSchema fit(const std::vector<TripRecord>& training,
                           const std::vector<std::string>& feature_names);

  FeatureVector encode(const TripRecord& trip) const;

  std::size_t dimension() const { return dimension_; }
  const std::vector<FeatureDef>& features() const { return features_; }
  std::uint64_t id() const { return id_; }

private:
  friend FeatureSchema schema_from_json(const nlohmann::ordered_json& j);

  std::vector<FeatureDef> features_;
  std::size_t dimension_ = 0;
  std::uint64_t id_ = 0;
};

nlohmann::ordered_json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::ordered_json& j);

}  // namespace bustt
