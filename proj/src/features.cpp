#include "bustt/features.hpp"

#include <algorithm>
#include <set>

#include "bustt/error.hpp"

namespace bustt {

namespace {

bool is_categorical(const std::string& name) {
  return name == "day_of_week" || name == "region" || name == "route";
}

std::string categorical_level(const TripRecord& t, const std::string& name) {
  if (name == "day_of_week") return to_string(t.day_of_week);
  if (name == "region") return to_string(t.region);
  return t.route_id();
}

double numeric_value(const TripRecord& t, const std::string& name) {
  if (name == "distance_km") return t.distance_km;
  if (name == "n_stops") return static_cast<double>(t.n_stops);
  if (name == "scheduled_departure") return t.scheduled_departure;
  if (name == "week_number") return static_cast<double>(t.week_number);
  throw_error(ErrorKind::invalid_argument, "unknown feature: '" + name + "'");
}

std::uint64_t schema_digest(const std::vector<FeatureDef>& defs) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto add = [&h](const std::string& s) {
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    h ^= 0x1f;
    h *= 0x100000001b3ULL;
  };
  for (const FeatureDef& d : defs) {
    add(d.name);
    add(d.encoding == FeatureEncoding::one_hot ? "onehot" : "minmax");
    for (const std::string& level : d.levels) add(level);
    add(std::to_string(d.lo));
    add(std::to_string(d.hi));
  }
  return h;
}

}  // namespace

FeatureSchema FeatureSchema::fit(const std::vector<TripRecord>& training,
                                 const std::vector<std::string>& feature_names) {
  require(!training.empty(), ErrorKind::data, "cannot fit a feature schema on no trips");

  FeatureSchema schema;
  std::size_t offset = 0;
  for (const std::string& name : feature_names) {
    FeatureDef def;
    def.name = name;
    def.offset = offset;
    if (is_categorical(name)) {
      def.encoding = FeatureEncoding::one_hot;
      if (name == "day_of_week") {
        // Closed sets keep their natural order; only routes come from the data.
        for (int d = 0; d < 5; ++d) def.levels.emplace_back(to_string(static_cast<Weekday>(d)));
      } else if (name == "region") {
        for (int r = 0; r < 6; ++r) def.levels.emplace_back(to_string(static_cast<Region>(r)));
      } else {
        std::set<std::string> levels;
        for (const TripRecord& t : training) levels.insert(categorical_level(t, name));
        def.levels.assign(levels.begin(), levels.end());
      }
    } else {
      def.encoding = FeatureEncoding::min_max;
      def.lo = numeric_value(training.front(), name);
      def.hi = def.lo;
      for (const TripRecord& t : training) {
        const double v = numeric_value(t, name);
        def.lo = std::min(def.lo, v);
        def.hi = std::max(def.hi, v);
      }
    }
    offset += def.width();
    schema.features_.push_back(std::move(def));
  }
  schema.dimension_ = offset;
  schema.id_ = schema_digest(schema.features_);
  return schema;
}

nlohmann::ordered_json schema_to_json(const FeatureSchema& schema) {
  nlohmann::ordered_json features = nlohmann::ordered_json::array();
  for (const FeatureDef& def : schema.features()) {
    nlohmann::ordered_json j;
    j["name"] = def.name;
    j["encoding"] = def.encoding == FeatureEncoding::one_hot ? "one_hot" : "min_max";
    if (def.encoding == FeatureEncoding::one_hot) {
      j["levels"] = def.levels;
    } else {
      j["lo"] = def.lo;
      j["hi"] = def.hi;
    }
    features.push_back(std::move(j));
  }
  return {{"features", std::move(features)}};
}

FeatureSchema schema_from_json(const nlohmann::ordered_json& j) {
  FeatureSchema schema;
  std::size_t offset = 0;
  for (const auto& fj : j.at("features")) {
    FeatureDef def;
    def.name = fj.at("name");
    def.offset = offset;
    if (fj.at("encoding") == "one_hot") {
      def.encoding = FeatureEncoding::one_hot;
      def.levels = fj.at("levels").get<std::vector<std::string>>();
    } else {
      def.encoding = FeatureEncoding::min_max;
      def.lo = fj.at("lo");
      def.hi = fj.at("hi");
    }
    offset += def.width();
    schema.features_.push_back(std::move(def));
  }
  schema.dimension_ = offset;
  schema.id_ = schema_digest(schema.features_);
  return schema;
}

FeatureVector FeatureSchema::encode(const TripRecord& trip) const {
  require(dimension_ > 0, ErrorKind::invalid_argument, "schema not fitted");

  FeatureVector out;
  out.values.assign(dimension_, 0.0);
  out.schema_id = id_;
  for (const FeatureDef& def : features_) {
    if (def.encoding == FeatureEncoding::one_hot) {
      const std::string level = categorical_level(trip, def.name);
      const auto it = std::find(def.levels.begin(), def.levels.end(), level);
      if (it != def.levels.end()) {
        out.values[def.offset + static_cast<std::size_t>(it - def.levels.begin())] = 1.0;
      } else {
        out.unknown_level = true;  // all-zeros block
      }
    } else {
      const double v = numeric_value(trip, def.name);
      double scaled = def.hi > def.lo ? (v - def.lo) / (def.hi - def.lo) : 0.0;
      if (scaled < 0.0 || scaled > 1.0) {
        scaled = std::clamp(scaled, 0.0, 1.0);
        out.clipped = true;
      }
      out.values[def.offset] = scaled;
    }
  }
  return out;
}

}  // namespace bustt
