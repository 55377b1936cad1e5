#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bustt/density.hpp"
#include "bustt/features.hpp"
#include "bustt/trip.hpp"

#include "json.hpp"

namespace bustt {

// Row-major feature matrix with named column groups (a categorical feature
// spans its one-hot columns). Groups are the unit of permutation importance.
struct ForestDataset {
  std::vector<std::string> group_names;
  std::vector<std::pair<std::size_t, std::size_t>> group_spans;  // [begin, end) columns
  std::size_t n_cols = 0;
  std::vector<double> x;
  std::vector<double> y;  // travel time, minutes

  std::size_t rows() const { return n_cols ? y.size() : 0; }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * n_cols, n_cols}; }

  /// Encodes trips under the schema; one group per schema feature.
  static ForestDataset build(const std::vector<TripRecord>& trips, const FeatureSchema& schema);
};

/// The default point-prediction feature set (region excluded).
std::vector<std::string> forest_feature_names();

struct ForestHyperparams {
  int n_trees = 100;
  int max_depth = 12;
  int max_features = 0;  // per split; 0 = ceil(sqrt(n_cols))
  int min_samples_split = 5;
  bool bootstrap = true;
};

struct TreeNode {
  int feature = -1;  // -1: leaf
  double threshold = 0;
  int left = -1;
  int right = -1;
  double value = 0;  // leaf mean
  int n_samples = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(std::span<const double> row) const;
};

// Bagged variance-reduction CART regression trees. Per-tree RNG streams are
// derived from the seed, so the fit is bit-identical for any thread count.
struct ForestModel {
  ForestHyperparams params;
  std::uint64_t seed = 0;
  std::vector<Tree> trees;
  double training_mse = 0;  // out-of-bag when available, in-bag otherwise
  bool mse_is_oob = false;

  double predict(std::span<const double> row) const;
};

ForestModel fit_forest(const ForestDataset& data, const ForestHyperparams& params,
                       std::uint64_t seed, int jobs = 1);

// Serial reference and OpenMP tree-building kernels; identical output.
std::vector<Tree> build_trees_serial(const ForestDataset& data, const ForestHyperparams& params,
                                     std::uint64_t seed);
std::vector<Tree> build_trees_omp(const ForestDataset& data, const ForestHyperparams& params,
                                  std::uint64_t seed, int jobs);

double predict_mean(const ForestModel& forest, std::span<const double> row);

/// Normal(prediction, training MSE), variance floored.
DensityModel forest_as_gaussian(const ForestModel& forest, std::span<const double> row);

double forest_mse(const ForestModel& forest, const ForestDataset& data);

/// Mean over shuffles of MSE(group permuted) - MSE(original); positive = important.
double permutation_importance(const ForestModel& forest, const ForestDataset& data,
                              std::size_t group, int n_shuffles, std::uint64_t seed);

struct ImportanceRow {
  std::string feature;
  double importance = 0;
  double relative_pct = 0;
};

/// All groups, ranked by decreasing importance.
std::vector<ImportanceRow> importance_report(const ForestModel& forest, const ForestDataset& data,
                                             int n_shuffles, std::uint64_t seed);

nlohmann::ordered_json forest_to_json(const ForestModel& forest);
ForestModel forest_from_json(const nlohmann::ordered_json& j);

}  // namespace bustt
