#include "bustt/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bustt/error.hpp"
#include "bustt/parallel.hpp"
#include "bustt/rng.hpp"

namespace bustt {

std::vector<std::string> forest_feature_names() {
  return {"n_stops", "distance_km", "scheduled_departure", "route", "week_number", "day_of_week"};
}

ForestDataset ForestDataset::build(const std::vector<TripRecord>& trips,
                                   const FeatureSchema& schema) {
  require(!trips.empty(), ErrorKind::data, "empty trip list");
  ForestDataset data;
  for (const FeatureDef& def : schema.features()) {
    data.group_names.push_back(def.name);
    data.group_spans.emplace_back(def.offset, def.offset + def.width());
  }
  data.n_cols = schema.dimension();
  data.x.reserve(trips.size() * data.n_cols);
  data.y.reserve(trips.size());
  for (const TripRecord& t : trips) {
    const FeatureVector v = schema.encode(t);
    data.x.insert(data.x.end(), v.values.begin(), v.values.end());
    data.y.push_back(t.travel_time);
  }
  return data;
}

double Tree::predict(std::span<const double> row) const {
  int node = 0;
  for (;;) {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    if (n.feature < 0) return n.value;
    node = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
}

namespace {

struct BuiltTree {
  Tree tree;
  std::vector<char> in_bag;
};

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0;
  double sse = 0;
};

// Best variance-reduction split among the sampled features. Features are
// visited in ascending index and thresholds in ascending order with strict
// improvement, so ties resolve to the lowest feature then lowest threshold.
SplitChoice best_split(const ForestDataset& data, const std::vector<std::size_t>& rows,
                       const std::vector<int>& features) {
  SplitChoice best;
  best.sse = std::numeric_limits<double>::infinity();
  const std::size_t n = rows.size();

  std::vector<std::pair<double, double>> vals(n);  // (feature value, target)
  for (const int f : features) {
    bool binary = true;  // one-hot columns skip the sort entirely
    for (std::size_t i = 0; i < n; ++i) {
      const double v = data.x[rows[i] * data.n_cols + static_cast<std::size_t>(f)];
      vals[i] = {v, data.y[rows[i]]};
      binary = binary && (v == 0.0 || v == 1.0);
    }
    if (binary) {
      double n1 = 0;
      double sum1 = 0;
      double sumsq1 = 0;
      double sum = 0;
      double sumsq = 0;
      for (const auto& [v, y] : vals) {
        sum += y;
        sumsq += y * y;
        if (v == 1.0) {
          n1 += 1.0;
          sum1 += y;
          sumsq1 += y * y;
        }
      }
      const double n0 = static_cast<double>(n) - n1;
      if (n0 == 0 || n1 == 0) continue;  // constant feature
      const double sum0 = sum - sum1;
      const double sumsq0 = sumsq - sumsq1;
      const double sse = (sumsq0 - sum0 * sum0 / n0) + (sumsq1 - sum1 * sum1 / n1);
      if (sse < best.sse) best = {true, f, 0.5, sse};
      continue;
    }

    std::sort(vals.begin(), vals.end());
    if (vals.front().first == vals.back().first) continue;  // constant feature

    double sum_left = 0;
    double sumsq_left = 0;
    double sum_right = 0;
    double sumsq_right = 0;
    for (const auto& [v, y] : vals) {
      sum_right += y;
      sumsq_right += y * y;
    }

    for (std::size_t i = 1; i < n; ++i) {
      const double y = vals[i - 1].second;
      sum_left += y;
      sumsq_left += y * y;
      sum_right -= y;
      sumsq_right -= y * y;
      if (vals[i].first == vals[i - 1].first) continue;  // not a boundary

      const auto nl = static_cast<double>(i);
      const auto nr = static_cast<double>(n - i);
      const double sse = (sumsq_left - sum_left * sum_left / nl) +
                         (sumsq_right - sum_right * sum_right / nr);
      if (sse < best.sse) {
        double threshold = 0.5 * (vals[i - 1].first + vals[i].first);
        if (threshold >= vals[i].first) threshold = vals[i - 1].first;
        best = {true, f, threshold, sse};
      }
    }
  }
  return best;
}

void grow(Tree& tree, int node_index, const ForestDataset& data, std::vector<std::size_t>& rows,
          int depth, const ForestHyperparams& params, int max_features, Rng& rng,
          std::vector<int>& feature_buf) {
  TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  node.n_samples = static_cast<int>(rows.size());
  double mean = 0;
  for (const std::size_t r : rows) mean += data.y[r];
  mean /= static_cast<double>(rows.size());
  node.value = mean;

  if (depth >= params.max_depth ||
      rows.size() < static_cast<std::size_t>(params.min_samples_split))
    return;

  // Sample max_features distinct feature indices, then order them.
  feature_buf.resize(data.n_cols);
  std::iota(feature_buf.begin(), feature_buf.end(), 0);
  const int d = static_cast<int>(data.n_cols);
  const int m = std::min(max_features, d);
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - i)));
    std::swap(feature_buf[static_cast<std::size_t>(i)], feature_buf[static_cast<std::size_t>(j)]);
  }
  std::vector<int> features(feature_buf.begin(), feature_buf.begin() + m);
  std::sort(features.begin(), features.end());

  const SplitChoice split = best_split(data, rows, features);
  if (!split.found) return;

  std::vector<std::size_t> left_rows;
  std::vector<std::size_t> right_rows;
  for (const std::size_t r : rows) {
    const double v = data.x[r * data.n_cols + static_cast<std::size_t>(split.feature)];
    (v <= split.threshold ? left_rows : right_rows).push_back(r);
  }
  if (left_rows.empty() || right_rows.empty()) return;

  rows.clear();
  rows.shrink_to_fit();

  const int left_index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  const int right_index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  {
    TreeNode& n = tree.nodes[static_cast<std::size_t>(node_index)];
    n.feature = split.feature;
    n.threshold = split.threshold;
    n.left = left_index;
    n.right = right_index;
  }
  grow(tree, left_index, data, left_rows, depth + 1, params, max_features, rng, feature_buf);
  grow(tree, right_index, data, right_rows, depth + 1, params, max_features, rng, feature_buf);
}

BuiltTree build_one(const ForestDataset& data, const ForestHyperparams& params,
                    std::uint64_t tree_seed) {
  const std::size_t n = data.rows();
  Rng rng(tree_seed);

  BuiltTree built;
  built.in_bag.assign(n, 0);
  std::vector<std::size_t> rows;
  rows.reserve(n);
  if (params.bootstrap) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(rng.below(n));
      rows.push_back(r);
      built.in_bag[r] = 1;
    }
    std::sort(rows.begin(), rows.end());  // resample order must not matter
  } else {
    for (std::size_t i = 0; i < n; ++i) rows.push_back(i);
    std::fill(built.in_bag.begin(), built.in_bag.end(), 1);
  }

  const int max_features =
      params.max_features > 0
          ? params.max_features
          : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(data.n_cols))));

  built.tree.nodes.emplace_back();
  std::vector<int> feature_buf;
  grow(built.tree, 0, data, rows, 0, params, max_features, rng, feature_buf);
  return built;
}

std::vector<BuiltTree> build_all(const ForestDataset& data, const ForestHyperparams& params,
                                 std::uint64_t seed, int jobs, bool serial) {
  const auto count = static_cast<std::size_t>(params.n_trees);
  std::vector<BuiltTree> built(count);
  const auto fn = [&](std::size_t t) {
    built[t] = build_one(data, params, derive_seed(seed, static_cast<std::uint64_t>(t)));
  };
  if (serial) {
    for_each_index_serial(count, fn);
  } else {
    for_each_index_omp(count, jobs, fn);
  }
  return built;
}

}  // namespace

std::vector<Tree> build_trees_serial(const ForestDataset& data, const ForestHyperparams& params,
                                     std::uint64_t seed) {
  std::vector<Tree> trees;
  for (auto& b : build_all(data, params, seed, 1, true)) trees.push_back(std::move(b.tree));
  return trees;
}

std::vector<Tree> build_trees_omp(const ForestDataset& data, const ForestHyperparams& params,
                                  std::uint64_t seed, int jobs) {
  std::vector<Tree> trees;
  for (auto& b : build_all(data, params, seed, jobs, false)) trees.push_back(std::move(b.tree));
  return trees;
}

ForestModel fit_forest(const ForestDataset& data, const ForestHyperparams& params,
                       std::uint64_t seed, int jobs) {
  require(data.rows() >= 2, ErrorKind::data, "forest needs at least 2 training rows");
  require(params.n_trees >= 1, ErrorKind::invalid_argument, "need at least one tree");

  std::vector<BuiltTree> built = build_all(data, params, seed, jobs, jobs == 1);

  ForestModel model;
  model.params = params;
  model.seed = seed;
  model.trees.reserve(built.size());
  for (auto& b : built) model.trees.push_back(std::move(b.tree));

  // Out-of-fit training error: each row averaged over the trees that did not
  // see it. Falls back to the in-bag error when nothing is out of bag.
  const std::size_t n = data.rows();
  double oob_sse = 0;
  std::size_t oob_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    std::size_t m = 0;
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
      if (built[t].in_bag[i]) continue;
      sum += model.trees[t].predict(data.row(i));
      ++m;
    }
    if (m == 0) continue;
    const double err = sum / static_cast<double>(m) - data.y[i];
    oob_sse += err * err;
    ++oob_count;
  }
  if (oob_count > 0) {
    model.training_mse = oob_sse / static_cast<double>(oob_count);
    model.mse_is_oob = true;
  } else {
    model.training_mse = forest_mse(model, data);
    model.mse_is_oob = false;
  }
  return model;
}

double ForestModel::predict(std::span<const double> row) const {
  double sum = 0;
  for (const Tree& t : trees) sum += t.predict(row);
  return sum / static_cast<double>(trees.size());
}

double predict_mean(const ForestModel& forest, std::span<const double> row) {
  return forest.predict(row);
}

DensityModel forest_as_gaussian(const ForestModel& forest, std::span<const double> row) {
  return DensityModel(
      Parametric{Family::normal, forest.predict(row), std::max(forest.training_mse, kVarianceFloor)});
}

double forest_mse(const ForestModel& forest, const ForestDataset& data) {
  require(data.rows() > 0, ErrorKind::data, "empty dataset");
  double sse = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const double err = forest.predict(data.row(i)) - data.y[i];
    sse += err * err;
  }
  return sse / static_cast<double>(data.rows());
}

double permutation_importance(const ForestModel& forest, const ForestDataset& data,
                              std::size_t group, int n_shuffles, std::uint64_t seed) {
  require(group < data.group_spans.size(), ErrorKind::invalid_argument, "bad feature group");
  require(n_shuffles >= 1, ErrorKind::invalid_argument, "need at least one shuffle");

  const double baseline = forest_mse(forest, data);
  const auto [col_begin, col_end] = data.group_spans[group];
  const std::size_t n = data.rows();

  double total = 0;
  std::vector<std::size_t> perm(n);
  std::vector<double> buf(data.n_cols);
  for (int s = 0; s < n_shuffles; ++s) {
    Rng rng(derive_seed(derive_seed(seed, "perm-importance"), static_cast<std::uint64_t>(s)));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
      std::swap(perm[i], perm[j]);
    }
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> row = data.row(i);
      std::copy(row.begin(), row.end(), buf.begin());
      for (std::size_t c = col_begin; c < col_end; ++c) {
        buf[c] = data.x[perm[i] * data.n_cols + c];
      }
      const double err = forest.predict(buf) - data.y[i];
      sse += err * err;
    }
    total += sse / static_cast<double>(n) - baseline;
  }
  return total / static_cast<double>(n_shuffles);
}

std::vector<ImportanceRow> importance_report(const ForestModel& forest, const ForestDataset& data,
                                             int n_shuffles, std::uint64_t seed) {
  std::vector<ImportanceRow> rows;
  double positive_total = 0;
  for (std::size_t g = 0; g < data.group_spans.size(); ++g) {
    ImportanceRow row;
    row.feature = data.group_names[g];
    row.importance =
        permutation_importance(forest, data, g, n_shuffles, derive_seed(seed, g));
    positive_total += std::max(row.importance, 0.0);
    rows.push_back(row);
  }
  for (ImportanceRow& row : rows) {
    row.relative_pct = positive_total > 0 ? 100.0 * row.importance / positive_total : 0.0;
  }
  std::sort(rows.begin(), rows.end(), [](const ImportanceRow& a, const ImportanceRow& b) {
    return a.importance > b.importance;
  });
  return rows;
}

nlohmann::ordered_json forest_to_json(const ForestModel& forest) {
  nlohmann::ordered_json j;
  j["n_trees"] = forest.params.n_trees;
  j["max_depth"] = forest.params.max_depth;
  j["max_features"] = forest.params.max_features;
  j["min_samples_split"] = forest.params.min_samples_split;
  j["bootstrap"] = forest.params.bootstrap;
  j["seed"] = forest.seed;
  j["training_mse"] = forest.training_mse;
  j["mse_is_oob"] = forest.mse_is_oob;
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const Tree& t : forest.trees) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const TreeNode& n : t.nodes) {
      nodes.push_back({{"f", n.feature},
                       {"t", n.threshold},
                       {"l", n.left},
                       {"r", n.right},
                       {"v", n.value},
                       {"n", n.n_samples}});
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j;
}

ForestModel forest_from_json(const nlohmann::ordered_json& j) {
  ForestModel forest;
  forest.params.n_trees = j.at("n_trees");
  forest.params.max_depth = j.at("max_depth");
  forest.params.max_features = j.at("max_features");
  forest.params.min_samples_split = j.at("min_samples_split");
  forest.params.bootstrap = j.at("bootstrap");
  forest.seed = j.at("seed");
  forest.training_mse = j.at("training_mse");
  forest.mse_is_oob = j.at("mse_is_oob");
  for (const auto& tj : j.at("trees")) {
    Tree tree;
    for (const auto& nj : tj) {
      TreeNode n;
      n.feature = nj.at("f");
      n.threshold = nj.at("t");
      n.left = nj.at("l");
      n.right = nj.at("r");
      n.value = nj.at("v");
      n.n_samples = nj.at("n");
      tree.nodes.push_back(n);
    }
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

}  // namespace bustt
