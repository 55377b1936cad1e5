#include <algorithm>

#include "bustt/forest.hpp"
#include "bustt/rng.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

using namespace bustt;

namespace {

// Hand-built dataset; one numeric group unless more are given.
ForestDataset dataset(const std::vector<std::vector<double>>& rows,
                      const std::vector<double>& y, std::size_t n_groups = 0) {
  ForestDataset d;
  d.n_cols = rows[0].size();
  if (n_groups == 0) n_groups = d.n_cols;
  const std::size_t per = d.n_cols / n_groups;
  for (std::size_t g = 0; g < n_groups; ++g) {
    d.group_names.push_back("f" + std::to_string(g));
    d.group_spans.emplace_back(g * per, (g + 1) * per);
  }
  for (const auto& r : rows) d.x.insert(d.x.end(), r.begin(), r.end());
  d.y = y;
  return d;
}

}  // namespace

TEST_SUITE("forest_fit") {
  TEST_CASE("constant target: every prediction is c, training MSE 0") {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    Rng rng(211);
    for (int i = 0; i < 50; ++i) {
      rows.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
      y.push_back(42.0);
    }
    ForestHyperparams params;
    params.n_trees = 20;
    params.max_depth = 4;
    const ForestModel forest = fit_forest(dataset(rows, y), params, 1);
    for (const auto& r : rows) CHECK(forest.predict(r) == doctest::Approx(42.0).epsilon(1e-12));
    CHECK(forest.training_mse == doctest::Approx(0.0));
  }

  TEST_CASE("depth-1 tree splits a binary feature perfectly") {
    std::vector<std::vector<double>> rows = {{0}, {1}};
    std::vector<double> y = {10, 20};
    ForestHyperparams params;
    params.n_trees = 1;
    params.max_depth = 1;
    params.min_samples_split = 2;
    params.bootstrap = false;
    const ForestModel forest = fit_forest(dataset(rows, y), params, 3);
    CHECK(forest.predict(rows[0]) == 10.0);
    CHECK(forest.predict(rows[1]) == 20.0);
  }

  TEST_CASE("learns an hour-shaped signal better than the target variance") {
    Rng rng(223);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 2000; ++i) {
      const double hour = rng.uniform(0, 22);
      rows.push_back({hour});
      y.push_back(30.0 + 6.0 * std::sin(hour / 3.0) + rng.normal());
    }
    ForestHyperparams params;
    params.n_trees = 30;
    params.max_depth = 8;
    const ForestDataset train = dataset(
        std::vector<std::vector<double>>(rows.begin(), rows.begin() + 1500),
        std::vector<double>(y.begin(), y.begin() + 1500));
    const ForestDataset test = dataset(
        std::vector<std::vector<double>>(rows.begin() + 1500, rows.end()),
        std::vector<double>(y.begin() + 1500, y.end()));
    const ForestModel forest = fit_forest(train, params, 7);
    const double var = oracles::population_variance(test.y);
    CHECK(forest_mse(forest, test) < var);
  }

  TEST_CASE("two-tree toy forest averages the tree outputs") {
    std::vector<std::vector<double>> rows = {{0}, {0}, {1}, {1}};
    std::vector<double> y = {10, 12, 20, 22};
    ForestHyperparams params;
    params.n_trees = 2;
    params.max_depth = 1;
    params.min_samples_split = 2;
    params.bootstrap = false;
    const ForestModel forest = fit_forest(dataset(rows, y), params, 5);
    REQUIRE(forest.trees.size() == 2);
    const std::vector<double> probe = {0.0};
    const double by_hand =
        0.5 * (forest.trees[0].predict(probe) + forest.trees[1].predict(probe));
    CHECK(forest.predict(probe) == doctest::Approx(by_hand).epsilon(1e-15));
    CHECK(forest.predict(probe) == doctest::Approx(11.0));
  }

  TEST_CASE("predictions stay inside the training target range") {
    Rng rng(227);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 300; ++i) {
      rows.push_back({rng.uniform(0, 10), rng.uniform(0, 10)});
      y.push_back(20.0 + 10.0 * rng.uniform());
    }
    const ForestDataset d = dataset(rows, y);
    ForestHyperparams params;
    params.n_trees = 15;
    const ForestModel forest = fit_forest(d, params, 11);
    const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> probe = {rng.uniform(-5, 15), rng.uniform(-5, 15)};
      const double p = forest.predict(probe);
      CHECK(p >= *mn);
      CHECK(p <= *mx);
    }
  }

  TEST_CASE("bit-identical forests under a fixed seed, serial or parallel") {
    Rng rng(229);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 200; ++i) {
      rows.push_back({rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
      y.push_back(rng.uniform(10, 50));
    }
    const ForestDataset d = dataset(rows, y);
    ForestHyperparams params;
    params.n_trees = 12;
    params.max_depth = 6;
    const std::vector<Tree> serial = build_trees_serial(d, params, 17);
    const std::vector<Tree> parallel = build_trees_omp(d, params, 17, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t t = 0; t < serial.size(); ++t) {
      REQUIRE(serial[t].nodes.size() == parallel[t].nodes.size());
      for (std::size_t i = 0; i < serial[t].nodes.size(); ++i) {
        CHECK(serial[t].nodes[i].feature == parallel[t].nodes[i].feature);
        CHECK(serial[t].nodes[i].threshold == parallel[t].nodes[i].threshold);
        CHECK(serial[t].nodes[i].value == parallel[t].nodes[i].value);
      }
    }
    const ForestModel a = fit_forest(d, params, 17, 1);
    const ForestModel b = fit_forest(d, params, 17, 4);
    CHECK(forest_to_json(a).dump() == forest_to_json(b).dump());
  }
}

TEST_SUITE("forest_as_gaussian") {
  TEST_CASE("constant-target forest gives a floored normal") {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 30; ++i) {
      rows.push_back({static_cast<double>(i % 7)});
      y.push_back(33.0);
    }
    ForestHyperparams params;
    params.n_trees = 10;
    const ForestModel forest = fit_forest(dataset(rows, y), params, 19);
    const DensityModel g = forest_as_gaussian(forest, rows[0]);
    const auto& p = std::get<Parametric>(g.variant());
    CHECK(p.family == Family::normal);
    CHECK(p.a == doctest::Approx(33.0));
    CHECK(p.b == kVarianceFloor);
    const auto [lo, hi] = g.support();
    CHECK(oracles::integrate([&](double t) { return g.pdf(t); }, lo, hi, 20000) ==
          doctest::Approx(1.0).epsilon(1e-3));
  }

  TEST_CASE("constant variance loses to a heteroscedastic oracle on NLL") {
    // Noise scale depends on the input; the forest's single variance cannot match it.
    Rng rng(233);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 2000; ++i) {
      const double x = rng.uniform(0, 1);
      rows.push_back({x});
      y.push_back(30.0 + (x < 0.5 ? 0.5 : 4.0) * rng.normal());
    }
    const ForestDataset d = dataset(rows, y);
    ForestHyperparams params;
    params.n_trees = 25;
    params.max_depth = 6;
    const ForestModel forest = fit_forest(d, params, 23);

    double forest_nll = 0;
    double oracle_nll = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      forest_nll -= forest_as_gaussian(forest, rows[i]).log_pdf(y[i]);
      const double sd = rows[i][0] < 0.5 ? 0.5 : 4.0;
      const DensityModel oracle(Parametric{Family::normal, 30.0, sd * sd});
      oracle_nll -= oracle.log_pdf(y[i]);
    }
    CHECK(oracle_nll < forest_nll);
  }
}

TEST_SUITE("permutation_importance") {
  TEST_CASE("identical-valued column permutes to exactly zero") {
    Rng rng(239);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 200; ++i) {
      rows.push_back({rng.uniform(0, 1), 7.0});  // second feature constant
      y.push_back(20.0 + 5.0 * rows.back()[0] + 0.3 * rng.normal());
    }
    const ForestDataset d = dataset(rows, y, 2);
    ForestHyperparams params;
    params.n_trees = 10;
    const ForestModel forest = fit_forest(d, params, 29);
    CHECK(permutation_importance(forest, d, 1, 10, 31) == 0.0);
  }

  TEST_CASE("single informative feature dominates and reproduces the ranking") {
    Rng rng(241);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 1500; ++i) {
      const double a = rng.uniform(0, 1);
      const double b = rng.uniform(0, 1);
      rows.push_back({a, b});
      y.push_back(10.0 + 25.0 * a + 0.1 * rng.normal());  // depends on A only
    }
    const ForestDataset d = dataset(rows, y, 2);
    ForestHyperparams params;
    params.n_trees = 30;
    params.max_depth = 8;
    const ForestModel forest = fit_forest(d, params, 37);
    const double imp_a = permutation_importance(forest, d, 0, 10, 41);
    const double imp_b = permutation_importance(forest, d, 1, 10, 41);
    CHECK(imp_a > 10.0 * std::max(imp_b, 0.0) + 1e-9);

    const std::vector<ImportanceRow> report = importance_report(forest, d, 10, 43);
    REQUIRE(report.size() == 2);
    CHECK(report[0].feature == "f0");
    CHECK(report[0].relative_pct > 90.0);
  }
}

TEST_SUITE("forest_json") {
  TEST_CASE("round-trip preserves trees and predictions exactly") {
    Rng rng(251);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 120; ++i) {
      rows.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
      y.push_back(rng.uniform(20, 40));
    }
    const ForestDataset d = dataset(rows, y);
    ForestHyperparams params;
    params.n_trees = 8;
    const ForestModel forest = fit_forest(d, params, 53);
    const ForestModel back = forest_from_json(forest_to_json(forest));
    CHECK(forest_to_json(back).dump() == forest_to_json(forest).dump());
    for (const auto& r : rows) CHECK(back.predict(r) == forest.predict(r));
  }
}
