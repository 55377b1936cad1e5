// Times the OpenMP kernels against their serial reference implementations and
// checks that both produce identical results.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "bustt/delay.hpp"
#include "bustt/eval.hpp"
#include "bustt/forest.hpp"
#include "bustt/parallel.hpp"
#include "bustt/synth.hpp"

using namespace bustt;

namespace {

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

struct Result {
  std::string name;
  double serial_ms = 0;
  double parallel_ms = 0;
  bool identical = false;
};

Result bench_mc_delay(std::size_t n_samples, int jobs) {
  VehicleSchedule schedule;
  for (int i = 0; i < 8; ++i) {
    ScheduledTrip t;
    t.trip_id = "v" + std::to_string(i + 1);
    t.planned_departure = 32.0 * i;
    t.min_connection_before = i == 0 ? 0.0 : 3.0;
    schedule.trips.push_back(std::move(t));
  }
  std::vector<DensityModel> densities;
  for (int i = 0; i < 7; ++i) {
    densities.emplace_back(Parametric{Family::gamma, 120.0 + 5.0 * i, 0.25});
  }

  Result r;
  r.name = "mc_delay_replicates (n=" + std::to_string(n_samples) + ")";
  std::vector<double> serial_delays;
  std::vector<double> parallel_delays;
  std::vector<std::uint64_t> serial_clamped;
  std::vector<std::uint64_t> parallel_clamped;

  auto t0 = std::chrono::steady_clock::now();
  mc_delay_replicates_serial(schedule, densities, n_samples, 7, serial_delays, serial_clamped);
  r.serial_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  mc_delay_replicates_omp(schedule, densities, n_samples, 7, parallel_delays, parallel_clamped,
                          jobs);
  r.parallel_ms = ms_since(t0);
  r.identical = serial_delays == parallel_delays && serial_clamped == parallel_clamped;
  return r;
}

Result bench_forest(std::size_t rows, int trees, int jobs) {
  Rng rng(11);
  ForestDataset data;
  data.n_cols = 8;
  for (std::size_t g = 0; g < data.n_cols; ++g) {
    data.group_names.push_back("f" + std::to_string(g));
    data.group_spans.emplace_back(g, g + 1);
  }
  for (std::size_t i = 0; i < rows; ++i) {
    double y = 25.0;
    for (std::size_t c = 0; c < data.n_cols; ++c) {
      const double v = rng.uniform();
      data.x.push_back(v);
      y += (c % 3 == 0 ? 4.0 : 0.5) * v;
    }
    data.y.push_back(y + rng.normal());
  }
  ForestHyperparams params;
  params.n_trees = trees;
  params.max_depth = 10;

  Result r;
  r.name = "build_trees (rows=" + std::to_string(rows) + ", trees=" + std::to_string(trees) + ")";
  auto t0 = std::chrono::steady_clock::now();
  const std::vector<Tree> serial = build_trees_serial(data, params, 3);
  r.serial_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  const std::vector<Tree> parallel = build_trees_omp(data, params, 3, jobs);
  r.parallel_ms = ms_since(t0);

  r.identical = serial.size() == parallel.size();
  for (std::size_t t = 0; r.identical && t < serial.size(); ++t) {
    r.identical = serial[t].nodes.size() == parallel[t].nodes.size();
    for (std::size_t i = 0; r.identical && i < serial[t].nodes.size(); ++i) {
      const TreeNode& a = serial[t].nodes[i];
      const TreeNode& b = parallel[t].nodes[i];
      r.identical = a.feature == b.feature && a.threshold == b.threshold && a.left == b.left &&
                    a.right == b.right && a.value == b.value && a.n_samples == b.n_samples;
    }
  }
  return r;
}

Result bench_predictions(int weeks, int jobs) {
  SynthConfig config;
  config.start_date = parse_date("2017-08-28");
  config.weeks = weeks;
  for (const char* line : {"A", "B", "C", "D", "E", "F", "G", "H"}) {
    RouteLaw route;
    route.line = line;
    route.base_tt = 28.0 + 2.0 * (line[0] - 'A');
    route.trips_per_hour.assign(22, 2.0);
    config.routes.push_back(route);
  }
  const std::vector<TripRecord> trips = generate(config, 5);

  EstimatorConfig estimator;
  estimator.type = EstimatorConfig::Type::parametric;
  estimator.family = Family::log_logistic;
  SimilarityMethod sim;
  sim.type = SimilarityMethod::Type::knn;
  sim.knn.k = 13;
  estimator.similarity = sim;

  const FittedEstimator fitted = FittedEstimator::fit(trips, estimator, 17, 1);

  Result r;
  r.name = "density_predictions (trips=" + std::to_string(trips.size()) + ")";
  auto t0 = std::chrono::steady_clock::now();
  const auto serial = predict_serial(fitted, trips);
  r.serial_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  const auto parallel = fitted.predict(trips, jobs);
  r.parallel_ms = ms_since(t0);

  r.identical = serial.skipped == parallel.skipped &&
                serial.densities.size() == parallel.densities.size();
  for (std::size_t i = 0; r.identical && i < trips.size(); ++i) {
    if (serial.skipped[i]) continue;
    r.identical = density_to_json(serial.densities[i]) == density_to_json(parallel.densities[i]);
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--quick") quick = true;
  }
  const int jobs = default_jobs() > 1 ? default_jobs() : 2;

  std::vector<Result> results;
  results.push_back(bench_mc_delay(quick ? 20000 : 400000, jobs));
  results.push_back(bench_forest(quick ? 4000 : 30000, quick ? 8 : 48, jobs));
  results.push_back(bench_predictions(quick ? 3 : 9, jobs));

  std::printf("%-44s %12s %14s %9s %6s\n", "kernel", "serial (ms)", "parallel (ms)", "speedup",
              "match");
  int failures = 0;
  for (const Result& r : results) {
    std::printf("%-44s %12.1f %14.1f %8.2fx %6s\n", r.name.c_str(), r.serial_ms, r.parallel_ms,
                r.serial_ms / (r.parallel_ms > 0 ? r.parallel_ms : 1.0),
                r.identical ? "yes" : "NO");
    if (!r.identical) ++failures;
  }
  std::printf("(%d worker threads)\n", jobs);
  return failures == 0 ? 0 : 1;
}
