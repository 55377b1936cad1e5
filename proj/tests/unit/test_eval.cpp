#include <cmath>

#include "bustt/eval.hpp"
#include "bustt/synth.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

using namespace bustt;

namespace {

SynthConfig two_route_config() {
  SynthConfig config;
  config.start_date = parse_date("2017-08-28");
  config.weeks = 9;
  for (const char* line : {"A", "B"}) {
    RouteLaw r;
    r.line = line;
    r.base_tt = line[0] == 'A' ? 30.0 : 44.0;
    r.morning_bump = 4.0;
    r.afternoon_bump = 6.0;
    r.noise_scale_base = 2.0;
    r.trips_per_hour.assign(22, 2.0);
    config.routes.push_back(r);
  }
  return config;
}

DatasetSplit make_split(const SynthConfig& config, std::uint64_t seed) {
  SplitConfig sc;
  sc.training_end = parse_date("2017-10-08");
  sc.test_start = parse_date("2017-10-16");
  sc.test_end = parse_date("2017-10-29");
  return chronological_split(generate(config, seed), sc);
}

SimilarityMethod edtw60() {
  SimilarityMethod m;
  m.type = SimilarityMethod::Type::edtw;
  m.dtw.mode = DtwMode::minutes;
  m.dtw.window_minutes = 60;
  return m;
}

SimilarityMethod knn(int k) {
  SimilarityMethod m;
  m.type = SimilarityMethod::Type::knn;
  m.knn.k = k;
  return m;
}

TripRecord trip_with_tt(double tt) {
  TripRecord t;
  t.trip_id = "x";
  t.line = "A";
  t.direction = "East";
  t.date = parse_date("2017-09-04");
  t.week_number = 36;
  t.scheduled_departure = 300;
  t.travel_time = tt;
  t.actual_departure = 300;
  t.actual_arrival = 300 + tt;
  t.n_stops = 30;
  t.distance_km = 8;
  return t;
}

}  // namespace

TEST_SUITE("nll_op") {
  TEST_CASE("a density of one at the truth scores zero") {
    // Uniform-like box via KDE with a tiny bandwidth has pdf 1 over a unit box:
    // simpler, use a smoothed pmf with a rectangular spike. Directly: a
    // parametric stand-in with pdf(t)=1 is not in the family set, so check the
    // additive identity instead: log(1) = 0 via a constructed kde at its peak.
    const DensityModel unit = fit_kde(std::vector<double>{30.0}, Kernel::epanechnikov, 0.75);
    // Epanechnikov peak: 0.75 * (1/h) = 1.0 at the sample point.
    CHECK(unit.pdf(30.0) == doctest::Approx(1.0));
    const std::vector<DensityModel> densities = {unit};
    const std::vector<TripRecord> trips = {trip_with_tt(30.0)};
    const NllResult r = nll(densities, trips);
    CHECK(r.sum == doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("single trip under Normal(30, sd 2) at its mode") {
    const std::vector<DensityModel> densities = {
        DensityModel(Parametric{Family::normal, 30.0, 4.0})};
    const std::vector<TripRecord> trips = {trip_with_tt(30.0)};
    const NllResult r = nll(densities, trips);
    CHECK(r.mean == doctest::Approx(1.6120857137646178).epsilon(1e-9));
  }

  TEST_CASE("halving every density adds log 2 per trip") {
    // Doubling the KDE bandwidth beyond the data halves the peak value; use
    // explicit mixture weights instead: a two-component GMM with one empty
    // component at the same location halves nothing, so scale via bandwidth.
    const DensityModel base = fit_kde(std::vector<double>{30.0}, Kernel::gaussian, 1.0);
    const DensityModel half = fit_kde(std::vector<double>{30.0}, Kernel::gaussian, 2.0);
    const std::vector<TripRecord> trips = {trip_with_tt(30.0), trip_with_tt(30.0)};
    const std::vector<DensityModel> d1 = {base, base};
    const std::vector<DensityModel> d2 = {half, half};
    const NllResult a = nll(d1, trips);
    const NllResult b = nll(d2, trips);
    CHECK(b.mean - a.mean == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }

  TEST_CASE("nll is additive over disjoint trip sets") {
    Rng rng(271);
    std::vector<DensityModel> densities;
    std::vector<TripRecord> trips;
    for (int i = 0; i < 40; ++i) {
      densities.push_back(DensityModel(Parametric{Family::normal, 30 + rng.uniform(-2, 2), 4.0}));
      trips.push_back(trip_with_tt(28.0 + rng.uniform(0, 4)));
    }
    const NllResult whole = nll(densities, trips);
    const NllResult first =
        nll(std::span(densities).first(15), std::span(trips).first(15));
    const NllResult rest =
        nll(std::span(densities).subspan(15), std::span(trips).subspan(15));
    CHECK(whole.sum == doctest::Approx(first.sum + rest.sum).epsilon(1e-12));
  }

  TEST_CASE("floor hits are counted and keep the NLL finite") {
    const std::vector<DensityModel> densities = {
        DensityModel(Parametric{Family::normal, 30.0, kVarianceFloor})};
    const std::vector<TripRecord> trips = {trip_with_tt(90.0)};  // far outside
    const NllResult r = nll(densities, trips);
    CHECK(r.floor_hits == 1);
    CHECK(std::isfinite(r.sum));
    CHECK(r.sum == doctest::Approx(-std::log(1e-12)));
  }
}

TEST_SUITE("tt_mse_op") {
  TEST_CASE("perfect and constant predictors") {
    std::vector<TripRecord> trips;
    std::vector<DensityModel> perfect;
    std::vector<double> tts = {28, 31, 30, 35, 29};
    for (const double tt : tts) {
      trips.push_back(trip_with_tt(tt));
      perfect.push_back(DensityModel(Parametric{Family::normal, tt, 1.0}));
    }
    CHECK(*tt_mse(perfect, trips) == doctest::Approx(0.0));

    const double mean = oracles::mean(tts);
    std::vector<DensityModel> constant(
        trips.size(), DensityModel(Parametric{Family::normal, mean, 1.0}));
    CHECK(*tt_mse(constant, trips) ==
          doctest::Approx(oracles::population_variance(tts)).epsilon(1e-12));
  }

  TEST_CASE("matches an independent shifted-accumulation computation") {
    Rng rng(277);
    std::vector<TripRecord> trips;
    std::vector<DensityModel> densities;
    for (int i = 0; i < 100; ++i) {
      const double tt = 30 + rng.uniform(-5, 5);
      trips.push_back(trip_with_tt(tt));
      densities.push_back(DensityModel(Parametric{Family::normal, tt + rng.uniform(-1, 1), 1.0}));
    }
    // Oracle: two-pass computation around a shifted origin.
    double shift_sum = 0;
    for (std::size_t i = 0; i < trips.size(); ++i)
      shift_sum += *densities[i].mean() - trips[i].travel_time - 100.0;
    const double shift_mean = shift_sum / 100.0;
    double ss = 0;
    for (std::size_t i = 0; i < trips.size(); ++i) {
      const double e = *densities[i].mean() - trips[i].travel_time - 100.0;
      ss += (e - shift_mean) * (e - shift_mean);
    }
    const double oracle = ss / 100.0 + (shift_mean + 100.0) * (shift_mean + 100.0);
    CHECK(*tt_mse(densities, trips) == doctest::Approx(oracle).epsilon(1e-9));
  }

  TEST_CASE("all-undefined means give an empty result") {
    const std::vector<DensityModel> densities = {
        DensityModel(Parametric{Family::cauchy, 30.0, 2.0})};
    const std::vector<TripRecord> trips = {trip_with_tt(30.0)};
    CHECK_FALSE(tt_mse(densities, trips).has_value());
  }
}

TEST_SUITE("estimator_configs") {
  TEST_CASE("spec strings parse to stable ids") {
    const SimilarityMethod e = edtw60();
    const SimilarityMethod k = knn(13);
    CHECK(parse_estimator("kde:knn", e, k).id() == "kde:knn13");
    CHECK(parse_estimator("loglogistic:edtw", e, k).id() == "loglogistic:edtw60min");
    CHECK(parse_estimator("lrpc", e, k).id() == "lrpc");
    CHECK(parse_estimator("forest", e, k).id() == "forest");
    CHECK(parse_estimator("gmm:edtw5p", e, k).id() == "gmm3:edtw5p");
    CHECK(parse_estimator("normal:knn25", e, k).id() == "normal:knn25");
    CHECK_THROWS_AS(parse_estimator("kde", e, k), Error);
    CHECK_THROWS_AS(parse_estimator("forest:knn", e, k), Error);
    CHECK_THROWS_AS(parse_estimator("bogus:knn", e, k), Error);
  }
}

TEST_SUITE("compare_models") {
  TEST_CASE("identical configs produce identical rows; report is deterministic") {
    const DatasetSplit split = make_split(two_route_config(), 31);
    std::vector<EstimatorConfig> configs;
    configs.push_back(parse_estimator("normal:knn", edtw60(), knn(13)));
    configs.push_back(parse_estimator("normal:knn", edtw60(), knn(13)));
    configs.push_back(parse_estimator("kde:edtw", edtw60(), knn(13)));
    const MetricsReport a = compare_models(split, configs, 7, 1);
    const MetricsReport b = compare_models(split, configs, 7, 2);

    REQUIRE(a.rows.size() == 3);
    CHECK(a.rows[0].train.nll_mean == a.rows[1].train.nll_mean);
    CHECK(a.rows[0].test.nll_mean == a.rows[1].test.nll_mean);
    CHECK(metrics_report_to_json(a).dump() == metrics_report_to_json(b).dump());
  }

  TEST_CASE("cauchy rows are flagged mean-undefined; others carry an MSE") {
    const DatasetSplit split = make_split(two_route_config(), 37);
    std::vector<EstimatorConfig> configs;
    configs.push_back(parse_estimator("cauchy:knn", edtw60(), knn(13)));
    configs.push_back(parse_estimator("normal:knn", edtw60(), knn(13)));
    const MetricsReport r = compare_models(split, configs, 11, 2);
    CHECK(r.rows[0].mse_undefined);
    CHECK_FALSE(r.rows[0].test_mse.has_value());
    REQUIRE(r.rows[1].test_mse.has_value());
    CHECK(*r.rows[1].test_mse > 0.0);

    const std::string table = render_mse_table(r);
    CHECK(table.find("undef") != std::string::npos);
    const std::string compare = render_compare_table(r);
    CHECK(compare.find("Cauchy") != std::string::npos);
    CHECK(compare.find("Normal") != std::string::npos);
  }

  TEST_CASE("single-config failures are recorded, the run continues") {
    const DatasetSplit split = make_split(two_route_config(), 41);
    std::vector<EstimatorConfig> configs;
    EstimatorConfig bad = parse_estimator("lrpc", edtw60(), knn(13));
    bad.lrpc.min_route_trips = 1000000;  // forces zero fitted routes -> all skipped
    configs.push_back(bad);
    configs.push_back(parse_estimator("normal:edtw", edtw60(), knn(13)));
    const MetricsReport r = compare_models(split, configs, 13, 2);
    REQUIRE(r.rows.size() == 2);
    // The lrpc row scored nothing but did not abort the run.
    CHECK(r.rows[0].train.n == 0);
    CHECK(r.rows[1].error.empty());
    CHECK(r.rows[1].train.n > 0);
  }
}

TEST_SUITE("sweeps") {
  TEST_CASE("k equal to the route size selects the whole route") {
    const SynthConfig config = two_route_config();
    const std::vector<TripRecord> trips = generate(config, 43);
    const TrainingIndex index(trips);
    const TripRecord& q = trips[10];
    const std::size_t route_size = index.route_pool(q.route_id()).size();
    KnnSpec spec;
    spec.k = static_cast<int>(route_size);
    const KnnSelection sel = index.select_knn(q, spec);
    CHECK(sel.trips.size() == route_size);
    CHECK_FALSE(sel.short_sample);
    // Same multiset of travel times as the full pool.
    std::vector<double> a;
    std::vector<double> b;
    for (const auto& t : sel.trips) a.push_back(t.travel_time);
    for (const auto& t : index.route_pool(q.route_id())) b.push_back(t.travel_time);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }

  TEST_CASE("sweep_k improves on k=2 at the selected k") {
    const DatasetSplit split = make_split(two_route_config(), 47);
    std::vector<EstimatorConfig> estimators;
    estimators.push_back(parse_estimator("normal:knn", edtw60(), knn(13)));
    estimators.push_back(parse_estimator("kde:knn", edtw60(), knn(13)));
    const SweepKReport report = sweep_k(split, estimators, {2, 5, 13, 21}, 17, 2);
    for (const char* name : {"Normal", "KDE"}) {
      const auto best = report.best_k(name);
      REQUIRE(best.has_value());
      double at_best = 0;
      double at_two = 0;
      for (const SweepKCell& c : report.cells) {
        if (c.estimator != name) continue;
        if (c.k == *best) at_best = c.val_nll;
        if (c.k == 2) at_two = c.val_nll;
      }
      CHECK(at_best <= at_two);
    }
    CHECK(!render_k_series_csv(report).empty());
  }

  TEST_CASE("sweep_dtw reports cells for every estimator and mode") {
    const DatasetSplit split = make_split(two_route_config(), 53);
    std::vector<EstimatorConfig> estimators;
    estimators.push_back(parse_estimator("normal:edtw", edtw60(), knn(13)));
    estimators.push_back(parse_estimator("gmm:edtw", edtw60(), knn(13)));
    std::vector<DtwSpec> modes(3);
    modes[0].mode = DtwMode::five_periods;
    modes[1].mode = DtwMode::minutes;
    modes[1].window_minutes = 60;
    modes[2].mode = DtwMode::minutes;
    modes[2].window_minutes = 30;
    const SweepDtwReport report = sweep_dtw(split, estimators, modes, 19, 2);
    CHECK(report.cells.size() == 6);
    for (const SweepDtwCell& c : report.cells) {
      CHECK(c.error.empty());
      CHECK(std::isfinite(c.val_nll));
    }
    CHECK(render_dtw_table(report).find("5p") != std::string::npos);
  }
}
