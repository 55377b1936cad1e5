#include <cmath>

#include "bustt/delay.hpp"
#include "bustt/error.hpp"
#include "bustt/rng.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

using namespace bustt;

namespace {

VehicleSchedule make_schedule(const std::vector<double>& departures,
                              const std::vector<double>& connections, double q = 0,
                              double beta = 0) {
  VehicleSchedule s;
  for (std::size_t i = 0; i < departures.size(); ++i) {
    ScheduledTrip t;
    t.trip_id = "v" + std::to_string(i + 1);
    t.planned_departure = departures[i];
    t.min_connection_before = i == 0 ? 0.0 : connections[i - 1];
    s.trips.push_back(std::move(t));
  }
  s.planned_cost = q;
  s.delay_weight = beta;
  return s;
}

DensityModel point_mass(double value) {
  return DensityModel(Parametric{Family::normal, value, kVarianceFloor});
}

}  // namespace

TEST_SUITE("realized_recursion") {
  TEST_CASE("generous slack absorbs everything") {
    const VehicleSchedule s = make_schedule({0, 100, 200}, {5, 5});
    const std::vector<double> tts = {30, 30};
    const RealizedTimes r = realized_departures(s, tts);
    CHECK(r.departures == std::vector<double>{0, 100, 200});
    CHECK(r.secondary_delays == std::vector<double>{0, 0, 0});
  }

  TEST_CASE("two trips, hand recursion: D2 = max(0+40+5, 30) = 45") {
    const VehicleSchedule s = make_schedule({0, 30}, {5});
    const std::vector<double> tts = {40};
    const RealizedTimes r = realized_departures(s, tts);
    CHECK(r.departures == std::vector<double>{0, 45});
    CHECK(r.arrivals == std::vector<double>{40});
    CHECK(r.secondary_delays == std::vector<double>{0, 15});
  }

  TEST_CASE("five-trip chain with mixed slack matches the recorded trace") {
    // d=(0,30,60,90,120), l=(5,5,10,0), t=(40,25,45,20):
    //   D = (0,45,75,130,150), A = (40,70,120,150), r = (0,15,15,40,30).
    const VehicleSchedule s = make_schedule({0, 30, 60, 90, 120}, {5, 5, 10, 0});
    const std::vector<double> tts = {40, 25, 45, 20};
    const RealizedTimes r = realized_departures(s, tts);
    CHECK(r.departures == std::vector<double>{0, 45, 75, 130, 150});
    CHECK(r.arrivals == std::vector<double>{40, 70, 120, 150});
    CHECK(r.secondary_delays == std::vector<double>{0, 15, 15, 40, 30});
  }

  TEST_CASE("length mismatch and non-positive travel times are errors") {
    const VehicleSchedule s = make_schedule({0, 30}, {5});
    CHECK_THROWS_AS(realized_departures(s, std::vector<double>{40, 40}), Error);
    CHECK_THROWS_AS(realized_departures(s, std::vector<double>{-1}), Error);
  }

  TEST_CASE("increasing any earlier travel time never decreases later departures") {
    Rng rng(61);
    const VehicleSchedule s = make_schedule({0, 25, 55, 80, 110}, {3, 4, 2, 6});
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> tts(4);
      for (double& t : tts) t = rng.uniform(10, 45);
      const RealizedTimes base = realized_departures(s, tts);
      const std::size_t j = rng.below(4);
      std::vector<double> bumped = tts;
      bumped[j] += rng.uniform(0, 10);
      const RealizedTimes more = realized_departures(s, bumped);
      for (std::size_t i = 0; i < 5; ++i) {
        CHECK(more.departures[i] >= base.departures[i] - 1e-12);
        CHECK(base.secondary_delays[i] >= 0.0);
      }
    }
  }
}

TEST_SUITE("expected_delay_mc") {
  TEST_CASE("degenerate densities reproduce the deterministic recursion") {
    const VehicleSchedule s = make_schedule({0, 30, 60}, {5, 5});
    const std::vector<DensityModel> densities = {point_mass(40), point_mass(25)};
    const DelayProfile p = expected_secondary_delay_mc(s, densities, 4000, 5);
    const std::vector<double> exact =
        realized_secondary_delays(s, std::vector<double>{40, 25});
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::abs(p.expected_delay[i] - exact[i]) <=
            3.0 * p.standard_error[i] + 1e-9);
    }
    CHECK(p.expected_delay[0] == 0.0);
  }

  TEST_CASE("single-predecessor case matches 1-D quadrature within 1%") {
    // Two trips, d=(0,30), l=0, T1 ~ KDE over {20..40}: E(R2) = E[max(T1-30,0)].
    const VehicleSchedule s = make_schedule({0, 30}, {0});
    std::vector<double> pts;
    for (int v = 20; v <= 40; ++v) pts.push_back(v);
    const DensityModel kde = fit_kde(pts, Kernel::gaussian, 1.0);

    const auto [lo, hi] = kde.support();
    const double oracle = oracles::integrate(
        [&](double t) { return std::max(t - 30.0, 0.0) * kde.pdf(t); }, lo, hi, 200000);

    const std::vector<DensityModel> densities = {kde};
    const DelayProfile p = expected_secondary_delay_mc(s, densities, 200000, 7);
    CHECK(p.expected_delay[1] == doctest::Approx(oracle).epsilon(0.01));
  }

  TEST_CASE("four-trip chain with two-point laws matches exhaustive enumeration") {
    const VehicleSchedule s = make_schedule({0, 28, 56, 84}, {2, 2, 2});
    // Each T in {25, 40} with probability 1/2, as a floored two-component mixture.
    const auto two_point = [](double a, double b) {
      Gmm g;
      g.weights = {0.5, 0.5};
      g.means = {a, b};
      g.variances = {kVarianceFloor, kVarianceFloor};
      return DensityModel(std::move(g));
    };
    const std::vector<DensityModel> densities = {two_point(25, 40), two_point(25, 40),
                                                 two_point(25, 40)};

    std::vector<double> expected(4, 0.0);
    oracles::enumerate_two_point(
        {{25, 40}, {25, 40}, {25, 40}},
        [&](const std::vector<double>& draw, double prob) {
          const std::vector<double> r = realized_secondary_delays(s, draw);
          for (std::size_t i = 0; i < 4; ++i) expected[i] += prob * r[i];
        });

    const DelayProfile p = expected_secondary_delay_mc(s, densities, 10000, 11);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(p.expected_delay[i] - expected[i]) <=
            3.0 * p.standard_error[i] + 0.02);
    }
  }

  TEST_CASE("standard error shrinks like one over sqrt(n)") {
    const VehicleSchedule s = make_schedule({0, 30}, {0});
    const std::vector<DensityModel> densities = {
        DensityModel(Parametric{Family::normal, 32, 16})};
    double prev_se = 0;
    bool first = true;
    for (const std::size_t n : {std::size_t{100}, std::size_t{1000}, std::size_t{10000}}) {
      const DelayProfile p = expected_secondary_delay_mc(s, densities, n, 13);
      if (!first) {
        const double ratio = prev_se / p.standard_error[1];
        CHECK(ratio > std::sqrt(10.0) / 2.0);  // within a x2 band of sqrt(10)
        CHECK(ratio < std::sqrt(10.0) * 2.0);
      }
      prev_se = p.standard_error[1];
      first = false;
    }
  }

  TEST_CASE("serial and OpenMP replicate kernels produce identical bytes") {
    const VehicleSchedule s = make_schedule({0, 25, 50, 80}, {2, 3, 4});
    const std::vector<DensityModel> densities = {
        DensityModel(Parametric{Family::normal, 27, 9}),
        DensityModel(Parametric{Family::gamma, 100, 0.3}),
        DensityModel(Parametric{Family::logistic, 29, 1.5})};
    std::vector<double> d_serial;
    std::vector<double> d_omp;
    std::vector<std::uint64_t> c_serial;
    std::vector<std::uint64_t> c_omp;
    mc_delay_replicates_serial(s, densities, 5000, 17, d_serial, c_serial);
    mc_delay_replicates_omp(s, densities, 5000, 17, d_omp, c_omp, 4);
    CHECK(d_serial == d_omp);
    CHECK(c_serial == c_omp);

    const DelayProfile p1 = expected_secondary_delay_mc(s, densities, 5000, 17, 1);
    const DelayProfile p4 = expected_secondary_delay_mc(s, densities, 5000, 17, 4);
    CHECK(p1.expected_delay == p4.expected_delay);
    CHECK(p1.standard_error == p4.standard_error);
  }

  TEST_CASE("clamped draws are counted") {
    const VehicleSchedule s = make_schedule({0, 30}, {0});
    const std::vector<DensityModel> densities = {
        DensityModel(Parametric{Family::cauchy, 5, 30})};  // heavy tails, often negative
    const DelayProfile p = expected_secondary_delay_mc(s, densities, 2000, 19);
    CHECK(p.clamped_draws > 0);
  }
}

TEST_SUITE("schedule_cost") {
  TEST_CASE("weight zero and zero delays leave the planned cost") {
    const VehicleSchedule s0 = make_schedule({0, 100}, {5}, 100.0, 0.0);
    DelayProfile p;
    p.expected_delay = {0, 7.5};
    p.standard_error = {0, 0.1};
    CHECK(schedule_cost(s0, p) == 100.0);

    const VehicleSchedule s1 = make_schedule({0, 100}, {5}, 100.0, 2.0);
    DelayProfile zeros;
    zeros.expected_delay = {0, 0};
    zeros.standard_error = {0, 0};
    CHECK(schedule_cost(s1, zeros) == 100.0);
  }

  TEST_CASE("q=100, beta=2, total delay 7.5 costs 115") {
    const VehicleSchedule s = make_schedule({0, 50, 100}, {5, 5}, 100.0, 2.0);
    DelayProfile p;
    p.expected_delay = {0, 3.0, 4.5};
    p.standard_error = {0, 0, 0};
    CHECK(schedule_cost(s, p) == doctest::Approx(115.0));
  }
}

TEST_SUITE("delay_mse") {
  TEST_CASE("perfect predictions score zero; the zero predictor scores mean of r^2") {
    const std::vector<double> realized = {0, 3, 1, 7};
    CHECK(delay_mse(realized, realized) == 0.0);
    const std::vector<double> zeros(4, 0.0);
    CHECK(delay_mse(zeros, realized) == doctest::Approx((9.0 + 1.0 + 49.0) / 4.0));
  }

  TEST_CASE("oracle densities beat a five-minute-biased predictor end to end") {
    Rng rng(67);
    const VehicleSchedule s = make_schedule({0, 30, 62, 95}, {2, 2, 2});
    const DensityModel law(Parametric{Family::normal, 31, 9});
    const std::vector<DensityModel> oracle = {law, law, law};
    const DensityModel shifted(Parametric{Family::normal, 36, 9});
    const std::vector<DensityModel> biased = {shifted, shifted, shifted};

    const DelayProfile oracle_profile = expected_secondary_delay_mc(s, oracle, 20000, 23);
    const DelayProfile biased_profile = expected_secondary_delay_mc(s, biased, 20000, 23);

    // Realize many schedule days from the true law and average the MSEs.
    double oracle_mse = 0;
    double biased_mse = 0;
    const int days = 400;
    for (int rep = 0; rep < days; ++rep) {
      std::vector<double> tts(3);
      for (double& t : tts) t = std::max(0.01, 31.0 + 3.0 * rng.normal());
      const std::vector<double> r = realized_secondary_delays(s, tts);
      oracle_mse += delay_mse(oracle_profile.expected_delay, r);
      biased_mse += delay_mse(biased_profile.expected_delay, r);
    }
    CHECK(oracle_mse / days < biased_mse / days);
  }

  TEST_CASE("mismatched lengths are an error") {
    const std::vector<double> a = {1, 2};
    const std::vector<double> b = {1, 2, 3};
    CHECK_THROWS_AS(delay_mse(a, b), Error);
  }
}

TEST_SUITE("schedule_json") {
  TEST_CASE("schedule and profile serialize round-trip") {
    const VehicleSchedule s = make_schedule({0, 30, 60}, {5, 10}, 100, 2);
    const VehicleSchedule back = schedule_from_json(schedule_to_json(s));
    CHECK(back.trips.size() == 3);
    CHECK(back.trips[2].min_connection_before == 10.0);
    CHECK(back.planned_cost == 100.0);
    CHECK(back.delay_weight == 2.0);

    const std::vector<DensityModel> densities = {point_mass(40), point_mass(25)};
    const DelayProfile p = expected_secondary_delay_mc(s, densities, 100, 3);
    const auto j = profile_to_json(s, p);
    CHECK(j.at("trips").size() == 3);
    CHECK(j.at("samples") == 100);
    CHECK(j.contains("schedule_cost"));
  }
}
