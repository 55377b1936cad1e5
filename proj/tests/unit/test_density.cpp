#include <cmath>

#include "bustt/density.hpp"
#include "bustt/error.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

using namespace bustt;

namespace {

double integrate_model(const DensityModel& m, std::size_t n = 40000) {
  const auto [lo, hi] = m.support();
  return oracles::integrate([&m](double t) { return m.pdf(t); }, lo, hi, n);
}

std::vector<double> draw_sample(const DensityModel& m, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& x : out) x = m.sample(rng);
  return out;
}

}  // namespace

TEST_SUITE("parametric_fit") {
  TEST_CASE("normal closed form on {1,2,3}") {
    const std::vector<double> sample = {1, 2, 3};
    const DensityModel m = fit_parametric(sample, Family::normal);
    const auto& p = std::get<Parametric>(m.variant());
    CHECK(p.a == doctest::Approx(2.0));
    CHECK(p.b == doctest::Approx(2.0 / 3.0));
  }

  TEST_CASE("lognormal is the normal fit of the logs") {
    const std::vector<double> sample = {10, 20, 40};
    const DensityModel m = fit_parametric(sample, Family::log_normal);
    const auto& p = std::get<Parametric>(m.variant());
    const std::vector<double> logs = {std::log(10.0), std::log(20.0), std::log(40.0)};
    CHECK(p.a == doctest::Approx(oracles::mean(logs)));
    CHECK(p.b == doctest::Approx(oracles::population_variance(logs)));
  }

  TEST_CASE("gamma recovery within 5% on 10k draws") {
    Rng rng(101);
    std::vector<double> sample(10000);
    for (double& x : sample) x = 2.0 * rng.gamma(5.0);
    const DensityModel m = fit_parametric(sample, Family::gamma);
    const auto& p = std::get<Parametric>(m.variant());
    CHECK(p.a == doctest::Approx(5.0).epsilon(0.05));
    CHECK(p.b == doctest::Approx(2.0).epsilon(0.05));
  }

  TEST_CASE("cauchy fit: symmetric sample, beats its own initialization and a grid search") {
    std::vector<double> sample;
    for (int c = -5; c <= 5; ++c) sample.push_back(30.0 + c);
    const DensityModel m = fit_parametric(sample, Family::cauchy);
    const auto& p = std::get<Parametric>(m.variant());
    CHECK(p.a == doctest::Approx(30.0).epsilon(0.01));

    const auto nll = [&sample](double loc, double scale) {
      double s = 0;
      for (const double x : sample) {
        const double z = (x - loc) / scale;
        s += std::log(M_PI * scale * (1.0 + z * z));
      }
      return s;
    };
    // Initialization: median and half-IQR.
    const double init_nll = nll(30.0, 2.5);
    const double fit_nll = nll(p.a, p.b);
    CHECK(fit_nll <= init_nll);
    const auto [gx, gy, grid_nll] = oracles::grid_argmin(nll, 29.0, 31.0, 0.5, 6.0, 200);
    CHECK(fit_nll <= grid_nll + 1e-6);
  }

  TEST_CASE("logistic and loglogistic improve on moment and quantile starts") {
    Rng rng(103);
    std::vector<double> sample(4000);
    for (double& x : sample) {
      const double u = rng.uniform_pos();
      x = 35.0 + 2.0 * std::log(u / (1.0 - u));  // logistic(35, 2)
    }
    const DensityModel m = fit_parametric(sample, Family::logistic);
    const auto& p = std::get<Parametric>(m.variant());
    CHECK(p.a == doctest::Approx(35.0).epsilon(0.01));
    CHECK(p.b == doctest::Approx(2.0).epsilon(0.05));

    std::vector<double> ll_sample(4000);
    for (double& x : ll_sample) {
      const double u = rng.uniform_pos();
      x = 30.0 * std::pow(u / (1.0 - u), 1.0 / 8.0);  // loglogistic(alpha 30, beta 8)
    }
    const DensityModel m2 = fit_parametric(ll_sample, Family::log_logistic);
    const auto& p2 = std::get<Parametric>(m2.variant());
    CHECK(p2.a == doctest::Approx(30.0).epsilon(0.02));
    CHECK(p2.b == doctest::Approx(8.0).epsilon(0.10));
  }

  TEST_CASE("degenerate samples come back flagged with a floored scale") {
    const std::vector<double> sample = {30, 30, 30, 30};
    for (const Family f : {Family::normal, Family::log_normal, Family::logistic,
                           Family::log_logistic, Family::gamma, Family::cauchy}) {
      const DensityModel m = fit_parametric(sample, f);
      CHECK((m.flags() & kFlagDegenerateSample) != 0);
      // Floored scales make very spiky densities; integrate on a dense grid.
      CHECK(integrate_model(m, 2000000) == doctest::Approx(1.0).epsilon(2e-3));
    }
  }

  TEST_CASE("log families reject non-positive samples") {
    const std::vector<double> bad = {5.0, -1.0, 3.0};
    CHECK_THROWS_AS(fit_parametric(bad, Family::log_normal), Error);
    CHECK_THROWS_AS(fit_parametric(bad, Family::log_logistic), Error);
    CHECK_THROWS_AS(fit_parametric(bad, Family::gamma), Error);
  }

  TEST_CASE("a sample of one is rejected") {
    const std::vector<double> one = {30.0};
    CHECK_THROWS_AS(fit_parametric(one, Family::normal), Error);
  }
}

TEST_SUITE("pdf_and_mean") {
  TEST_CASE("normal mode value") {
    const DensityModel m(Parametric{Family::normal, 30.0, 4.0});  // sigma 2
    CHECK(m.pdf(30.0) == doctest::Approx(0.19947114020071635).epsilon(1e-12));
    CHECK(*m.mean() == 30.0);
  }

  TEST_CASE("log families vanish at non-positive points") {
    const DensityModel m(Parametric{Family::log_normal, 3.0, 0.25});
    CHECK(m.pdf(-1.0) == 0.0);
    CHECK(m.log_pdf(-1.0) == doctest::Approx(std::log(1e-12)));
  }

  TEST_CASE("pdf and log_pdf stay consistent on random evaluations") {
    Rng rng(107);
    const DensityModel models[] = {
        DensityModel(Parametric{Family::normal, 30, 4}),
        DensityModel(Parametric{Family::gamma, 25, 1.3}),
        DensityModel(Parametric{Family::cauchy, 30, 2}),
        fit_kde(std::vector<double>{28, 30, 31, 35}, Kernel::gaussian, 1.0),
    };
    for (const DensityModel& m : models) {
      for (int i = 0; i < 200; ++i) {
        const double t = rng.uniform(-50, 150);
        const double p = m.pdf(t);
        CHECK(std::abs(std::exp(m.log_pdf(t)) - std::max(p, 1e-12)) < 1e-12);
        CHECK(p >= 0.0);
      }
    }
  }

  TEST_CASE("means: closed forms, undefined cases, sampling agreement") {
    CHECK(*DensityModel(Parametric{Family::gamma, 5, 2}).mean() == doctest::Approx(10.0));
    CHECK(*DensityModel(Parametric{Family::logistic, 33, 2}).mean() == 33.0);
    CHECK_FALSE(DensityModel(Parametric{Family::cauchy, 30, 2}).mean().has_value());
    CHECK_FALSE(DensityModel(Parametric{Family::log_logistic, 30, 0.9}).mean().has_value());

    // Log-normal: 100k draws land within 1% of exp(mu + var/2).
    const DensityModel ln(Parametric{Family::log_normal, 3.4, 0.04});
    const std::vector<double> draws = draw_sample(ln, 100000, 109);
    CHECK(oracles::mean(draws) ==
          doctest::Approx(std::exp(3.4 + 0.02)).epsilon(0.01));

    // Log-logistic closed form checked against quadrature.
    const DensityModel llm(Parametric{Family::log_logistic, 30, 6});
    const double quad = oracles::integrate([&](double t) { return t * llm.pdf(t); }, 0.0, 3000.0,
                                           400000);
    CHECK(*llm.mean() == doctest::Approx(quad).epsilon(1e-3));
  }

  TEST_CASE("sampling is seed-deterministic and clamps negatives") {
    const DensityModel wide(Parametric{Family::normal, 0.5, 100.0});
    Rng a(77);
    Rng b(77);
    SampleStats stats;
    for (int i = 0; i < 500; ++i) {
      const double x = wide.sample(a, &stats);
      CHECK(x == wide.sample(b));
      CHECK(x >= 0.01);
    }
    CHECK(stats.clamped > 0);
  }
}

TEST_SUITE("kde") {
  TEST_CASE("single point, gaussian kernel, h=1 peaks at 1/sqrt(2pi)") {
    const DensityModel m = fit_kde(std::vector<double>{30.0}, Kernel::gaussian, 1.0);
    CHECK(m.pdf(30.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
  }

  TEST_CASE("two points {28,32}, h=1: pdf(30) equals the kernel value at 2") {
    const DensityModel m = fit_kde(std::vector<double>{28.0, 32.0}, Kernel::gaussian, 1.0);
    CHECK(m.pdf(30.0) == doctest::Approx(0.05399096651318806).epsilon(1e-12));
  }

  TEST_CASE("normalization for both kernels") {
    Rng rng(113);
    std::vector<double> sample(40);
    for (double& x : sample) x = 30.0 + 3.0 * rng.normal();
    for (const Kernel k : {Kernel::gaussian, Kernel::epanechnikov}) {
      for (const double h : {0.25, 1.0, 4.0}) {
        CHECK(integrate_model(fit_kde(sample, k, h)) == doctest::Approx(1.0).epsilon(1e-3));
      }
    }
  }

  TEST_CASE("the bandwidth-selected KDE beats the uniform baseline in-sample") {
    Rng rng(127);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> sample(10 + rng.below(50));
      for (double& x : sample) x = 30.0 + 4.0 * rng.normal();
      const auto [mn, mx] = std::minmax_element(sample.begin(), sample.end());
      const double uniform_nll =
          static_cast<double>(sample.size()) * std::log(*mx - *mn);
      double best = std::numeric_limits<double>::infinity();
      for (const Kernel k : {Kernel::gaussian, Kernel::epanechnikov}) {
        for (const double h : {0.25, 0.5, 1.0, 2.0, 4.0}) {
          best = std::min(best, -log_likelihood(fit_kde(sample, k, h), sample));
        }
      }
      CHECK(best <= uniform_nll);
    }
  }

  TEST_CASE("rejects an empty sample or non-positive bandwidth") {
    CHECK_THROWS_AS(fit_kde(std::vector<double>{}, Kernel::gaussian, 1.0), Error);
    CHECK_THROWS_AS(fit_kde(std::vector<double>{30.0}, Kernel::gaussian, 0.0), Error);
  }
}

TEST_SUITE("gmm") {
  TEST_CASE("K=1 equals the closed-form normal fit") {
    Rng rng(131);
    std::vector<double> sample(500);
    for (double& x : sample) x = 40.0 + 5.0 * rng.normal();
    const DensityModel em = fit_gmm(sample, 1, 7);
    const DensityModel mle = fit_parametric(sample, Family::normal);
    const auto& g = std::get<Gmm>(em.variant());
    const auto& p = std::get<Parametric>(mle.variant());
    CHECK(g.weights[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(g.means[0] == doctest::Approx(p.a).epsilon(1e-6));
    CHECK(g.variances[0] == doctest::Approx(p.b).epsilon(1e-6));
  }

  TEST_CASE("balanced two-component mixture is recovered on 5000 points") {
    Rng rng(137);
    std::vector<double> sample;
    for (int i = 0; i < 2500; ++i) sample.push_back(20.0 + rng.normal());
    for (int i = 0; i < 2500; ++i) sample.push_back(40.0 + rng.normal());
    const DensityModel m = fit_gmm(sample, 2, 11);
    auto g = std::get<Gmm>(m.variant());
    if (g.means[0] > g.means[1]) {
      std::swap(g.means[0], g.means[1]);
      std::swap(g.weights[0], g.weights[1]);
    }
    CHECK(g.means[0] == doctest::Approx(20.0).epsilon(0.025));
    CHECK(g.means[1] == doctest::Approx(40.0).epsilon(0.0125));
    CHECK(g.weights[0] == doctest::Approx(0.5).epsilon(0.1));
    CHECK(g.weights[0] + g.weights[1] == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("log-likelihood trace never decreases") {
    Rng rng(139);
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> sample(200);
      for (double& x : sample)
        x = (rng.uniform() < 0.3 ? 25.0 : 45.0) + 2.0 * rng.normal();
      const GmmFit fit = fit_gmm_traced(sample, 3, static_cast<std::uint64_t>(rep));
      for (std::size_t i = 1; i < fit.log_likelihood_trace.size(); ++i) {
        CHECK(fit.log_likelihood_trace[i] >= fit.log_likelihood_trace[i - 1] - 1e-9);
      }
    }
  }

  TEST_CASE("seeded determinism") {
    Rng rng(149);
    std::vector<double> sample(300);
    for (double& x : sample) x = 30.0 + 5.0 * rng.normal();
    const DensityModel a = fit_gmm(sample, 3, 42);
    const DensityModel b = fit_gmm(sample, 3, 42);
    CHECK(density_to_json(a).dump() == density_to_json(b).dump());
    const DensityModel c = fit_gmm(sample, 3, 43);
    CHECK(density_to_json(a).dump() != density_to_json(c).dump());
  }

  TEST_CASE("extra restarts never end with a worse likelihood") {
    Rng rng(151);
    std::vector<double> sample;
    for (int i = 0; i < 300; ++i)
      sample.push_back((rng.uniform() < 0.2 ? 22.0 : 41.0) + 1.5 * rng.normal());
    const GmmFit one = fit_gmm_traced(sample, 3, 77);
    const GmmFit five = fit_gmm_traced(sample, 3, 77, 1e-6, 200, 5);
    CHECK(five.log_likelihood_trace.back() >= one.log_likelihood_trace.back());
  }

  TEST_CASE("component collapse clamps to the floor and flags") {
    // Two far-apart tight clumps plus K=2 forces near-zero variances.
    std::vector<double> sample = {30, 30, 30, 30, 50, 50, 50, 50};
    const DensityModel m = fit_gmm(sample, 2, 5);
    const auto& g = std::get<Gmm>(m.variant());
    for (const double v : g.variances) CHECK(v >= kVarianceFloor);
    CHECK((m.flags() & kFlagComponentFloored) != 0);
  }
}

TEST_SUITE("normalization") {
  TEST_CASE("every variant integrates to one on its support grid") {
    Rng rng(151);
    std::vector<double> sample(60);
    for (double& x : sample) x = 35.0 + 4.0 * rng.normal();

    std::vector<DensityModel> models;
    for (const Family f : {Family::normal, Family::log_normal, Family::logistic,
                           Family::log_logistic, Family::gamma, Family::cauchy}) {
      models.push_back(fit_parametric(sample, f));
    }
    models.push_back(fit_gmm(sample, 3, 3));
    models.push_back(fit_kde(sample, Kernel::epanechnikov, 0.5));
    {
      SmoothedPmf sp;
      sp.pmf = {0.25, 0.5, 0.25};
      sp.t_min = 30;
      sp.kernel = Kernel::gaussian;
      sp.bandwidth = 1.0;
      models.emplace_back(std::move(sp));
    }
    for (const DensityModel& m : models) {
      const std::size_t n = std::get_if<Parametric>(&m.variant()) &&
                                    std::get<Parametric>(m.variant()).family == Family::cauchy
                                ? 2000000
                                : 40000;
      CHECK(integrate_model(m, n) == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
}

TEST_SUITE("density_json") {
  TEST_CASE("round-trip is exact for every variant") {
    Rng rng(157);
    std::vector<double> sample(17);
    for (double& x : sample) x = 30.0 + rng.normal();

    std::vector<DensityModel> models;
    models.push_back(fit_parametric(sample, Family::gamma));
    models.push_back(fit_gmm(sample, 2, 9));
    models.push_back(fit_kde(sample, Kernel::gaussian, 0.7));
    {
      SmoothedPmf sp;
      sp.pmf = {0.125, 0.25, 0.5, 0.125};
      sp.t_min = 28;
      sp.kernel = Kernel::epanechnikov;
      sp.bandwidth = 2.0;
      models.emplace_back(std::move(sp), kFlagUndersizedSample);
    }
    for (const DensityModel& m : models) {
      const auto j = density_to_json(m);
      const DensityModel back = density_from_json(j);
      CHECK(density_to_json(back).dump() == j.dump());
      CHECK(back.flags() == m.flags());
      // Bit-exact evaluation after the round trip.
      for (double t = 20; t <= 45; t += 0.625) CHECK(back.pdf(t) == m.pdf(t));
    }
  }
}
