#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bustt/rng.hpp"

#include "json.hpp"

namespace bustt {

// Scale floors shared by every estimator. The variance floor stops
// infinite-likelihood collapse on near-duplicate samples; the pdf floor keeps
// log_pdf finite outside a model's effective support (floor hits are counted
// by the evaluation layer).
constexpr double kVarianceFloor = 1e-4;  // min^2
constexpr double kPdfFloor = 1e-12;

enum class Family { normal, log_normal, logistic, log_logistic, gamma, cauchy };
enum class Kernel { gaussian, epanechnikov };

const char* to_string(Family f);
const char* to_string(Kernel k);
Family parse_family(const std::string& s);
Kernel parse_kernel(const std::string& s);

/// Kernel value K(u); integrates to one.
double kernel_value(Kernel k, double u);

// Model flags (bitmask).
constexpr std::uint32_t kFlagDegenerateSample = 1u << 0;  // scale hit the floor at fit time
constexpr std::uint32_t kFlagComponentFloored = 1u << 1;  // a mixture component collapsed
constexpr std::uint32_t kFlagUndersizedSample = 1u << 2;  // fewer points than requested

// Two-parameter families; meaning of (a, b):
//   normal        mu, variance
//   log_normal    mu, variance of log values
//   logistic      location, scale
//   log_logistic  scale alpha, shape beta
//   gamma         shape, scale
//   cauchy        location, scale
struct Parametric {
  Family family = Family::normal;
  double a = 0;
  double b = 1;
};

struct Gmm {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;
};

struct Kde {
  std::vector<double> sample;
  Kernel kernel = Kernel::gaussian;
  double bandwidth = 1.0;
};

struct SmoothedPmf {
  std::vector<double> pmf;  // class c covers [c + t_min, c + 1 + t_min)
  double t_min = 0;
  Kernel kernel = Kernel::gaussian;
  double bandwidth = 1.0;
};

struct SampleStats {
  std::uint64_t clamped = 0;  // non-positive draws clamped to 0.01 min
};

/// An evaluable / sampleable travel-time density (minutes).
class DensityModel {
public:
  using Variant = std::variant<Parametric, Gmm, Kde, SmoothedPmf>;

  DensityModel() = default;
  explicit DensityModel(Variant v, std::uint32_t flags = 0);

  double pdf(double t) const;
  /// log(max(pdf, kPdfFloor)); total on all inputs.
  double log_pdf(double t) const;
  /// Closed-form expected value; empty for Cauchy and for log-logistic shape <= 1.
  std::optional<double> mean() const;
  /// One draw; never returns a value below 0.01 min (clamps are counted in stats).
  double sample(Rng& rng, SampleStats* stats = nullptr) const;
  /// Interval holding all but <= ~1e-4 of the mass (integration / plotting grid).
  std::pair<double, double> support() const;

  const Variant& variant() const { return variant_; }
  std::uint32_t flags() const { return flags_; }
  void add_flags(std::uint32_t f) { flags_ |= f; }

private:
  Variant variant_ = Parametric{};
  std::uint32_t flags_ = 0;
};

// Maximum-likelihood fit. Normal and log-normal are closed form; logistic,
// log-logistic, gamma and Cauchy run a Nelder-Mead search from moment or
// quantile initialization, with scales optimized in log space. The achieved
// log-likelihood is never below the initialization's.
DensityModel fit_parametric(std::span<const double> sample, Family family);

struct GmmFit {
  DensityModel model;
  std::vector<double> log_likelihood_trace;  // one entry per EM iteration
};

/// EM until the improvement drops under `tol` or `max_iter` iterations.
/// With `restarts` > 1, independent seeded initializations run and the best
/// final log-likelihood wins (the trace is the winner's).
GmmFit fit_gmm_traced(std::span<const double> sample, int k, std::uint64_t seed,
                      double tol = 1e-6, int max_iter = 200, int restarts = 1);
DensityModel fit_gmm(std::span<const double> sample, int k, std::uint64_t seed);

DensityModel fit_kde(std::span<const double> sample, Kernel kernel, double bandwidth);

double log_likelihood(const DensityModel& model, std::span<const double> sample);

// JSON round-trip; exact for parameters and retained samples.
nlohmann::ordered_json density_to_json(const DensityModel& model);
DensityModel density_from_json(const nlohmann::ordered_json& j);

}  // namespace bustt
