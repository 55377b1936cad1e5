#include "bustt/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bustt/error.hpp"

namespace bustt {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt2Pi = 2.50662827463100050242;
constexpr double kScaleFloor = 1e-2;  // sqrt of kVarianceFloor, for scale-parametrized families

double sq(double x) { return x * x; }

double logsumexp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (const double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0;
  for (const double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Type-7 quantile (linear interpolation) of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct Moments {
  double mean = 0;
  double var = 0;  // population variance
};

Moments moments(std::span<const double> sample) {
  Moments m;
  for (const double x : sample) m.mean += x;
  m.mean /= static_cast<double>(sample.size());
  for (const double x : sample) m.var += sq(x - m.mean);
  m.var /= static_cast<double>(sample.size());
  return m;
}

// ---------------------------------------------------------------------------
// Per-family log densities.

double normal_log_pdf(double x, double mu, double var) {
  return -0.5 * (std::log(2.0 * kPi * var) + sq(x - mu) / var);
}

double log_normal_log_pdf(double x, double mu, double var) {
  if (x <= 0) return -std::numeric_limits<double>::infinity();
  const double lx = std::log(x);
  return normal_log_pdf(lx, mu, var) - lx;
}

double logistic_log_pdf(double x, double loc, double s) {
  const double z = std::abs(x - loc) / s;
  return -z - 2.0 * std::log1p(std::exp(-z)) - std::log(s);
}

double log_logistic_log_pdf(double x, double alpha, double beta) {
  if (x <= 0) return -std::numeric_limits<double>::infinity();
  const double w = beta * (std::log(x) - std::log(alpha));
  // log f = log(beta/alpha) + (beta-1)(log x - log alpha) - 2 log(1 + e^w)
  const double softplus = w > 0 ? w + std::log1p(std::exp(-w)) : std::log1p(std::exp(w));
  return std::log(beta / alpha) + w * (beta - 1.0) / beta - 2.0 * softplus;
}

double gamma_log_pdf(double x, double shape, double scale) {
  if (x <= 0) return -std::numeric_limits<double>::infinity();
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) -
         shape * std::log(scale);
}

double cauchy_log_pdf(double x, double loc, double gamma) {
  return -std::log(kPi * gamma * (1.0 + sq((x - loc) / gamma)));
}

double family_log_pdf(Family f, double x, double a, double b) {
  switch (f) {
    case Family::normal: return normal_log_pdf(x, a, b);
    case Family::log_normal: return log_normal_log_pdf(x, a, b);
    case Family::logistic: return logistic_log_pdf(x, a, b);
    case Family::log_logistic: return log_logistic_log_pdf(x, a, b);
    case Family::gamma: return gamma_log_pdf(x, a, b);
    case Family::cauchy: return cauchy_log_pdf(x, a, b);
  }
  return -std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Nelder-Mead minimization (d <= 2 here). Keeps the best vertex ever seen, so
// the result is never worse than the starting point.

struct SimplexResult {
  std::vector<double> x;
  double f = 0;
};

template <typename Fn>
SimplexResult nelder_mead(const Fn& fn, std::vector<double> x0, const std::vector<double>& steps,
                          int max_iter = 400, double tol = 1e-11) {
  const std::size_t d = x0.size();
  std::vector<std::vector<double>> pts(d + 1, x0);
  std::vector<double> fv(d + 1);
  for (std::size_t i = 0; i < d; ++i) pts[i + 1][i] += steps[i];
  for (std::size_t i = 0; i <= d; ++i) fv[i] = fn(pts[i]);

  std::vector<std::size_t> order(d + 1);
  for (int iter = 0; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&fv](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[d - 1];
    if (std::abs(fv[worst] - fv[best]) <= tol * (1.0 + std::abs(fv[best]))) break;

    std::vector<double> centroid(d, 0.0);
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < d; ++j) centroid[j] += pts[i][j];
    }
    for (double& c : centroid) c /= static_cast<double>(d);

    const auto blend = [&](double coef) {
      std::vector<double> p(d);
      for (std::size_t j = 0; j < d; ++j)
        p[j] = centroid[j] + coef * (pts[worst][j] - centroid[j]);
      return p;
    };

    const std::vector<double> reflected = blend(-1.0);
    const double fr = fn(reflected);
    if (fr < fv[best]) {
      const std::vector<double> expanded = blend(-2.0);
      const double fe = fn(expanded);
      if (fe < fr) {
        pts[worst] = expanded;
        fv[worst] = fe;
      } else {
        pts[worst] = reflected;
        fv[worst] = fr;
      }
    } else if (fr < fv[second_worst]) {
      pts[worst] = reflected;
      fv[worst] = fr;
    } else {
      const std::vector<double> contracted = blend(fr < fv[worst] ? -0.5 : 0.5);
      const double fc = fn(contracted);
      if (fc < std::min(fr, fv[worst])) {
        pts[worst] = contracted;
        fv[worst] = fc;
      } else {
        // Shrink toward the best vertex.
        for (std::size_t i = 0; i <= d; ++i) {
          if (i == best) continue;
          for (std::size_t j = 0; j < d; ++j)
            pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
          fv[i] = fn(pts[i]);
        }
      }
    }
  }

  const std::size_t best =
      static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {pts[best], fv[best]};
}

double sample_nll(Family f, std::span<const double> sample, double a, double b) {
  double nll = 0;
  for (const double x : sample) nll -= family_log_pdf(f, x, a, b);
  return std::isfinite(nll) ? nll : std::numeric_limits<double>::max() / 4;
}

// ---------------------------------------------------------------------------
// Kernel noise draw with mean zero and the kernel's own shape.

double kernel_noise(Kernel k, Rng& rng) {
  if (k == Kernel::gaussian) return rng.normal();
  // Epanechnikov: the median of three U(-1,1) draws.
  double a = rng.uniform(-1.0, 1.0);
  double b = rng.uniform(-1.0, 1.0);
  double c = rng.uniform(-1.0, 1.0);
  const double lo = std::min({a, b, c});
  const double hi = std::max({a, b, c});
  return a + b + c - lo - hi;
}

double kernel_tail_halfwidth(Kernel k, double h) {
  return k == Kernel::gaussian ? 9.0 * h : h;
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(Family f) {
  switch (f) {
    case Family::normal: return "normal";
    case Family::log_normal: return "lognormal";
    case Family::logistic: return "logistic";
    case Family::log_logistic: return "loglogistic";
    case Family::gamma: return "gamma";
    case Family::cauchy: return "cauchy";
  }
  return "?";
}

const char* to_string(Kernel k) { return k == Kernel::gaussian ? "gaussian" : "epanechnikov"; }

Family parse_family(const std::string& s) {
  if (s == "normal") return Family::normal;
  if (s == "lognormal" || s == "log-normal") return Family::log_normal;
  if (s == "logistic") return Family::logistic;
  if (s == "loglogistic" || s == "log-logistic") return Family::log_logistic;
  if (s == "gamma") return Family::gamma;
  if (s == "cauchy") return Family::cauchy;
  throw_error(ErrorKind::invalid_argument, "unknown family: '" + s + "'");
}

Kernel parse_kernel(const std::string& s) {
  if (s == "gaussian") return Kernel::gaussian;
  if (s == "epanechnikov") return Kernel::epanechnikov;
  throw_error(ErrorKind::invalid_argument, "unknown kernel: '" + s + "'");
}

double kernel_value(Kernel k, double u) {
  if (k == Kernel::gaussian) return std::exp(-0.5 * u * u) / kSqrt2Pi;
  return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

DensityModel::DensityModel(Variant v, std::uint32_t flags)
    : variant_(std::move(v)), flags_(flags) {}

double DensityModel::pdf(double t) const {
  if (const auto* p = std::get_if<Parametric>(&variant_)) {
    const double lp = family_log_pdf(p->family, t, p->a, p->b);
    return std::isfinite(lp) ? std::exp(lp) : 0.0;
  }
  if (const auto* g = std::get_if<Gmm>(&variant_)) {
    double s = 0;
    for (std::size_t k = 0; k < g->weights.size(); ++k)
      s += g->weights[k] * std::exp(normal_log_pdf(t, g->means[k], g->variances[k]));
    return s;
  }
  if (const auto* kde = std::get_if<Kde>(&variant_)) {
    double s = 0;
    for (const double x : kde->sample) s += kernel_value(kde->kernel, (t - x) / kde->bandwidth);
    return s / (static_cast<double>(kde->sample.size()) * kde->bandwidth);
  }
  const auto& sp = std::get<SmoothedPmf>(variant_);
  double s = 0;
  for (std::size_t c = 0; c < sp.pmf.size(); ++c) {
    const double center = sp.t_min + static_cast<double>(c);
    s += sp.pmf[c] * kernel_value(sp.kernel, (t - center) / sp.bandwidth);
  }
  return s / sp.bandwidth;
}

double DensityModel::log_pdf(double t) const { return std::log(std::max(pdf(t), kPdfFloor)); }

std::optional<double> DensityModel::mean() const {
  if (const auto* p = std::get_if<Parametric>(&variant_)) {
    switch (p->family) {
      case Family::normal: return p->a;
      case Family::log_normal: return std::exp(p->a + 0.5 * p->b);
      case Family::logistic: return p->a;
      case Family::log_logistic: {
        const double beta = p->b;
        if (beta <= 1.0) return std::nullopt;
        return p->a * (kPi / beta) / std::sin(kPi / beta);
      }
      case Family::gamma: return p->a * p->b;
      case Family::cauchy: return std::nullopt;
    }
  }
  if (const auto* g = std::get_if<Gmm>(&variant_)) {
    double m = 0;
    for (std::size_t k = 0; k < g->weights.size(); ++k) m += g->weights[k] * g->means[k];
    return m;
  }
  if (const auto* kde = std::get_if<Kde>(&variant_)) {
    // Symmetric kernel noise has mean zero.
    double m = 0;
    for (const double x : kde->sample) m += x;
    return m / static_cast<double>(kde->sample.size());
  }
  const auto& sp = std::get<SmoothedPmf>(variant_);
  double m = 0;
  for (std::size_t c = 0; c < sp.pmf.size(); ++c)
    m += sp.pmf[c] * (sp.t_min + static_cast<double>(c));
  return m;
}

double DensityModel::sample(Rng& rng, SampleStats* stats) const {
  double draw = 0;
  if (const auto* p = std::get_if<Parametric>(&variant_)) {
    switch (p->family) {
      case Family::normal: draw = p->a + std::sqrt(p->b) * rng.normal(); break;
      case Family::log_normal: draw = std::exp(p->a + std::sqrt(p->b) * rng.normal()); break;
      case Family::logistic: {
        const double u = rng.uniform_pos();
        draw = p->a + p->b * std::log(u / (1.0 - u));
        break;
      }
      case Family::log_logistic: {
        const double u = rng.uniform_pos();
        draw = p->a * std::pow(u / (1.0 - u), 1.0 / p->b);
        break;
      }
      case Family::gamma: draw = p->b * rng.gamma(p->a); break;
      case Family::cauchy: {
        const double u = rng.uniform_pos();
        draw = p->a + p->b * std::tan(kPi * (u - 0.5));
        break;
      }
    }
  } else if (const auto* g = std::get_if<Gmm>(&variant_)) {
    const double u = rng.uniform();
    double acc = 0;
    std::size_t pick = g->weights.size() - 1;
    for (std::size_t k = 0; k < g->weights.size(); ++k) {
      acc += g->weights[k];
      if (u < acc) {
        pick = k;
        break;
      }
    }
    draw = g->means[pick] + std::sqrt(g->variances[pick]) * rng.normal();
  } else if (const auto* kde = std::get_if<Kde>(&variant_)) {
    const std::size_t j = static_cast<std::size_t>(rng.below(kde->sample.size()));
    draw = kde->sample[j] + kde->bandwidth * kernel_noise(kde->kernel, rng);
  } else {
    const auto& sp = std::get<SmoothedPmf>(variant_);
    const double u = rng.uniform();
    double acc = 0;
    std::size_t pick = sp.pmf.size() - 1;
    for (std::size_t c = 0; c < sp.pmf.size(); ++c) {
      acc += sp.pmf[c];
      if (u < acc) {
        pick = c;
        break;
      }
    }
    draw = sp.t_min + static_cast<double>(pick) + sp.bandwidth * kernel_noise(sp.kernel, rng);
  }

  if (draw < 0.01) {
    draw = 0.01;
    if (stats) ++stats->clamped;
  }
  return draw;
}

std::pair<double, double> DensityModel::support() const {
  if (const auto* p = std::get_if<Parametric>(&variant_)) {
    switch (p->family) {
      case Family::normal: {
        const double sd = std::sqrt(p->b);
        return {p->a - 9.0 * sd, p->a + 9.0 * sd};
      }
      case Family::log_normal: {
        const double sd = std::sqrt(p->b);
        return {std::exp(p->a - 9.0 * sd), std::exp(p->a + 9.0 * sd)};
      }
      case Family::logistic: return {p->a - 18.0 * p->b, p->a + 18.0 * p->b};
      case Family::log_logistic: {
        // epsilon-quantiles; the power tail needs them instead of fixed widths
        const double eps = 2e-5;
        const double r = std::pow(eps / (1.0 - eps), 1.0 / p->b);
        return {p->a * r, p->a / r};
      }
      case Family::gamma: {
        const double m = p->a * p->b;
        const double sd = std::sqrt(p->a) * p->b;
        const double lo = p->a >= 1.0 ? std::max(0.0, m - 14.0 * sd) : 0.0;
        return {lo, m + 14.0 * sd};
      }
      case Family::cauchy: {
        const double eps = 2.5e-5;
        const double w = p->b * std::tan(kPi * (0.5 - eps));
        return {p->a - w, p->a + w};
      }
    }
  }
  if (const auto* g = std::get_if<Gmm>(&variant_)) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = 0; k < g->means.size(); ++k) {
      const double sd = std::sqrt(g->variances[k]);
      lo = std::min(lo, g->means[k] - 9.0 * sd);
      hi = std::max(hi, g->means[k] + 9.0 * sd);
    }
    return {lo, hi};
  }
  if (const auto* kde = std::get_if<Kde>(&variant_)) {
    const auto [mn, mx] = std::minmax_element(kde->sample.begin(), kde->sample.end());
    const double w = kernel_tail_halfwidth(kde->kernel, kde->bandwidth);
    return {*mn - w, *mx + w};
  }
  const auto& sp = std::get<SmoothedPmf>(variant_);
  const double w = kernel_tail_halfwidth(sp.kernel, sp.bandwidth);
  return {sp.t_min - w, sp.t_min + static_cast<double>(sp.pmf.size() - 1) + w};
}

// ---------------------------------------------------------------------------
// Fitting.

DensityModel fit_parametric(std::span<const double> sample, Family family) {
  require(sample.size() >= 2, ErrorKind::invalid_argument,
          "parametric fit needs at least 2 points");

  const bool log_family = family == Family::log_normal || family == Family::log_logistic;
  const bool positive_family = log_family || family == Family::gamma;
  if (positive_family) {
    for (const double x : sample) {
      require(x > 0, ErrorKind::invalid_argument,
              std::string(to_string(family)) + " requires a positive sample");
    }
  }

  const Moments m = moments(sample);
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());

  // Near-constant sample: scale would collapse below the floor. Return a
  // floored-width member of the family, flagged.
  if (m.var < kVarianceFloor) {
    switch (family) {
      case Family::normal:
        return DensityModel(Parametric{family, m.mean, kVarianceFloor}, kFlagDegenerateSample);
      case Family::log_normal: {
        const double mu = std::log(m.mean);
        return DensityModel(Parametric{family, mu, kVarianceFloor / sq(m.mean)},
                            kFlagDegenerateSample);
      }
      case Family::logistic:
        return DensityModel(Parametric{family, m.mean, kScaleFloor * std::sqrt(3.0) / kPi},
                            kFlagDegenerateSample);
      case Family::log_logistic:
        return DensityModel(Parametric{family, m.mean, m.mean / kScaleFloor},
                            kFlagDegenerateSample);
      case Family::gamma:
        return DensityModel(Parametric{family, sq(m.mean) / kVarianceFloor,
                                       kVarianceFloor / m.mean},
                            kFlagDegenerateSample);
      case Family::cauchy:
        return DensityModel(Parametric{family, quantile_sorted(sorted, 0.5), kScaleFloor},
                            kFlagDegenerateSample);
    }
  }

  switch (family) {
    case Family::normal:
      return DensityModel(Parametric{family, m.mean, std::max(m.var, kVarianceFloor)});
    case Family::log_normal: {
      std::vector<double> logs(sample.size());
      std::transform(sample.begin(), sample.end(), logs.begin(),
                     [](double x) { return std::log(x); });
      const Moments lm = moments(logs);
      return DensityModel(Parametric{family, lm.mean, std::max(lm.var, kVarianceFloor / sq(m.mean))});
    }
    case Family::logistic: {
      const double s0 = std::sqrt(3.0 * m.var) / kPi;
      const auto fn = [&](const std::vector<double>& p) {
        return sample_nll(family, sample, p[0], std::exp(p[1]));
      };
      const SimplexResult r = nelder_mead(fn, {m.mean, std::log(s0)}, {0.1 * s0 + 1e-3, 0.2});
      return DensityModel(Parametric{family, r.x[0], std::max(std::exp(r.x[1]), kScaleFloor)});
    }
    case Family::log_logistic: {
      std::vector<double> logs(sample.size());
      std::transform(sample.begin(), sample.end(), logs.begin(),
                     [](double x) { return std::log(x); });
      std::sort(logs.begin(), logs.end());
      const double med = quantile_sorted(logs, 0.5);
      const double iqr = quantile_sorted(logs, 0.75) - quantile_sorted(logs, 0.25);
      const double s_log = std::max(iqr / (2.0 * std::log(3.0)), 1e-4);
      const auto fn = [&](const std::vector<double>& p) {
        return sample_nll(family, sample, std::exp(p[0]), std::exp(p[1]));
      };
      const SimplexResult r = nelder_mead(fn, {med, std::log(1.0 / s_log)}, {0.1, 0.2});
      return DensityModel(Parametric{family, std::exp(r.x[0]), std::exp(r.x[1])});
    }
    case Family::gamma: {
      const double k0 = std::max(sq(m.mean) / m.var, 1e-2);
      const double theta0 = m.var / m.mean;
      const auto fn = [&](const std::vector<double>& p) {
        return sample_nll(family, sample, std::exp(p[0]), std::exp(p[1]));
      };
      const SimplexResult r =
          nelder_mead(fn, {std::log(k0), std::log(theta0)}, {0.2, 0.2});
      return DensityModel(Parametric{family, std::exp(r.x[0]), std::exp(r.x[1])});
    }
    case Family::cauchy: {
      const double med = quantile_sorted(sorted, 0.5);
      const double half_iqr =
          std::max(0.5 * (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)),
                   kScaleFloor);
      const auto fn = [&](const std::vector<double>& p) {
        return sample_nll(family, sample, p[0], std::exp(p[1]));
      };
      const SimplexResult r =
          nelder_mead(fn, {med, std::log(half_iqr)}, {0.5 * half_iqr, 0.2});
      return DensityModel(Parametric{family, r.x[0], std::max(std::exp(r.x[1]), kScaleFloor)});
    }
  }
  throw_error(ErrorKind::invalid_argument, "unreachable family");
}

namespace {

GmmFit fit_gmm_single(std::span<const double> sample, int k, std::uint64_t seed, double tol,
                      int max_iter) {
  const std::size_t n = sample.size();
  const Moments mom = moments(sample);
  const double global_var = std::max(mom.var, kVarianceFloor);
  const double sd = std::sqrt(global_var);

  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());

  Rng rng(derive_seed(seed, "gmm-init"));
  Gmm g;
  g.weights.assign(static_cast<std::size_t>(k), 1.0 / k);
  for (int c = 0; c < k; ++c) {
    const double q = (static_cast<double>(c) + 0.5) / static_cast<double>(k);
    g.means.push_back(quantile_sorted(sorted, q) + 0.01 * sd * rng.normal());
    g.variances.push_back(global_var);
  }

  std::uint32_t flags = 0;
  std::vector<double> trace;
  std::vector<double> log_resp(n * static_cast<std::size_t>(k));
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iter; ++iter) {
    // E step.
    double ll = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double* row = log_resp.data() + i * static_cast<std::size_t>(k);
      for (int c = 0; c < k; ++c) {
        row[c] = std::log(g.weights[static_cast<std::size_t>(c)]) +
                 normal_log_pdf(sample[i], g.means[static_cast<std::size_t>(c)],
                                g.variances[static_cast<std::size_t>(c)]);
      }
      const double norm = logsumexp({row, static_cast<std::size_t>(k)});
      ll += norm;
      for (int c = 0; c < k; ++c) row[c] = std::exp(row[c] - norm);
    }
    trace.push_back(ll);
    if (ll - prev_ll < tol && iter > 0) break;
    prev_ll = ll;

    // M step.
    for (int c = 0; c < k; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      double nk = 0;
      double mu = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = log_resp[i * static_cast<std::size_t>(k) + ci];
        nk += r;
        mu += r * sample[i];
      }
      mu /= nk;
      double var = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = log_resp[i * static_cast<std::size_t>(k) + ci];
        var += r * sq(sample[i] - mu);
      }
      var /= nk;
      if (var < kVarianceFloor) {
        var = kVarianceFloor;
        flags |= kFlagComponentFloored;
      }
      g.weights[ci] = nk / static_cast<double>(n);
      g.means[ci] = mu;
      g.variances[ci] = var;
    }
  }

  return {DensityModel(std::move(g), flags), std::move(trace)};
}

}  // namespace

GmmFit fit_gmm_traced(std::span<const double> sample, int k, std::uint64_t seed, double tol,
                      int max_iter, int restarts) {
  require(k >= 1, ErrorKind::invalid_argument, "k must be >= 1");
  require(restarts >= 1, ErrorKind::invalid_argument, "restarts must be >= 1");
  require(sample.size() >= static_cast<std::size_t>(k), ErrorKind::invalid_argument,
          "sample smaller than component count");

  GmmFit best = fit_gmm_single(sample, k, seed, tol, max_iter);
  for (int r = 1; r < restarts; ++r) {
    GmmFit candidate =
        fit_gmm_single(sample, k, derive_seed(seed, static_cast<std::uint64_t>(r)), tol, max_iter);
    if (candidate.log_likelihood_trace.back() > best.log_likelihood_trace.back()) {
      best = std::move(candidate);
    }
  }
  return best;
}

DensityModel fit_gmm(std::span<const double> sample, int k, std::uint64_t seed) {
  return fit_gmm_traced(sample, k, seed).model;
}

DensityModel fit_kde(std::span<const double> sample, Kernel kernel, double bandwidth) {
  require(!sample.empty(), ErrorKind::invalid_argument, "KDE needs a non-empty sample");
  require(bandwidth > 0, ErrorKind::invalid_argument, "bandwidth must be positive");
  Kde kde;
  kde.sample.assign(sample.begin(), sample.end());
  kde.kernel = kernel;
  kde.bandwidth = bandwidth;
  return DensityModel(std::move(kde));
}

double log_likelihood(const DensityModel& model, std::span<const double> sample) {
  double ll = 0;
  for (const double x : sample) ll += model.log_pdf(x);
  return ll;
}

// ---------------------------------------------------------------------------
// JSON.

namespace {

std::vector<std::string> flag_names(std::uint32_t flags) {
  std::vector<std::string> out;
  if (flags & kFlagDegenerateSample) out.emplace_back("degenerate_sample");
  if (flags & kFlagComponentFloored) out.emplace_back("component_floored");
  if (flags & kFlagUndersizedSample) out.emplace_back("undersized_sample");
  return out;
}

std::uint32_t flags_from_names(const nlohmann::ordered_json& j) {
  std::uint32_t flags = 0;
  if (!j.contains("flags")) return flags;
  for (const auto& name : j.at("flags")) {
    if (name == "degenerate_sample") flags |= kFlagDegenerateSample;
    if (name == "component_floored") flags |= kFlagComponentFloored;
    if (name == "undersized_sample") flags |= kFlagUndersizedSample;
  }
  return flags;
}

}  // namespace

nlohmann::ordered_json density_to_json(const DensityModel& model) {
  nlohmann::ordered_json j;
  if (const auto* p = std::get_if<Parametric>(&model.variant())) {
    j["type"] = "parametric";
    j["family"] = to_string(p->family);
    j["a"] = p->a;
    j["b"] = p->b;
  } else if (const auto* g = std::get_if<Gmm>(&model.variant())) {
    j["type"] = "gmm";
    j["weights"] = g->weights;
    j["means"] = g->means;
    j["variances"] = g->variances;
  } else if (const auto* kde = std::get_if<Kde>(&model.variant())) {
    j["type"] = "kde";
    j["kernel"] = to_string(kde->kernel);
    j["bandwidth"] = kde->bandwidth;
    j["sample"] = kde->sample;
  } else {
    const auto& sp = std::get<SmoothedPmf>(model.variant());
    j["type"] = "smoothed_pmf";
    j["t_min"] = sp.t_min;
    j["kernel"] = to_string(sp.kernel);
    j["bandwidth"] = sp.bandwidth;
    j["pmf"] = sp.pmf;
  }
  if (model.flags() != 0) j["flags"] = flag_names(model.flags());
  return j;
}

DensityModel density_from_json(const nlohmann::ordered_json& j) {
  const std::string type = j.at("type");
  const std::uint32_t flags = flags_from_names(j);
  if (type == "parametric") {
    Parametric p;
    p.family = parse_family(j.at("family"));
    p.a = j.at("a");
    p.b = j.at("b");
    return DensityModel(p, flags);
  }
  if (type == "gmm") {
    Gmm g;
    g.weights = j.at("weights").get<std::vector<double>>();
    g.means = j.at("means").get<std::vector<double>>();
    g.variances = j.at("variances").get<std::vector<double>>();
    return DensityModel(std::move(g), flags);
  }
  if (type == "kde") {
    Kde kde;
    kde.kernel = parse_kernel(j.at("kernel"));
    kde.bandwidth = j.at("bandwidth");
    kde.sample = j.at("sample").get<std::vector<double>>();
    return DensityModel(std::move(kde), flags);
  }
  if (type == "smoothed_pmf") {
    SmoothedPmf sp;
    sp.t_min = j.at("t_min");
    sp.kernel = parse_kernel(j.at("kernel"));
    sp.bandwidth = j.at("bandwidth");
    sp.pmf = j.at("pmf").get<std::vector<double>>();
    return DensityModel(std::move(sp), flags);
  }
  throw_error(ErrorKind::invalid_argument, "unknown density type: '" + type + "'");
}

}  // namespace bustt
