#include "bustt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include "bustt/error.hpp"
#include "bustt/parallel.hpp"

namespace bustt {

namespace {

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

std::string SimilarityMethod::label() const {
  if (type == Type::edtw) return "eDTW(" + dtw.label() + ")";
  return "kNN(" + std::to_string(knn.k) + ")";
}

std::string EstimatorConfig::model_label() const {
  switch (type) {
    case Type::parametric:
      switch (family) {
        case Family::normal: return "Normal";
        case Family::log_normal: return "Log-Normal";
        case Family::logistic: return "Logistic";
        case Family::log_logistic: return "Log-Logistic";
        case Family::gamma: return "Gamma";
        case Family::cauchy: return "Cauchy";
      }
      return "?";
    case Type::gmm: return "GMM";
    case Type::kde: return "KDE";
    case Type::lrpc: return "LR-PC";
    case Type::forest: return "Random Forest";
  }
  return "?";
}

std::string EstimatorConfig::id() const {
  std::string base;
  switch (type) {
    case Type::parametric: base = to_string(family); break;
    case Type::gmm: base = "gmm" + std::to_string(components); break;
    case Type::kde: base = "kde"; break;
    case Type::lrpc: return "lrpc";
    case Type::forest: return "forest";
  }
  if (!similarity) return base;
  if (similarity->type == SimilarityMethod::Type::edtw)
    return base + ":edtw" + similarity->dtw.label();
  return base + ":knn" + std::to_string(similarity->knn.k);
}

EstimatorConfig parse_estimator(const std::string& spec, const SimilarityMethod& default_edtw,
                                const SimilarityMethod& default_knn) {
  const auto colon = spec.find(':');
  const std::string model = spec.substr(0, colon);
  const std::string sim = colon == std::string::npos ? "" : spec.substr(colon + 1);

  EstimatorConfig config;
  if (model == "gmm" || (model.rfind("gmm", 0) == 0 && model.size() > 3)) {
    config.type = EstimatorConfig::Type::gmm;
    if (model.size() > 3) config.components = std::stoi(model.substr(3));
  } else if (model == "kde") {
    config.type = EstimatorConfig::Type::kde;
  } else if (model == "lrpc") {
    config.type = EstimatorConfig::Type::lrpc;
  } else if (model == "forest") {
    config.type = EstimatorConfig::Type::forest;
  } else {
    config.type = EstimatorConfig::Type::parametric;
    config.family = parse_family(model);
  }

  const bool wants_similarity = config.type == EstimatorConfig::Type::parametric ||
                                config.type == EstimatorConfig::Type::gmm ||
                                config.type == EstimatorConfig::Type::kde;
  if (!wants_similarity) {
    require(sim.empty(), ErrorKind::invalid_argument,
            "'" + model + "' does not take a similarity method");
    return config;
  }
  require(!sim.empty(), ErrorKind::invalid_argument,
          "'" + model + "' needs a similarity method (e.g. " + model + ":knn)");

  if (sim == "knn") {
    config.similarity = default_knn;
  } else if (sim.rfind("knn", 0) == 0) {
    SimilarityMethod m = default_knn;
    m.type = SimilarityMethod::Type::knn;
    m.knn.k = std::stoi(sim.substr(3));
    config.similarity = m;
  } else if (sim == "edtw") {
    config.similarity = default_edtw;
  } else if (sim == "edtw5p") {
    SimilarityMethod m;
    m.type = SimilarityMethod::Type::edtw;
    m.dtw.mode = DtwMode::five_periods;
    config.similarity = m;
  } else if (sim.rfind("edtw", 0) == 0) {
    SimilarityMethod m;
    m.type = SimilarityMethod::Type::edtw;
    m.dtw.mode = DtwMode::minutes;
    m.dtw.window_minutes = std::stoi(sim.substr(4));
    config.similarity = m;
  } else {
    throw_error(ErrorKind::invalid_argument, "unknown similarity method: '" + sim + "'");
  }
  return config;
}

NllResult nll(std::span<const DensityModel> densities, std::span<const TripRecord> trips) {
  require(densities.size() == trips.size(), ErrorKind::invalid_argument,
          "one density per trip required");
  NllResult r;
  for (std::size_t i = 0; i < trips.size(); ++i) {
    const double p = densities[i].pdf(trips[i].travel_time);
    if (p < kPdfFloor) ++r.floor_hits;
    r.sum -= std::log(std::max(p, kPdfFloor));
  }
  r.n = trips.size();
  r.mean = r.n ? r.sum / static_cast<double>(r.n) : 0.0;
  return r;
}

std::optional<double> tt_mse(std::span<const DensityModel> densities,
                             std::span<const TripRecord> trips) {
  require(densities.size() == trips.size(), ErrorKind::invalid_argument,
          "one density per trip required");
  double sse = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < trips.size(); ++i) {
    const std::optional<double> m = densities[i].mean();
    if (!m) continue;
    const double err = *m - trips[i].travel_time;
    sse += err * err;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sse / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// FittedEstimator.

namespace {

std::string selection_key(const TripRecord& trip, const SimilarityMethod& sim) {
  if (sim.type == SimilarityMethod::Type::edtw) {
    return trip.route_id() + "#" + std::to_string(sim.dtw.window_index(trip.scheduled_departure));
  }
  return trip.route_id() + "#" + format_double("%.17g", trip.scheduled_departure) + "#" +
         std::to_string(trip.week_number);
}

std::size_t min_sample_size(const EstimatorConfig& config) {
  switch (config.type) {
    case EstimatorConfig::Type::parametric: return 2;
    case EstimatorConfig::Type::gmm: return static_cast<std::size_t>(config.components);
    case EstimatorConfig::Type::kde: return 1;
    default: return 1;
  }
}

std::vector<double> travel_times(const std::vector<TripRecord>& trips) {
  std::vector<double> tts(trips.size());
  for (std::size_t i = 0; i < trips.size(); ++i) tts[i] = trips[i].travel_time;
  return tts;
}

}  // namespace

FittedEstimator FittedEstimator::fit(const std::vector<TripRecord>& training,
                                     const EstimatorConfig& config, std::uint64_t seed,
                                     int jobs) {
  FittedEstimator est;
  est.config_ = config;
  est.seed_ = seed;

  switch (config.type) {
    case EstimatorConfig::Type::parametric:
    case EstimatorConfig::Type::gmm:
    case EstimatorConfig::Type::kde:
      require(config.similarity.has_value(), ErrorKind::invalid_argument,
              "similarity estimator without a similarity method");
      est.index_ = std::make_shared<TrainingIndex>(training);
      break;

    case EstimatorConfig::Type::lrpc: {
      std::map<std::string, std::vector<TripRecord>> by_route;
      for (const TripRecord& t : training) by_route[t.route_id()].push_back(t);
      std::vector<const std::pair<const std::string, std::vector<TripRecord>>*> routes;
      for (const auto& entry : by_route) routes.push_back(&entry);
      std::vector<std::optional<LrpcModel>> fitted(routes.size());
      for_each_index(routes.size(), jobs, [&](std::size_t i) {
        if (routes[i]->second.size() <
            static_cast<std::size_t>(config.lrpc.min_route_trips))
          return;  // route skipped, recorded below
        fitted[i] = fit_lrpc(routes[i]->second, config.lrpc,
                             derive_seed(seed, routes[i]->first));
      });
      for (std::size_t i = 0; i < routes.size(); ++i) {
        if (fitted[i]) est.lrpc_models_.emplace(routes[i]->first, std::move(*fitted[i]));
      }
      break;
    }

    case EstimatorConfig::Type::forest: {
      est.forest_schema_ = FeatureSchema::fit(training, forest_feature_names());
      const ForestDataset data = ForestDataset::build(training, est.forest_schema_);
      est.forest_ = std::make_shared<ForestModel>(
          fit_forest(data, config.forest, derive_seed(seed, "forest"), jobs));
      break;
    }
  }
  return est;
}

namespace {

// One density per distinct selection key. Returns an empty optional when the
// key cannot be fitted at all (tiny route pool).
std::optional<DensityModel> fit_for_key(const TripRecord& representative,
                                        const TrainingIndex& index,
                                        const EstimatorConfig& config, std::uint64_t key_seed,
                                        bool* used_fallback) {
  const SimilarityMethod& sim = *config.similarity;
  std::vector<TripRecord> selection;
  bool undersized = false;
  try {
    if (sim.type == SimilarityMethod::Type::edtw) {
      selection = index.select_edtw(representative, sim.dtw);
    } else {
      KnnSelection knn = index.select_knn(representative, sim.knn);
      selection = std::move(knn.trips);
      undersized = knn.short_sample;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::no_similar_trips) throw;
  }

  const std::size_t need = min_sample_size(config);
  if (selection.size() < need) {
    // Window empty or too small: fall back to the whole route history.
    if (!index.has_route(representative.route_id())) return std::nullopt;
    const auto& pool = index.route_pool(representative.route_id());
    if (pool.size() < need) return std::nullopt;
    selection = pool;
    *used_fallback = true;
  }

  const std::vector<double> tts = travel_times(selection);
  DensityModel model;
  switch (config.type) {
    case EstimatorConfig::Type::parametric:
      model = fit_parametric(tts, config.family);
      break;
    case EstimatorConfig::Type::gmm:
      model = fit_gmm(tts, config.components, key_seed);
      break;
    case EstimatorConfig::Type::kde:
      model = fit_kde(tts, config.kernel, config.bandwidth);
      break;
    default:
      throw_error(ErrorKind::invalid_argument, "not a similarity estimator");
  }
  if (undersized) model.add_flags(kFlagUndersizedSample);
  return model;
}

FittedEstimator::Predictions predict_impl(const EstimatorConfig& config, std::uint64_t seed,
                                          const TrainingIndex* index,
                                          const std::map<std::string, LrpcModel>& lrpc_models,
                                          const ForestModel* forest,
                                          const FeatureSchema& forest_schema,
                                          const std::vector<TripRecord>& trips, int jobs,
                                          bool serial) {
  FittedEstimator::Predictions out;
  out.densities.resize(trips.size());
  out.skipped.assign(trips.size(), 0);

  const auto run = [&](std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (serial) {
      for_each_index_serial(n, fn);
    } else {
      for_each_index(n, jobs, fn);
    }
  };

  switch (config.type) {
    case EstimatorConfig::Type::parametric:
    case EstimatorConfig::Type::gmm:
    case EstimatorConfig::Type::kde: {
      // Deduplicate by selection key, then fit each key once.
      std::unordered_map<std::string, std::size_t> key_slot;
      std::vector<std::size_t> trip_slot(trips.size());
      std::vector<std::size_t> representative;
      for (std::size_t i = 0; i < trips.size(); ++i) {
        const std::string key = selection_key(trips[i], *config.similarity);
        const auto [it, inserted] = key_slot.try_emplace(key, representative.size());
        if (inserted) representative.push_back(i);
        trip_slot[i] = it->second;
      }

      std::vector<std::optional<DensityModel>> fits(representative.size());
      std::vector<char> fallback(representative.size(), 0);
      run(representative.size(), [&](std::size_t s) {
        bool used_fallback = false;
        fits[s] = fit_for_key(trips[representative[s]], *index, config, derive_seed(seed, s),
                              &used_fallback);
        fallback[s] = used_fallback ? 1 : 0;
      });

      for (std::size_t i = 0; i < trips.size(); ++i) {
        const std::size_t s = trip_slot[i];
        if (!fits[s]) {
          out.skipped[i] = 1;
          continue;
        }
        out.densities[i] = *fits[s];
        if (fallback[s]) ++out.fallback_count;
      }
      break;
    }

    case EstimatorConfig::Type::lrpc: {
      run(trips.size(), [&](std::size_t i) {
        const auto it = lrpc_models.find(trips[i].route_id());
        if (it == lrpc_models.end()) {
          out.skipped[i] = 1;
          return;
        }
        out.densities[i] = it->second.predict_density(trips[i].scheduled_departure);
      });
      break;
    }

    case EstimatorConfig::Type::forest: {
      run(trips.size(), [&](std::size_t i) {
        const FeatureVector v = forest_schema.encode(trips[i]);
        out.densities[i] = forest_as_gaussian(*forest, v.values);
      });
      break;
    }
  }
  return out;
}

}  // namespace

FittedEstimator::Predictions FittedEstimator::predict(const std::vector<TripRecord>& trips,
                                                      int jobs) const {
  return predict_impl(config_, seed_, index_.get(), lrpc_models_, forest_.get(), forest_schema_,
                      trips, jobs, jobs == 1);
}

FittedEstimator FittedEstimator::rebind_smoothing(Kernel kernel, double bandwidth) const {
  FittedEstimator out = *this;
  out.config_.lrpc.kernel = kernel;
  out.config_.lrpc.bandwidth = bandwidth;
  for (auto& [route, model] : out.lrpc_models_) {
    model.kernel = kernel;
    model.bandwidth = bandwidth;
  }
  return out;
}

FittedEstimator::Predictions predict_serial(const FittedEstimator& estimator,
                                            const std::vector<TripRecord>& trips) {
  return estimator.predict(trips, 1);
}

// ---------------------------------------------------------------------------
// Reports.

namespace {

ScoreStats score_predictions(const FittedEstimator::Predictions& preds,
                             const std::vector<TripRecord>& trips) {
  ScoreStats s;
  s.fallbacks = preds.fallback_count;
  for (std::size_t i = 0; i < trips.size(); ++i) {
    if (preds.skipped[i]) {
      ++s.skipped;
      continue;
    }
    const double p = preds.densities[i].pdf(trips[i].travel_time);
    if (p < kPdfFloor) ++s.floor_hits;
    s.nll_sum -= std::log(std::max(p, kPdfFloor));
    ++s.n;
  }
  s.nll_mean = s.n ? s.nll_sum / static_cast<double>(s.n) : 0.0;
  return s;
}

std::optional<double> mse_of_predictions(const FittedEstimator::Predictions& preds,
                                         const std::vector<TripRecord>& trips) {
  double sse = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < trips.size(); ++i) {
    if (preds.skipped[i]) continue;
    const std::optional<double> m = preds.densities[i].mean();
    if (!m) continue;
    const double err = *m - trips[i].travel_time;
    sse += err * err;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sse / static_cast<double>(n);
}

std::vector<TripRecord> drop_unseen_routes(const std::vector<TripRecord>& trips,
                                           const std::vector<std::string>& unseen) {
  if (unseen.empty()) return trips;
  const std::set<std::string> bad(unseen.begin(), unseen.end());
  std::vector<TripRecord> out;
  for (const TripRecord& t : trips) {
    if (!bad.count(t.route_id())) out.push_back(t);
  }
  return out;
}

nlohmann::ordered_json config_echo_json(const std::vector<EstimatorConfig>& configs) {
  nlohmann::ordered_json echo = nlohmann::ordered_json::array();
  for (const EstimatorConfig& c : configs) {
    nlohmann::ordered_json j;
    j["id"] = c.id();
    if (c.type == EstimatorConfig::Type::kde) {
      j["kernel"] = to_string(c.kernel);
      j["bandwidth"] = c.bandwidth;
    } else if (c.type == EstimatorConfig::Type::lrpc) {
      j["lambda"] = c.lrpc.lambda;
      j["kernel"] = to_string(c.lrpc.kernel);
      j["bandwidth"] = c.lrpc.bandwidth;
      j["epochs"] = c.lrpc.epochs;
    } else if (c.type == EstimatorConfig::Type::forest) {
      j["n_trees"] = c.forest.n_trees;
      j["max_depth"] = c.forest.max_depth;
      j["min_samples_split"] = c.forest.min_samples_split;
    }
    echo.push_back(std::move(j));
  }
  return echo;
}

}  // namespace

MetricsReport compare_models(const DatasetSplit& split,
                             const std::vector<EstimatorConfig>& configs, std::uint64_t seed,
                             int jobs) {
  const std::vector<TripRecord> training = split.full_training();
  const std::vector<TripRecord> test = drop_unseen_routes(split.test, split.test_only_routes);

  MetricsReport report;
  report.seed = seed;
  report.train_fingerprint = fingerprint(training);
  report.test_fingerprint = fingerprint(test);
  report.config_echo = config_echo_json(configs);

  for (const EstimatorConfig& config : configs) {
    EvalRow row;
    row.model = config.model_label();
    row.similarity = config.similarity ? config.similarity->label() : "-";
    try {
      const FittedEstimator est =
          FittedEstimator::fit(training, config, derive_seed(seed, config.id()), jobs);
      const auto train_preds = est.predict(training, jobs);
      const auto test_preds = est.predict(test, jobs);
      row.train = score_predictions(train_preds, training);
      row.test = score_predictions(test_preds, test);
      if (config.type == EstimatorConfig::Type::parametric &&
          config.family == Family::cauchy) {
        row.mse_undefined = true;  // no expected value
      } else {
        row.test_mse = mse_of_predictions(test_preds, test);
        row.mse_undefined = !row.test_mse.has_value();
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

SweepDtwReport sweep_dtw(const DatasetSplit& split,
                         const std::vector<EstimatorConfig>& estimators,
                         const std::vector<DtwSpec>& modes, std::uint64_t seed, int jobs) {
  SweepDtwReport report;
  report.modes = modes;
  const std::vector<TripRecord>& training = split.reduced_training;
  const std::vector<TripRecord> validation =
      drop_unseen_routes(split.validation, split.routes_without_validation);

  for (const EstimatorConfig& base : estimators) {
    double prev_train = 0;
    double prev_val = 0;
    bool have_prev = false;
    for (const DtwSpec& mode : modes) {
      EstimatorConfig config = base;
      SimilarityMethod sim;
      sim.type = SimilarityMethod::Type::edtw;
      sim.dtw = mode;
      config.similarity = sim;

      SweepDtwCell cell;
      cell.estimator = config.model_label();
      cell.mode = mode.label();
      try {
        const FittedEstimator est =
            FittedEstimator::fit(training, config, derive_seed(seed, config.id()), jobs);
        cell.train_nll = score_predictions(est.predict(training, jobs), training).nll_mean;
        cell.val_nll = score_predictions(est.predict(validation, jobs), validation).nll_mean;
        if (have_prev) {
          cell.overfit = cell.train_nll < prev_train && cell.val_nll > prev_val;
        }
        prev_train = cell.train_nll;
        prev_val = cell.val_nll;
        have_prev = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
        have_prev = false;
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::vector<int> default_k_grid() {
  std::vector<int> grid;
  for (int k = 2; k <= 40; ++k) grid.push_back(k);
  return grid;
}

SweepKReport sweep_k(const DatasetSplit& split, const std::vector<EstimatorConfig>& estimators,
                     const std::vector<int>& k_grid, std::uint64_t seed, int jobs) {
  SweepKReport report;
  report.k_grid = k_grid;
  const std::vector<TripRecord>& training = split.reduced_training;
  const std::vector<TripRecord> validation =
      drop_unseen_routes(split.validation, split.routes_without_validation);

  for (const EstimatorConfig& base : estimators) {
    for (const int k : k_grid) {
      EstimatorConfig config = base;
      SimilarityMethod sim;
      sim.type = SimilarityMethod::Type::knn;
      sim.knn.k = k;
      config.similarity = sim;

      SweepKCell cell;
      cell.estimator = config.model_label();
      cell.k = k;
      try {
        const FittedEstimator est =
            FittedEstimator::fit(training, config, derive_seed(seed, config.id()), jobs);
        cell.val_nll = score_predictions(est.predict(validation, jobs), validation).nll_mean;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::optional<int> SweepKReport::best_k(const std::string& estimator) const {
  std::optional<int> best;
  double best_nll = 0;
  for (const SweepKCell& cell : cells) {
    if (cell.estimator != estimator || !cell.error.empty()) continue;
    if (!best || cell.val_nll < best_nll) {
      best = cell.k;
      best_nll = cell.val_nll;
    }
  }
  return best;
}

KdeSelection select_kde_bandwidth(const DatasetSplit& split, const SimilarityMethod& similarity,
                                  std::uint64_t seed, int jobs) {
  const std::vector<double> h_grid = {0.25, 0.5, 1.0, 2.0, 4.0};
  const Kernel kernels[] = {Kernel::gaussian, Kernel::epanechnikov};

  const std::vector<TripRecord>& training = split.reduced_training;
  const std::vector<TripRecord> validation =
      drop_unseen_routes(split.validation, split.routes_without_validation);

  KdeSelection best;
  bool first = true;
  for (const Kernel kernel : kernels) {
    for (const double h : h_grid) {
      EstimatorConfig config;
      config.type = EstimatorConfig::Type::kde;
      config.kernel = kernel;
      config.bandwidth = h;
      config.similarity = similarity;
      const FittedEstimator est =
          FittedEstimator::fit(training, config, derive_seed(seed, config.id()), jobs);
      const double val =
          score_predictions(est.predict(validation, jobs), validation).nll_mean;
      if (first || val < best.val_nll) {
        best = {kernel, h, val};
        first = false;
      }
    }
  }
  return best;
}

LrpcSelection select_lrpc_hyperparams(const DatasetSplit& split, const LrpcConfig& base,
                                      std::uint64_t seed, int jobs) {
  const std::vector<double> lambda_grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  const std::vector<double> h_grid = {0.25, 0.5, 1.0, 2.0, 4.0};
  const Kernel kernels[] = {Kernel::gaussian, Kernel::epanechnikov};

  const std::vector<TripRecord>& training = split.reduced_training;
  const std::vector<TripRecord> validation =
      drop_unseen_routes(split.validation, split.routes_without_validation);

  LrpcSelection best;
  bool first = true;
  for (const double lambda : lambda_grid) {
    LrpcConfig lrpc = base;
    lrpc.lambda = lambda;
    EstimatorConfig config;
    config.type = EstimatorConfig::Type::lrpc;
    config.lrpc = lrpc;
    const FittedEstimator est =
        FittedEstimator::fit(training, config, derive_seed(seed, config.id()), jobs);

    // The smoothing acts at prediction time, so the per-lambda fit is shared
    // across the kernel/bandwidth grid.
    for (const Kernel kernel : kernels) {
      for (const double h : h_grid) {
        double nll_sum = 0;
        std::size_t n = 0;
        const FittedEstimator rescored = est.rebind_smoothing(kernel, h);
        const auto preds = rescored.predict(validation, jobs);
        for (std::size_t i = 0; i < validation.size(); ++i) {
          if (preds.skipped[i]) continue;
          nll_sum -= preds.densities[i].log_pdf(validation[i].travel_time);
          ++n;
        }
        const double val = n ? nll_sum / static_cast<double>(n) : 0.0;
        if (first || val < best.val_nll) {
          best = {lambda, kernel, h, val};
          first = false;
        }
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Rendering.

namespace {

void append_row(std::string& out, const std::vector<std::string>& cells,
                const std::vector<int>& widths) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-*s", widths[i], cells[i].c_str());
    out += buf;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  out += '\n';
}

std::string nll_cell(const ScoreStats& s) { return format_double("%.2f", s.nll_mean); }

}  // namespace

std::string render_compare_table(const MetricsReport& report) {
  // Best test NLL marked with brackets, as the reference layout bolds it.
  double best = 0;
  bool have_best = false;
  for (const EvalRow& row : report.rows) {
    if (!row.error.empty()) continue;
    if (!have_best || row.test.nll_mean < best) {
      best = row.test.nll_mean;
      have_best = true;
    }
  }

  const std::vector<int> widths = {15, 14, 13, 10};
  std::string out;
  append_row(out, {"Model", "similarity", "Training", "Test"}, widths);
  append_row(out, {"", "method", "set", "set"}, widths);
  out += std::string(48, '-') + '\n';
  std::string prev_model;
  for (const EvalRow& row : report.rows) {
    if (!row.error.empty()) {
      append_row(out, {row.model, row.similarity, "failed", "failed"}, widths);
      prev_model = row.model;
      continue;
    }
    std::string test_cell = nll_cell(row.test);
    if (have_best && row.test.nll_mean == best) test_cell = "[" + test_cell + "]";
    append_row(out,
               {row.model == prev_model ? "" : row.model, row.similarity, nll_cell(row.train),
                test_cell},
               widths);
    prev_model = row.model;
  }
  return out;
}

std::string render_mse_table(const MetricsReport& report) {
  double best = 0;
  bool have_best = false;
  for (const EvalRow& row : report.rows) {
    if (row.error.empty() && row.test_mse && (!have_best || *row.test_mse < best)) {
      best = *row.test_mse;
      have_best = true;
    }
  }

  const std::vector<int> widths = {15, 14, 12};
  std::string out;
  append_row(out, {"Model", "similarity", "MSE"}, widths);
  append_row(out, {"", "method", ""}, widths);
  out += std::string(38, '-') + '\n';
  std::string prev_model;
  for (const EvalRow& row : report.rows) {
    std::string cell;
    if (!row.error.empty()) {
      cell = "failed";
    } else if (row.mse_undefined) {
      cell = "undef";  // no expected value (Cauchy)
    } else if (row.test_mse) {
      cell = format_double("%.2f", *row.test_mse);
      if (have_best && *row.test_mse == best) cell = "[" + cell + "]";
    } else {
      cell = "-";
    }
    append_row(out, {row.model == prev_model ? "" : row.model, row.similarity, cell}, widths);
    prev_model = row.model;
  }
  return out;
}

std::string render_dtw_table(const SweepDtwReport& report) {
  std::vector<int> widths = {15};
  std::vector<std::string> h1 = {"Model"};
  std::vector<std::string> h2 = {""};
  for (const DtwSpec& mode : report.modes) {
    h1.push_back(mode.label());
    h1.emplace_back("");
    h2.emplace_back("Train");
    h2.emplace_back("Validation");
    widths.push_back(9);
    widths.push_back(12);
  }

  std::string out;
  append_row(out, h1, widths);
  append_row(out, h2, widths);
  out += std::string(15 + 21 * report.modes.size(), '-') + '\n';

  // Cells arrive grouped per estimator in mode order.
  const std::size_t per = report.modes.size();
  for (std::size_t i = 0; i < report.cells.size(); i += per) {
    std::vector<std::string> cells = {report.cells[i].estimator};
    for (std::size_t m = 0; m < per; ++m) {
      const SweepDtwCell& c = report.cells[i + m];
      if (!c.error.empty()) {
        cells.emplace_back("failed");
        cells.emplace_back("failed");
      } else {
        cells.push_back(format_double("%.2f", c.train_nll));
        cells.push_back(format_double("%.2f", c.val_nll) + (c.overfit ? "*" : ""));
      }
    }
    append_row(out, cells, widths);
  }
  out += "(* = train improved while validation degraded)\n";
  return out;
}

std::string render_k_table(const SweepKReport& report) {
  std::string out = "estimator,k,validation_nll\n";
  return out + render_k_series_csv(report);
}

std::string render_k_series_csv(const SweepKReport& report) {
  std::string out;
  for (const SweepKCell& cell : report.cells) {
    out += cell.estimator + "," + std::to_string(cell.k) + "," +
           (cell.error.empty() ? format_double("%.6f", cell.val_nll) : "NA") + "\n";
  }
  return out;
}

std::string render_dtw_series_csv(const SweepDtwReport& report) {
  std::string out = "estimator,mode,train_nll,validation_nll,overfit\n";
  for (const SweepDtwCell& cell : report.cells) {
    if (!cell.error.empty()) {
      out += cell.estimator + "," + cell.mode + ",NA,NA,NA\n";
      continue;
    }
    out += cell.estimator + "," + cell.mode + "," + format_double("%.6f", cell.train_nll) + "," +
           format_double("%.6f", cell.val_nll) + "," + (cell.overfit ? "1" : "0") + "\n";
  }
  return out;
}

std::string render_importance_table(const std::vector<ImportanceRow>& rows) {
  const std::vector<int> widths = {26, 12, 24};
  std::string out;
  append_row(out, {"Feature", "Importance", "Relative importance (%)"}, widths);
  out += std::string(60, '-') + '\n';
  for (const ImportanceRow& row : rows) {
    append_row(out,
               {row.feature, format_double("%.2f", row.importance),
                format_double("%.2f", row.relative_pct)},
               widths);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON reports.

namespace {

nlohmann::ordered_json stats_json(const ScoreStats& s) {
  return {{"nll_mean", s.nll_mean}, {"nll_sum", s.nll_sum},     {"n", s.n},
          {"floor_hits", s.floor_hits}, {"fallbacks", s.fallbacks}, {"skipped", s.skipped}};
}

}  // namespace

nlohmann::ordered_json metrics_report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const EvalRow& row : report.rows) {
    nlohmann::ordered_json j;
    j["model"] = row.model;
    j["similarity"] = row.similarity;
    if (!row.error.empty()) {
      j["error"] = row.error;
    } else {
      j["train"] = stats_json(row.train);
      j["test"] = stats_json(row.test);
      if (row.mse_undefined) {
        j["test_mse"] = "undefined";
      } else if (row.test_mse) {
        j["test_mse"] = *row.test_mse;
      }
    }
    rows.push_back(std::move(j));
  }
  nlohmann::ordered_json j;
  j["rows"] = std::move(rows);
  j["seed"] = report.seed;
  j["train_fingerprint"] = report.train_fingerprint;
  j["test_fingerprint"] = report.test_fingerprint;
  j["configs"] = report.config_echo;
  return j;
}

nlohmann::ordered_json sweep_dtw_to_json(const SweepDtwReport& report) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const SweepDtwCell& c : report.cells) {
    nlohmann::ordered_json j;
    j["estimator"] = c.estimator;
    j["mode"] = c.mode;
    if (!c.error.empty()) {
      j["error"] = c.error;
    } else {
      j["train_nll"] = c.train_nll;
      j["validation_nll"] = c.val_nll;
      j["overfit"] = c.overfit;
    }
    cells.push_back(std::move(j));
  }
  return {{"cells", std::move(cells)}};
}

nlohmann::ordered_json sweep_k_to_json(const SweepKReport& report) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const SweepKCell& c : report.cells) {
    nlohmann::ordered_json j;
    j["estimator"] = c.estimator;
    j["k"] = c.k;
    if (!c.error.empty()) {
      j["error"] = c.error;
    } else {
      j["validation_nll"] = c.val_nll;
    }
    cells.push_back(std::move(j));
  }
  return {{"cells", std::move(cells)}};
}

}  // namespace bustt
