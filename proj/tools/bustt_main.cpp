// bustt: long-term probabilistic travel-time prediction for bus schedules.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "bustt/csv.hpp"
#include "bustt/delay.hpp"
#include "bustt/eval.hpp"
#include "bustt/filter.hpp"
#include "bustt/parallel.hpp"
#include "bustt/split.hpp"
#include "bustt/synth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

using namespace bustt;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ordered_json load_json(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::data, "cannot open '" + path + "'");
  ordered_json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::data, "cannot write '" + path + "'");
  out << text;
}

void write_json(const std::string& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::vector<TripRecord> read_trips(const std::string& path) {
  const IngestResult r = ingest_avl_file(path);
  require(!r.trips.empty(), ErrorKind::data, "no usable trips in '" + path + "'");
  if (!r.rejected.empty()) {
    std::cerr << path << ": " << r.rejected.size() << " rows rejected\n";
  }
  return r.trips;
}

std::set<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::data, "cannot open '" + path + "'");
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

// Every artifact records what produced it.
ordered_json run_stamp(const std::string& command, std::uint64_t seed,
                       const std::vector<std::pair<std::string, std::uint64_t>>& inputs) {
  ordered_json j;
  j["command"] = command;
  j["seed"] = seed;
  ordered_json in = ordered_json::object();
  for (const auto& [name, fp] : inputs) in[name] = hex64(fp);
  j["inputs"] = std::move(in);
  return j;
}

struct SharedFlags {
  std::uint64_t seed = 0;
  int jobs = 0;  // 0: all logical cores

  int resolved_jobs() const { return jobs > 0 ? jobs : default_jobs(); }
};

SimilarityMethod default_edtw(int minutes) {
  SimilarityMethod m;
  m.type = SimilarityMethod::Type::edtw;
  if (minutes == 0) {
    m.dtw.mode = DtwMode::five_periods;
  } else {
    m.dtw.mode = DtwMode::minutes;
    m.dtw.window_minutes = minutes;
  }
  return m;
}

SimilarityMethod default_knn(int k) {
  SimilarityMethod m;
  m.type = SimilarityMethod::Type::knn;
  m.knn.k = k;
  return m;
}

std::vector<std::string> split_csv_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct EstimatorFlags {
  int k = 13;
  int dtw = 60;  // 0 means five periods
  std::string kernel = "gaussian";
  double bandwidth = 1.0;
  double lambda = 1e-3;
  int epochs = 100;
  int trees = 100;
  int depth = 12;
  int min_split = 5;

  void apply(EstimatorConfig& config) const {
    config.kernel = parse_kernel(kernel);
    config.bandwidth = bandwidth;
    config.lrpc.lambda = lambda;
    config.lrpc.kernel = parse_kernel(kernel);
    config.lrpc.bandwidth = bandwidth;
    config.lrpc.epochs = epochs;
    config.forest.n_trees = trees;
    config.forest.max_depth = depth;
    config.forest.min_samples_split = min_split;
  }

  std::vector<EstimatorConfig> parse(const std::string& models) const {
    std::vector<EstimatorConfig> configs;
    for (const std::string& spec : split_csv_list(models)) {
      EstimatorConfig c = parse_estimator(spec, default_edtw(dtw), default_knn(k));
      apply(c);
      configs.push_back(std::move(c));
    }
    require(!configs.empty(), ErrorKind::invalid_argument, "no models given");
    return configs;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--k", k, "neighbors for kNN similarity");
    cmd->add_option("--dtw", dtw, "window minutes for eDTW (0 = five periods)");
    cmd->add_option("--kernel", kernel, "gaussian|epanechnikov");
    cmd->add_option("--bandwidth", bandwidth, "kernel bandwidth, minutes");
    cmd->add_option("--lambda", lambda, "LR-PC L2 strength");
    cmd->add_option("--epochs", epochs, "LR-PC training epochs");
    cmd->add_option("--trees", trees, "forest size");
    cmd->add_option("--depth", depth, "forest max depth");
    cmd->add_option("--min-split", min_split, "forest min samples per split");
  }
};

DatasetSplit load_split(const std::string& reduced, const std::string& validation,
                        const std::string& test) {
  DatasetSplit split;
  split.reduced_training = read_trips(reduced);
  if (!validation.empty()) split.validation = read_trips(validation);
  if (!test.empty()) split.test = read_trips(test);

  std::set<std::string> training_routes;
  for (const TripRecord& t : split.reduced_training) training_routes.insert(t.route_id());
  for (const TripRecord& t : split.validation) training_routes.insert(t.route_id());
  std::set<std::string> flagged;
  for (const TripRecord& t : split.test) {
    if (!training_routes.count(t.route_id())) flagged.insert(t.route_id());
  }
  split.test_only_routes.assign(flagged.begin(), flagged.end());
  return split;
}

// ---------------------------------------------------------------------------
// Subcommand bodies.

int cmd_synth(const std::string& config_path, const SharedFlags& shared,
              const std::string& out_path, const std::string& manifest_path) {
  const SynthConfig config = synth_config_from_json(load_json(config_path));
  const std::vector<TripRecord> trips = generate(config, shared.seed);
  write_trips_csv_file(out_path, trips);
  if (!manifest_path.empty()) {
    ordered_json m = run_stamp("synth", shared.seed, {{"trips", fingerprint(trips)}});
    m["config"] = synth_config_to_json(config);
    m["n_trips"] = trips.size();
    write_json(manifest_path, m);
  }
  std::cout << "generated " << trips.size() << " trips -> " << out_path << "\n";
  return kExitOk;
}

int cmd_ingest(const std::string& in_path, const std::string& out_path,
               const std::string& rejected_path, const std::string& holidays_path,
               const std::string& exclude_path) {
  IngestOptions opts;
  if (!holidays_path.empty()) opts.holiday_dates = read_lines(holidays_path);
  if (!exclude_path.empty()) opts.excluded_trip_ids = read_lines(exclude_path);
  const IngestResult r = ingest_avl_file(in_path, opts);
  write_trips_csv_file(out_path, r.trips);
  if (!rejected_path.empty()) {
    std::ofstream out(rejected_path);
    require(static_cast<bool>(out), ErrorKind::data, "cannot write '" + rejected_path + "'");
    write_rejections_csv(out, r.rejected);
  }
  std::cout << "kept " << r.trips.size() << " trips, rejected " << r.rejected.size() << "\n";
  return kExitOk;
}

int cmd_filter(const std::string& in_path, const std::string& out_path,
               const std::string& discarded_path, double multiplier, const std::string& scale,
               const std::string& report_path) {
  MadFilterOptions opts;
  opts.multiplier = multiplier;
  if (scale == "stddev") {
    opts.scale = RobustScale::stddev;
  } else {
    require(scale == "mad", ErrorKind::invalid_argument, "--scale must be mad or stddev");
  }
  const std::vector<TripRecord> trips = read_trips(in_path);
  const MadFilterResult r = mad_filter(trips, opts);
  write_trips_csv_file(out_path, r.kept);
  if (!discarded_path.empty()) write_trips_csv_file(discarded_path, r.discarded);
  if (!report_path.empty()) {
    ordered_json j = run_stamp("filter", 0, {{"input", fingerprint(trips)},
                                             {"kept", fingerprint(r.kept)}});
    j["multiplier"] = multiplier;
    j["scale"] = scale;
    j["kept"] = r.kept.size();
    j["discarded"] = r.discarded.size();
    j["unfiltered_routes"] = r.unfiltered_routes;
    write_json(report_path, j);
  }
  std::cout << "kept " << r.kept.size() << ", discarded " << r.discarded.size() << "\n";
  return kExitOk;
}

int cmd_split(const std::string& in_path, const std::string& outdir,
              const std::string& train_start, const std::string& train_end, int gap_days,
              const std::string& test_start, const std::string& test_end,
              double validation_fraction) {
  SplitConfig config;
  if (!train_start.empty()) config.training_start = parse_date(train_start);
  config.training_end = parse_date(train_end);
  config.gap_days = gap_days;
  config.test_start = parse_date(test_start);
  config.test_end = parse_date(test_end);
  config.validation_fraction = validation_fraction;

  const std::vector<TripRecord> trips = read_trips(in_path);
  const DatasetSplit split = chronological_split(trips, config);

  write_trips_csv_file(outdir + "/reduced_training.csv", split.reduced_training);
  write_trips_csv_file(outdir + "/validation.csv", split.validation);
  write_trips_csv_file(outdir + "/test.csv", split.test);

  ordered_json m = run_stamp("split", 0,
                             {{"input", fingerprint(trips)},
                              {"reduced_training", fingerprint(split.reduced_training)},
                              {"validation", fingerprint(split.validation)},
                              {"test", fingerprint(split.test)}});
  m["files"] = {{"reduced_training", "reduced_training.csv"},
                {"validation", "validation.csv"},
                {"test", "test.csv"}};
  m["config"] = {{"training_start", train_start.empty() ? "auto" : train_start},
                 {"training_end", train_end},
                 {"gap_days", gap_days},
                 {"test_start", test_start},
                 {"test_end", test_end},
                 {"validation_fraction", validation_fraction}};
  m["routes_without_validation"] = split.routes_without_validation;
  m["test_only_routes"] = split.test_only_routes;
  write_json(outdir + "/manifest.json", m);

  std::cout << "reduced_training " << split.reduced_training.size() << ", validation "
            << split.validation.size() << ", test " << split.test.size() << "\n";
  return kExitOk;
}

ordered_json estimator_config_json(const EstimatorConfig& c) {
  ordered_json j;
  j["spec"] = c.id();
  switch (c.type) {
    case EstimatorConfig::Type::kde:
      j["kernel"] = to_string(c.kernel);
      j["bandwidth"] = c.bandwidth;
      break;
    case EstimatorConfig::Type::lrpc:
      j["lambda"] = c.lrpc.lambda;
      j["kernel"] = to_string(c.lrpc.kernel);
      j["bandwidth"] = c.lrpc.bandwidth;
      j["epochs"] = c.lrpc.epochs;
      break;
    case EstimatorConfig::Type::forest:
      j["n_trees"] = c.forest.n_trees;
      j["max_depth"] = c.forest.max_depth;
      j["min_samples_split"] = c.forest.min_samples_split;
      break;
    default: break;
  }
  return j;
}

int cmd_fit(const std::string& spec, const std::string& train_path, const std::string& out_path,
            const SharedFlags& shared, const EstimatorFlags& flags) {
  EstimatorConfig config = parse_estimator(spec, default_edtw(flags.dtw), default_knn(flags.k));
  flags.apply(config);
  const std::vector<TripRecord> training = read_trips(train_path);
  const std::uint64_t fp = fingerprint(training);

  ordered_json bundle;
  bundle["config"] = estimator_config_json(config);
  bundle["stamp"] = run_stamp("fit", shared.seed, {{"train", fp}});
  bundle["train_path"] = train_path;

  switch (config.type) {
    case EstimatorConfig::Type::parametric:
    case EstimatorConfig::Type::gmm:
    case EstimatorConfig::Type::kde:
      // Similarity estimators are lazy: the model is the training reference
      // plus the selection/density settings.
      bundle["kind"] = "similarity";
      break;
    case EstimatorConfig::Type::lrpc: {
      bundle["kind"] = "lrpc";
      std::map<std::string, std::vector<TripRecord>> by_route;
      for (const TripRecord& t : training) by_route[t.route_id()].push_back(t);
      ordered_json routes = ordered_json::array();
      for (const auto& [route, trips] : by_route) {
        if (trips.size() < static_cast<std::size_t>(config.lrpc.min_route_trips)) continue;
        routes.push_back(lrpc_to_json(
            fit_lrpc(trips, config.lrpc,
                     derive_seed(derive_seed(shared.seed, config.id()), route))));
      }
      bundle["routes"] = std::move(routes);
      break;
    }
    case EstimatorConfig::Type::forest: {
      const FeatureSchema schema = FeatureSchema::fit(training, forest_feature_names());
      const ForestDataset data = ForestDataset::build(training, schema);
      const ForestModel forest =
          fit_forest(data, config.forest,
                     derive_seed(derive_seed(shared.seed, config.id()), "forest"),
                     shared.resolved_jobs());
      bundle["kind"] = "forest";
      bundle["schema"] = schema_to_json(schema);
      bundle["forest"] = forest_to_json(forest);
      break;
    }
  }
  write_json(out_path, bundle);
  std::cout << "model -> " << out_path << "\n";
  return kExitOk;
}

// Produces one density per trip from a fitted bundle.
std::vector<DensityModel> bundle_predict(const ordered_json& bundle,
                                         const std::vector<TripRecord>& trips,
                                         const std::string& train_override,
                                         const SharedFlags& shared, std::vector<char>* skipped) {
  const std::string kind = bundle.at("kind");
  skipped->assign(trips.size(), 0);
  std::vector<DensityModel> out(trips.size());

  if (kind == "similarity") {
    const std::string train_path =
        train_override.empty() ? bundle.at("train_path").get<std::string>() : train_override;
    const std::vector<TripRecord> training = read_trips(train_path);
    const std::string want = bundle.at("stamp").at("inputs").at("train");
    require(hex64(fingerprint(training)) == want, ErrorKind::data,
            "training data does not match the model's fingerprint");
    EstimatorConfig config =
        parse_estimator(bundle.at("config").at("spec"), default_edtw(60), default_knn(13));
    if (config.type == EstimatorConfig::Type::kde) {
      config.kernel = parse_kernel(bundle.at("config").at("kernel"));
      config.bandwidth = bundle.at("config").at("bandwidth");
    }
    const FittedEstimator est =
        FittedEstimator::fit(training, config,
                             derive_seed(bundle.at("stamp").at("seed").get<std::uint64_t>(),
                                         config.id()),
                             shared.resolved_jobs());
    auto preds = est.predict(trips, shared.resolved_jobs());
    *skipped = preds.skipped;
    return preds.densities;
  }

  if (kind == "lrpc") {
    std::map<std::string, LrpcModel> models;
    for (const auto& rj : bundle.at("routes")) {
      LrpcModel m = lrpc_from_json(rj);
      models.emplace(m.route_id, std::move(m));
    }
    for (std::size_t i = 0; i < trips.size(); ++i) {
      const auto it = models.find(trips[i].route_id());
      if (it == models.end()) {
        (*skipped)[i] = 1;
        continue;
      }
      out[i] = it->second.predict_density(trips[i].scheduled_departure);
    }
    return out;
  }

  if (kind == "forest") {
    const FeatureSchema schema = schema_from_json(bundle.at("schema"));
    const ForestModel forest = forest_from_json(bundle.at("forest"));
    for (std::size_t i = 0; i < trips.size(); ++i) {
      out[i] = forest_as_gaussian(forest, schema.encode(trips[i]).values);
    }
    return out;
  }

  throw_error(ErrorKind::data, "unknown model kind: '" + kind + "'");
}

int cmd_predict(const std::string& model_path, const std::string& trips_path,
                const std::string& out_path, const std::string& train_override,
                const SharedFlags& shared) {
  const ordered_json bundle = load_json(model_path);
  const std::vector<TripRecord> trips = read_trips(trips_path);
  std::vector<char> skipped;
  const std::vector<DensityModel> densities =
      bundle_predict(bundle, trips, train_override, shared, &skipped);

  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < trips.size(); ++i) {
    ordered_json j;
    j["trip_id"] = trips[i].trip_id;
    if (skipped[i]) {
      j["skipped"] = true;
    } else {
      j["density"] = density_to_json(densities[i]);
      const auto mean = densities[i].mean();
      if (mean) j["mean"] = *mean;
    }
    rows.push_back(std::move(j));
  }
  ordered_json j;
  j["stamp"] = run_stamp("predict", shared.seed, {{"trips", fingerprint(trips)}});
  j["model_config"] = bundle.at("config");
  j["predictions"] = std::move(rows);
  write_json(out_path, j);
  std::cout << "predicted " << trips.size() << " densities -> " << out_path << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& trips_path,
                 const std::string& out_path, const std::string& train_override,
                 const SharedFlags& shared) {
  const ordered_json bundle = load_json(model_path);
  const std::vector<TripRecord> trips = read_trips(trips_path);
  std::vector<char> skipped;
  const std::vector<DensityModel> densities =
      bundle_predict(bundle, trips, train_override, shared, &skipped);

  double nll_sum = 0;
  std::size_t floor_hits = 0;
  std::size_t n = 0;
  double sse = 0;
  std::size_t mse_n = 0;
  for (std::size_t i = 0; i < trips.size(); ++i) {
    if (skipped[i]) continue;
    const double p = densities[i].pdf(trips[i].travel_time);
    if (p < kPdfFloor) ++floor_hits;
    nll_sum -= std::log(std::max(p, kPdfFloor));
    ++n;
    if (const auto mean = densities[i].mean()) {
      const double err = *mean - trips[i].travel_time;
      sse += err * err;
      ++mse_n;
    }
  }

  ordered_json j;
  j["stamp"] = run_stamp("evaluate", shared.seed, {{"trips", fingerprint(trips)}});
  j["model_config"] = bundle.at("config");
  j["n"] = n;
  j["skipped"] = trips.size() - n;
  j["nll_sum"] = nll_sum;
  j["nll_mean"] = n ? nll_sum / static_cast<double>(n) : 0.0;
  j["floor_hits"] = floor_hits;
  if (mse_n > 0) {
    j["tt_mse"] = sse / static_cast<double>(mse_n);
  } else {
    j["tt_mse"] = "undefined";
  }
  write_json(out_path, j);
  std::cout << "nll_mean "
            << (n ? nll_sum / static_cast<double>(n) : 0.0) << " over " << n << " trips -> "
            << out_path << "\n";
  return kExitOk;
}

int cmd_compare(const std::string& reduced, const std::string& validation,
                const std::string& test, const std::string& models, bool tune,
                const SharedFlags& shared, EstimatorFlags flags, const std::string& out_path,
                const std::string& table_path) {
  DatasetSplit split = load_split(reduced, validation, test);
  require(!split.test.empty(), ErrorKind::data, "compare needs a test set");

  if (tune) {
    // Validation-set selection: KDE bandwidth/kernel (the kNN default), then
    // the LR-PC smoothing and regularization.
    const KdeSelection kde =
        select_kde_bandwidth(split, default_knn(flags.k), derive_seed(shared.seed, "tune-kde"),
                             shared.resolved_jobs());
    flags.kernel = to_string(kde.kernel);
    flags.bandwidth = kde.bandwidth;
    LrpcConfig base;
    base.epochs = flags.epochs;
    const LrpcSelection lrpc = select_lrpc_hyperparams(
        split, base, derive_seed(shared.seed, "tune-lrpc"), shared.resolved_jobs());
    flags.lambda = lrpc.lambda;
    std::cerr << "tuned: kde kernel=" << to_string(kde.kernel) << " h=" << kde.bandwidth
              << "; lrpc lambda=" << lrpc.lambda << " kernel=" << to_string(lrpc.kernel)
              << " h=" << lrpc.bandwidth << "\n";
  }

  const std::vector<EstimatorConfig> configs = flags.parse(models);
  const MetricsReport report = compare_models(split, configs, shared.seed, shared.resolved_jobs());

  ordered_json j = metrics_report_to_json(report);
  j["stamp"] = run_stamp("compare", shared.seed,
                         {{"reduced_training", fingerprint(split.reduced_training)},
                          {"validation", fingerprint(split.validation)},
                          {"test", fingerprint(split.test)}});
  write_json(out_path, j);

  const std::string tables =
      render_compare_table(report) + "\n" + render_mse_table(report);
  if (!table_path.empty()) write_text(table_path, tables);
  std::cout << tables;
  return kExitOk;
}

int cmd_sweep_dtw(const std::string& reduced, const std::string& validation,
                  const std::string& models, const std::string& modes_csv,
                  const SharedFlags& shared, EstimatorFlags flags, const std::string& out_path,
                  const std::string& csv_path) {
  const DatasetSplit split = load_split(reduced, validation, "");
  require(!split.validation.empty(), ErrorKind::data, "sweep-dtw needs a validation set");

  std::vector<DtwSpec> modes;
  for (const std::string& m : split_csv_list(modes_csv)) {
    DtwSpec spec;
    if (m == "5p") {
      spec.mode = DtwMode::five_periods;
    } else {
      spec.mode = DtwMode::minutes;
      spec.window_minutes = std::stoi(m);
    }
    modes.push_back(spec);
  }
  require(!modes.empty(), ErrorKind::invalid_argument, "no aggregation modes given");

  const std::vector<EstimatorConfig> configs = flags.parse(models);
  const SweepDtwReport report =
      sweep_dtw(split, configs, modes, shared.seed, shared.resolved_jobs());

  ordered_json j = sweep_dtw_to_json(report);
  j["stamp"] = run_stamp("sweep-dtw", shared.seed,
                         {{"reduced_training", fingerprint(split.reduced_training)},
                          {"validation", fingerprint(split.validation)}});
  write_json(out_path, j);
  if (!csv_path.empty()) write_text(csv_path, render_dtw_series_csv(report));
  std::cout << render_dtw_table(report);
  return kExitOk;
}

int cmd_sweep_k(const std::string& reduced, const std::string& validation,
                const std::string& models, const std::string& k_grid_csv,
                const SharedFlags& shared, EstimatorFlags flags, const std::string& out_path,
                const std::string& csv_path) {
  const DatasetSplit split = load_split(reduced, validation, "");
  require(!split.validation.empty(), ErrorKind::data, "sweep-k needs a validation set");

  std::vector<int> k_grid;
  if (k_grid_csv.empty()) {
    k_grid = default_k_grid();
  } else {
    for (const std::string& k : split_csv_list(k_grid_csv)) k_grid.push_back(std::stoi(k));
  }

  const std::vector<EstimatorConfig> configs = flags.parse(models);
  const SweepKReport report = sweep_k(split, configs, k_grid, shared.seed, shared.resolved_jobs());

  ordered_json j = sweep_k_to_json(report);
  j["stamp"] = run_stamp("sweep-k", shared.seed,
                         {{"reduced_training", fingerprint(split.reduced_training)},
                          {"validation", fingerprint(split.validation)}});
  write_json(out_path, j);
  if (!csv_path.empty()) write_text(csv_path, render_k_series_csv(report));
  for (const EstimatorConfig& c : configs) {
    const auto best = report.best_k(c.model_label());
    if (best) std::cout << c.model_label() << ": best k = " << *best << "\n";
  }
  return kExitOk;
}

int cmd_importance(const std::string& train_path, const std::string& data_path, int shuffles,
                   const SharedFlags& shared, const EstimatorFlags& flags,
                   const std::string& out_path, const std::string& table_path) {
  const std::vector<TripRecord> training = read_trips(train_path);
  const FeatureSchema schema = FeatureSchema::fit(training, forest_feature_names());
  const ForestDataset train_data = ForestDataset::build(training, schema);

  ForestHyperparams params;
  params.n_trees = flags.trees;
  params.max_depth = flags.depth;
  params.min_samples_split = flags.min_split;
  const ForestModel forest =
      fit_forest(train_data, params, derive_seed(shared.seed, "forest"), shared.resolved_jobs());

  // Held-out data when provided, training data otherwise.
  const bool on_training = data_path.empty();
  const ForestDataset eval_data =
      on_training ? train_data : ForestDataset::build(read_trips(data_path), schema);
  const std::vector<ImportanceRow> rows =
      importance_report(forest, eval_data, shuffles, derive_seed(shared.seed, "importance"));

  ordered_json j;
  j["stamp"] = run_stamp("importance", shared.seed, {{"train", fingerprint(training)}});
  j["on_training_data"] = on_training;
  j["n_shuffles"] = shuffles;
  ordered_json rj = ordered_json::array();
  for (const ImportanceRow& r : rows) {
    rj.push_back({{"feature", r.feature},
                  {"importance", r.importance},
                  {"relative_pct", r.relative_pct}});
  }
  j["rows"] = std::move(rj);
  write_json(out_path, j);

  const std::string table = render_importance_table(rows);
  if (!table_path.empty()) write_text(table_path, table);
  std::cout << table;
  return kExitOk;
}

int cmd_delays(const std::string& schedule_path, const std::string& model_path,
               const std::string& densities_path, std::size_t samples, const SharedFlags& shared,
               const std::string& out_path) {
  const ordered_json sj = load_json(schedule_path);
  const VehicleSchedule schedule = schedule_from_json(sj);
  require(schedule.size() >= 1, ErrorKind::data, "schedule has no trips");

  ordered_json j;
  j["stamp"] = run_stamp("delays", shared.seed, {});
  j["schedule"] = schedule_to_json(schedule);

  // Deterministic replay when the schedule carries realized travel times.
  if (sj.contains("realized_tt")) {
    const std::vector<double> tts = sj.at("realized_tt").get<std::vector<double>>();
    const RealizedTimes r = realized_departures(schedule, tts);
    j["realized"] = {{"departures", r.departures},
                     {"arrivals", r.arrivals},
                     {"secondary_delays", r.secondary_delays}};
  }

  if (!model_path.empty() || !densities_path.empty()) {
    std::vector<DensityModel> densities;
    if (!densities_path.empty()) {
      const ordered_json dj = load_json(densities_path);
      for (std::size_t i = 0; i + 1 < schedule.size(); ++i) {
        const std::string& id = schedule.trips[i].trip_id;
        require(dj.contains(id), ErrorKind::data, "no density for trip '" + id + "'");
        densities.push_back(density_from_json(dj.at(id)));
      }
    } else {
      const DensityModel one = density_from_json(load_json(model_path));
      densities.assign(schedule.size() - 1, one);
    }
    const DelayProfile profile = expected_secondary_delay_mc(
        schedule, densities, samples, shared.seed, shared.resolved_jobs());
    j["profile"] = profile_to_json(schedule, profile);
  }

  write_json(out_path, j);
  std::cout << "delays -> " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probabilistic bus travel-time prediction and schedule evaluation"};
  app.require_subcommand(1);
  app.fallthrough();  // --seed/--jobs are accepted after the subcommand too

  SharedFlags shared;
  app.add_option("--seed", shared.seed, "master seed; all randomness derives from it");
  app.add_option("--jobs", shared.jobs, "worker threads (default: logical cores)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic AVL dataset");
  std::string synth_config, synth_out, synth_manifest;
  synth->add_option("--config", synth_config, "generator config JSON")->required();
  synth->add_option("--out", synth_out, "output trips CSV")->required();
  synth->add_option("--manifest", synth_manifest, "run manifest JSON");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse and validate a raw AVL feed");
  std::string ingest_in, ingest_out, ingest_rejected, ingest_holidays, ingest_exclude;
  ingest->add_option("--in", ingest_in)->required();
  ingest->add_option("--out", ingest_out)->required();
  ingest->add_option("--rejected", ingest_rejected, "rejected rows CSV");
  ingest->add_option("--holidays", ingest_holidays, "file with one ISO date per line");
  ingest->add_option("--exclude", ingest_exclude, "file with one trip_id per line");

  // filter
  auto* filter = app.add_subcommand("filter", "remove outlier trips per route");
  std::string filter_in, filter_out, filter_discarded, filter_scale = "mad", filter_report;
  double filter_multiplier = 6.0;
  filter->add_option("--in", filter_in)->required();
  filter->add_option("--out", filter_out)->required();
  filter->add_option("--discarded", filter_discarded);
  filter->add_option("--multiplier", filter_multiplier, "deviation multiplier");
  filter->add_option("--scale", filter_scale, "mad|stddev");
  filter->add_option("--report", filter_report, "filter report JSON");

  // split
  auto* split = app.add_subcommand("split", "chronological train/validation/test split");
  std::string split_in, split_outdir, split_train_start, split_train_end, split_test_start,
      split_test_end;
  int split_gap_days = 7;
  double split_validation_fraction = 0.2;
  split->add_option("--in", split_in)->required();
  split->add_option("--outdir", split_outdir)->required();
  split->add_option("--train-start", split_train_start, "default: earliest date");
  split->add_option("--train-end", split_train_end)->required();
  split->add_option("--gap-days", split_gap_days);
  split->add_option("--test-start", split_test_start)->required();
  split->add_option("--test-end", split_test_end)->required();
  split->add_option("--validation-fraction", split_validation_fraction);

  // fit / predict / evaluate
  auto* fit = app.add_subcommand("fit", "fit one estimator and save the model");
  std::string fit_spec, fit_train, fit_out;
  EstimatorFlags fit_flags;
  fit->add_option("--estimator", fit_spec, "e.g. kde:knn, loglogistic:edtw, lrpc, forest")
      ->required();
  fit->add_option("--train", fit_train)->required();
  fit->add_option("--out", fit_out)->required();
  fit_flags.attach(fit);

  auto* predict = app.add_subcommand("predict", "densities for a trip list");
  std::string predict_model, predict_trips, predict_out, predict_train;
  predict->add_option("--model", predict_model)->required();
  predict->add_option("--trips", predict_trips)->required();
  predict->add_option("--out", predict_out)->required();
  predict->add_option("--train", predict_train, "training CSV for similarity models");

  auto* evaluate = app.add_subcommand("evaluate", "NLL/MSE of a model on a trip list");
  std::string eval_model, eval_trips, eval_out, eval_train;
  evaluate->add_option("--model", eval_model)->required();
  evaluate->add_option("--trips", eval_trips)->required();
  evaluate->add_option("--out", eval_out)->required();
  evaluate->add_option("--train", eval_train, "training CSV for similarity models");

  // compare
  auto* compare = app.add_subcommand("compare", "train/test scoreboard over model configs");
  std::string cmp_reduced, cmp_validation, cmp_test, cmp_models, cmp_out, cmp_table;
  bool cmp_tune = false;
  EstimatorFlags cmp_flags;
  compare->add_option("--reduced", cmp_reduced, "reduced training CSV")->required();
  compare->add_option("--validation", cmp_validation)->required();
  compare->add_option("--test", cmp_test)->required();
  compare->add_option("--models", cmp_models, "comma list, e.g. kde:knn,loglogistic:knn,lrpc")
      ->required();
  compare->add_flag("--tune", cmp_tune, "validation grid search for KDE/LR-PC hyperparameters");
  compare->add_option("--out", cmp_out)->required();
  compare->add_option("--table", cmp_table, "aligned-text tables");
  cmp_flags.attach(compare);

  // sweeps
  auto* sweep_dtw_cmd = app.add_subcommand("sweep-dtw", "temporal aggregation sweep");
  std::string sd_reduced, sd_validation, sd_models, sd_modes = "5p,60,30", sd_out, sd_csv;
  EstimatorFlags sd_flags;
  sweep_dtw_cmd->add_option("--reduced", sd_reduced)->required();
  sweep_dtw_cmd->add_option("--validation", sd_validation)->required();
  sweep_dtw_cmd->add_option("--models", sd_models)->required();
  sweep_dtw_cmd->add_option("--modes", sd_modes, "comma list: 5p,60,30");
  sweep_dtw_cmd->add_option("--out", sd_out)->required();
  sweep_dtw_cmd->add_option("--csv", sd_csv, "plot-ready series");
  sd_flags.attach(sweep_dtw_cmd);

  auto* sweep_k_cmd = app.add_subcommand("sweep-k", "neighbor count sweep");
  std::string sk_reduced, sk_validation, sk_models, sk_grid, sk_out, sk_csv;
  EstimatorFlags sk_flags;
  sweep_k_cmd->add_option("--reduced", sk_reduced)->required();
  sweep_k_cmd->add_option("--validation", sk_validation)->required();
  sweep_k_cmd->add_option("--models", sk_models)->required();
  sweep_k_cmd->add_option("--k-grid", sk_grid, "comma list (default 2..40)");
  sweep_k_cmd->add_option("--out", sk_out)->required();
  sweep_k_cmd->add_option("--csv", sk_csv, "plot-ready series");
  sk_flags.attach(sweep_k_cmd);

  // importance
  auto* importance = app.add_subcommand("importance", "permutation feature importance");
  std::string imp_train, imp_data, imp_out, imp_table;
  int imp_shuffles = 10;
  EstimatorFlags imp_flags;
  importance->add_option("--train", imp_train)->required();
  importance->add_option("--data", imp_data, "held-out CSV (default: training data)");
  importance->add_option("--shuffles", imp_shuffles);
  importance->add_option("--out", imp_out)->required();
  importance->add_option("--table", imp_table);
  imp_flags.attach(importance);

  // delays
  auto* delays = app.add_subcommand("delays", "secondary delays of a vehicle schedule");
  std::string delays_schedule, delays_model, delays_densities, delays_out;
  std::size_t delays_samples = 10000;
  delays->add_option("--schedule", delays_schedule)->required();
  delays->add_option("--model", delays_model, "single density JSON for every trip");
  delays->add_option("--densities", delays_densities, "JSON map trip_id -> density");
  delays->add_option("--samples", delays_samples);
  delays->add_option("--out", delays_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_config, shared, synth_out, synth_manifest);
    if (ingest->parsed())
      return cmd_ingest(ingest_in, ingest_out, ingest_rejected, ingest_holidays, ingest_exclude);
    if (filter->parsed())
      return cmd_filter(filter_in, filter_out, filter_discarded, filter_multiplier, filter_scale,
                        filter_report);
    if (split->parsed())
      return cmd_split(split_in, split_outdir, split_train_start, split_train_end, split_gap_days,
                       split_test_start, split_test_end, split_validation_fraction);
    if (fit->parsed()) return cmd_fit(fit_spec, fit_train, fit_out, shared, fit_flags);
    if (predict->parsed())
      return cmd_predict(predict_model, predict_trips, predict_out, predict_train, shared);
    if (evaluate->parsed())
      return cmd_evaluate(eval_model, eval_trips, eval_out, eval_train, shared);
    if (compare->parsed())
      return cmd_compare(cmp_reduced, cmp_validation, cmp_test, cmp_models, cmp_tune, shared,
                         cmp_flags, cmp_out, cmp_table);
    if (sweep_dtw_cmd->parsed())
      return cmd_sweep_dtw(sd_reduced, sd_validation, sd_models, sd_modes, shared, sd_flags,
                           sd_out, sd_csv);
    if (sweep_k_cmd->parsed())
      return cmd_sweep_k(sk_reduced, sk_validation, sk_models, sk_grid, shared, sk_flags, sk_out,
                         sk_csv);
    if (importance->parsed())
      return cmd_importance(imp_train, imp_data, imp_shuffles, shared, imp_flags, imp_out,
                            imp_table);
    if (delays->parsed())
      return cmd_delays(delays_schedule, delays_model, delays_densities, delays_samples, shared,
                        delays_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::numeric ? kExitNumeric : kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad JSON input: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
