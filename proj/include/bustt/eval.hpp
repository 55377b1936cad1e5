#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bustt/density.hpp"
#include "bustt/forest.hpp"
#include "bustt/lrpc.hpp"
#include "bustt/similarity.hpp"
#include "bustt/split.hpp"

#include "json.hpp"

namespace bustt {

struct SimilarityMethod {
  enum class Type { edtw, knn };
  Type type = Type::knn;
  DtwSpec dtw;
  KnnSpec knn;

  std::string label() const;  // "eDTW(60min)", "kNN(13)"
};

struct EstimatorConfig {
  enum class Type { parametric, gmm, kde, lrpc, forest };

  Type type = Type::parametric;
  Family family = Family::normal;
  int components = 3;                // gmm
  Kernel kernel = Kernel::gaussian;  // kde / lrpc smoothing
  double bandwidth = 1.0;
  LrpcConfig lrpc;
  ForestHyperparams forest;
  std::optional<SimilarityMethod> similarity;  // parametric / gmm / kde only

  std::string model_label() const;  // "Log-Logistic", "KDE", "LR-PC", ...
  std::string id() const;           // stable row id, e.g. "loglogistic:knn13"
};

/// Parses "kde:knn", "cauchy:edtw", "lrpc", "forest", "gmm:edtw", ...
EstimatorConfig parse_estimator(const std::string& spec, const SimilarityMethod& default_edtw,
                                const SimilarityMethod& default_knn);

struct NllResult {
  double sum = 0;
  double mean = 0;
  std::size_t n = 0;
  std::size_t floor_hits = 0;  // pdf below kPdfFloor at the observed TT
};

/// -sum_i log p_i(t_i); one density per trip, matched order.
NllResult nll(std::span<const DensityModel> densities, std::span<const TripRecord> trips);

/// MSE of density means against observed TTs; empty when any mean is undefined.
std::optional<double> tt_mse(std::span<const DensityModel> densities,
                             std::span<const TripRecord> trips);

// A fitted estimator: immutable after construction, predictions are pure.
// Similarity estimators fit one density per distinct selection key (route x
// window, or route x departure x week), which also serves as the
// deduplication cache for repeated queries.
class FittedEstimator {
public:
  static FittedEstimator fit(const std::vector<TripRecord>& training,
                             const EstimatorConfig& config, std::uint64_t seed, int jobs = 1);

  struct Predictions {
    std::vector<DensityModel> densities;  // parallel to the input trips
    std::vector<char> skipped;            // trip could not be scored (route unseen, ...)
    std::size_t fallback_count = 0;       // selection fell back to the whole route pool
  };

  Predictions predict(const std::vector<TripRecord>& trips, int jobs = 1) const;

  /// Copy with a different smoothing kernel/bandwidth (LR-PC tuning reuses fits).
  FittedEstimator rebind_smoothing(Kernel kernel, double bandwidth) const;

  const EstimatorConfig& config() const { return config_; }

private:
  EstimatorConfig config_;
  std::uint64_t seed_ = 0;
  std::shared_ptr<const TrainingIndex> index_;           // similarity estimators
  std::map<std::string, LrpcModel> lrpc_models_;         // per route
  std::shared_ptr<const ForestModel> forest_;
  FeatureSchema forest_schema_;
};

struct ScoreStats {
  double nll_sum = 0;
  double nll_mean = 0;
  std::size_t n = 0;
  std::size_t floor_hits = 0;
  std::size_t fallbacks = 0;
  std::size_t skipped = 0;
};

struct EvalRow {
  std::string model;
  std::string similarity;  // "-" when not similarity-based
  ScoreStats train;
  ScoreStats test;
  std::optional<double> test_mse;
  bool mse_undefined = false;  // Cauchy: no mean
  std::string error;           // nonempty when this configuration failed
};

struct MetricsReport {
  std::vector<EvalRow> rows;  // config order
  std::uint64_t seed = 0;
  std::uint64_t train_fingerprint = 0;
  std::uint64_t test_fingerprint = 0;
  nlohmann::ordered_json config_echo;
};

// Fits every configuration on the full training set (reduced + validation),
// scores training and test NLL and the point-prediction MSE. Single-config
// failures are recorded on their row; the run continues.
MetricsReport compare_models(const DatasetSplit& split,
                             const std::vector<EstimatorConfig>& configs, std::uint64_t seed,
                             int jobs = 1);

struct SweepDtwCell {
  std::string estimator;
  std::string mode;
  double train_nll = 0;
  double val_nll = 0;
  bool overfit = false;  // train improved while validation degraded vs the coarser mode
  std::string error;
};

struct SweepDtwReport {
  std::vector<DtwSpec> modes;
  std::vector<SweepDtwCell> cells;
};

/// Temporal-aggregation sweep on the reduced-training / validation split.
SweepDtwReport sweep_dtw(const DatasetSplit& split,
                         const std::vector<EstimatorConfig>& estimators,
                         const std::vector<DtwSpec>& modes, std::uint64_t seed, int jobs = 1);

struct SweepKCell {
  std::string estimator;
  int k = 0;
  double val_nll = 0;
  std::string error;
};

struct SweepKReport {
  std::vector<int> k_grid;
  std::vector<SweepKCell> cells;

  std::optional<int> best_k(const std::string& estimator) const;
};

SweepKReport sweep_k(const DatasetSplit& split, const std::vector<EstimatorConfig>& estimators,
                     const std::vector<int>& k_grid, std::uint64_t seed, int jobs = 1);

std::vector<int> default_k_grid();  // 2..40

struct KdeSelection {
  Kernel kernel = Kernel::gaussian;
  double bandwidth = 1.0;
  double val_nll = 0;
};

/// Validation grid search over h x kernel (bandwidths in minutes).
KdeSelection select_kde_bandwidth(const DatasetSplit& split, const SimilarityMethod& similarity,
                                  std::uint64_t seed, int jobs = 1);

struct LrpcSelection {
  double lambda = 1e-3;
  Kernel kernel = Kernel::gaussian;
  double bandwidth = 1.0;
  double val_nll = 0;
};

LrpcSelection select_lrpc_hyperparams(const DatasetSplit& split, const LrpcConfig& base,
                                      std::uint64_t seed, int jobs = 1);

// Scoring kernels shared by compare/sweeps: one fit per distinct selection
// key; serial reference and OpenMP version produce identical predictions.
// Exposed for the equivalence tests and the kernel benchmark.
FittedEstimator::Predictions predict_serial(const FittedEstimator& estimator,
                                            const std::vector<TripRecord>& trips);

// Aligned-text renderings.
std::string render_compare_table(const MetricsReport& report);
std::string render_mse_table(const MetricsReport& report);
std::string render_dtw_table(const SweepDtwReport& report);
std::string render_k_table(const SweepKReport& report);
std::string render_k_series_csv(const SweepKReport& report);
std::string render_dtw_series_csv(const SweepDtwReport& report);
std::string render_importance_table(const std::vector<ImportanceRow>& rows);

nlohmann::ordered_json metrics_report_to_json(const MetricsReport& report);
nlohmann::ordered_json sweep_dtw_to_json(const SweepDtwReport& report);
nlohmann::ordered_json sweep_k_to_json(const SweepKReport& report);

}  // namespace bustt
