#include "bustt/lrpc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "bustt/error.hpp"
#include "bustt/rng.hpp"

namespace bustt {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kHourBins = 22;
constexpr int kHalfHourBins = 44;
constexpr int kWeightCols = kLrpcFeatureDim + 1;  // intercept last

}  // namespace

int ClassGrid::class_of(double travel_time) const {
  const int c = static_cast<int>(std::floor(travel_time - t_min));
  return std::clamp(c, 0, num_classes - 1);
}

ClassGrid make_class_grid(std::span<const double> travel_times) {
  require(!travel_times.empty(), ErrorKind::data, "class grid needs travel times");
  const auto [mn, mx] = std::minmax_element(travel_times.begin(), travel_times.end());
  ClassGrid grid;
  grid.t_min = std::floor(*mn);
  grid.num_classes = std::max(1, static_cast<int>(std::ceil(*mx) - std::floor(*mn)));
  return grid;
}

std::vector<double> encode_lrpc_features(double scheduled_departure) {
  require(scheduled_departure >= 0 && scheduled_departure < kServiceSpanMinutes,
          ErrorKind::invalid_argument, "departure outside the service span");

  std::vector<double> x(kLrpcFeatureDim, 0.0);
  const int hour = static_cast<int>(scheduled_departure / 60.0);
  const int half_hour = static_cast<int>(scheduled_departure / 30.0);
  x[static_cast<std::size_t>(hour)] = 1.0;
  x[static_cast<std::size_t>(kHourBins + half_hour)] = 1.0;

  // 24-hour clock angle; the service clock starts at 04:00.
  const double angle =
      kTwoPi * (scheduled_departure + kServiceClockOffsetMinutes) / 1440.0;
  x[kHourBins + kHalfHourBins] = std::sin(angle);
  x[kHourBins + kHalfHourBins + 1] = std::cos(angle);
  x[kHourBins + kHalfHourBins + 2] = scheduled_departure / kServiceSpanMinutes;
  return x;
}

std::vector<double> softmax(std::span<const double> logits) {
  double m = logits[0];
  for (const double v : logits) m = std::max(m, v);
  std::vector<double> out(logits.size());
  double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

namespace {

// Nonzero entries of the encoded departure (two one-hots, sine, cosine,
// scaled raw); dense dot products would waste most of their work.
struct SparseRow {
  std::array<int, 6> idx;
  std::array<double, 6> val;  // includes the intercept as the last entry

  static SparseRow from_departure(double departure) {
    SparseRow r{};
    const int hour = static_cast<int>(departure / 60.0);
    const int half_hour = static_cast<int>(departure / 30.0);
    const double angle = kTwoPi * (departure + kServiceClockOffsetMinutes) / 1440.0;
    r.idx = {hour, kHourBins + half_hour, kHourBins + kHalfHourBins,
             kHourBins + kHalfHourBins + 1, kHourBins + kHalfHourBins + 2, kLrpcFeatureDim};
    r.val = {1.0, 1.0, std::sin(angle), std::cos(angle), departure / kServiceSpanMinutes, 1.0};
    return r;
  }
};

std::vector<double> logits_for(const std::vector<double>& weights, int num_classes,
                               const SparseRow& row) {
  std::vector<double> logits(static_cast<std::size_t>(num_classes), 0.0);
  for (int c = 0; c < num_classes; ++c) {
    const double* w = weights.data() + static_cast<std::size_t>(c) * kWeightCols;
    double z = 0;
    for (std::size_t j = 0; j < row.idx.size(); ++j) z += w[row.idx[j]] * row.val[j];
    logits[static_cast<std::size_t>(c)] = z;
  }
  return logits;
}

}  // namespace

std::vector<double> LrpcModel::predict_pmf(double scheduled_departure) const {
  require(!weights.empty(), ErrorKind::invalid_argument, "model not fitted");
  const SparseRow row = SparseRow::from_departure(scheduled_departure);
  return softmax(logits_for(weights, grid.num_classes, row));
}

DensityModel LrpcModel::predict_density(double scheduled_departure) const {
  const std::vector<double> pmf = predict_pmf(scheduled_departure);
  return smooth_pmf(pmf, grid, kernel, bandwidth);
}

double LrpcModel::weight_norm_sq() const {
  double s = 0;
  for (const double w : weights) s += w * w;
  return s;
}

LrpcModel fit_lrpc(const std::vector<TripRecord>& route_trips, const LrpcConfig& config,
                   std::uint64_t seed) {
  require(config.lambda >= 0, ErrorKind::invalid_argument, "lambda must be >= 0");
  if (route_trips.size() < static_cast<std::size_t>(config.min_route_trips))
    throw_error(ErrorKind::data, "route skipped: " + std::to_string(route_trips.size()) +
                                     " trips < " + std::to_string(config.min_route_trips));

  const std::size_t n = route_trips.size();
  std::vector<double> tts(n);
  for (std::size_t i = 0; i < n; ++i) tts[i] = route_trips[i].travel_time;

  LrpcModel model;
  model.route_id = route_trips.front().route_id();
  model.grid = make_class_grid(tts);
  model.lambda = config.lambda;
  model.kernel = config.kernel;
  model.bandwidth = config.bandwidth;

  const int num_classes = model.grid.num_classes;
  model.weights.assign(static_cast<std::size_t>(num_classes) * kWeightCols, 0.0);

  std::vector<SparseRow> rows;
  std::vector<int> labels;
  rows.reserve(n);
  labels.reserve(n);
  for (const TripRecord& t : route_trips) {
    rows.push_back(SparseRow::from_departure(t.scheduled_departure));
    labels.push_back(model.grid.class_of(t.travel_time));
  }

  Rng rng(derive_seed(seed, "lrpc-shuffle"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto epoch_loss = [&] {
    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> logits = logits_for(model.weights, num_classes, rows[i]);
      const std::vector<double> pmf = softmax(logits);
      loss -= std::log(std::max(pmf[static_cast<std::size_t>(labels[i])], 1e-300));
    }
    loss /= static_cast<double>(n);
    return loss + config.lambda * model.weight_norm_sq();
  };

  model.loss_trace.push_back(epoch_loss());  // zero-initialization loss: log(C) + 0
  std::vector<double> best_weights = model.weights;
  double best_loss = model.loss_trace.front();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the seeded stream.
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
      std::swap(order[i], order[j]);
    }
    const double step = config.step / std::sqrt(static_cast<double>(epoch + 1));

    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      const double batch_scale = 1.0 / static_cast<double>(end - start);

      // Accumulate the batch gradient only on the touched columns.
      // L2 term applied once per batch over all weights (decoupled form).
      const double decay = std::max(1.0 - step * 2.0 * config.lambda, 0.0);
      for (double& w : model.weights) w *= decay;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        const std::vector<double> pmf =
            softmax(logits_for(model.weights, num_classes, rows[i]));
        for (int c = 0; c < num_classes; ++c) {
          const double g = pmf[static_cast<std::size_t>(c)] - (labels[i] == c ? 1.0 : 0.0);
          double* w = model.weights.data() + static_cast<std::size_t>(c) * kWeightCols;
          const double scale = step * batch_scale * g;
          for (std::size_t j = 0; j < rows[i].idx.size(); ++j)
            w[rows[i].idx[j]] -= scale * rows[i].val[j];
        }
      }
    }
    model.loss_trace.push_back(epoch_loss());
    if (model.loss_trace.back() < best_loss) {
      best_loss = model.loss_trace.back();
      best_weights = model.weights;
    }
  }

  // Keep the best epoch; the result is never worse than the uniform (zero) start.
  model.weights = std::move(best_weights);
  return model;
}

DensityModel smooth_pmf(std::span<const double> pmf, const ClassGrid& grid, Kernel kernel,
                        double bandwidth) {
  require(bandwidth > 0, ErrorKind::invalid_argument, "bandwidth must be positive");
  require(static_cast<int>(pmf.size()) == grid.num_classes, ErrorKind::invalid_argument,
          "pmf length does not match the class grid");
  double sum = 0;
  for (const double p : pmf) {
    require(p >= 0, ErrorKind::invalid_argument, "pmf entries must be nonnegative");
    sum += p;
  }
  require(std::abs(sum - 1.0) < 1e-6, ErrorKind::invalid_argument, "pmf must sum to one");

  SmoothedPmf sp;
  sp.pmf.assign(pmf.begin(), pmf.end());
  sp.t_min = grid.t_min;
  sp.kernel = kernel;
  sp.bandwidth = bandwidth;
  return DensityModel(std::move(sp));
}

nlohmann::ordered_json lrpc_to_json(const LrpcModel& model) {
  nlohmann::ordered_json j;
  j["route_id"] = model.route_id;
  j["t_min"] = model.grid.t_min;
  j["num_classes"] = model.grid.num_classes;
  j["lambda"] = model.lambda;
  j["kernel"] = to_string(model.kernel);
  j["bandwidth"] = model.bandwidth;
  j["weights"] = model.weights;  // row-major, intercept last per class
  return j;
}

LrpcModel lrpc_from_json(const nlohmann::ordered_json& j) {
  LrpcModel model;
  model.route_id = j.at("route_id");
  model.grid.t_min = j.at("t_min");
  model.grid.num_classes = j.at("num_classes");
  model.lambda = j.at("lambda");
  model.kernel = parse_kernel(j.at("kernel"));
  model.bandwidth = j.at("bandwidth");
  model.weights = j.at("weights").get<std::vector<double>>();
  require(model.weights.size() ==
              static_cast<std::size_t>(model.grid.num_classes) * kWeightCols,
          ErrorKind::invalid_argument, "weight matrix size mismatch");
  return model;
}

}  // namespace bustt
