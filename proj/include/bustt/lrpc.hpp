#pragma once

#include <span>
#include <string>
#include <vector>

#include "bustt/density.hpp"
#include "bustt/trip.hpp"

#include "json.hpp"

namespace bustt {

// 1-minute travel-time classes for one route: class c covers
// [c + t_min, c + 1 + t_min), t_min = floor of the shortest training TT.
struct ClassGrid {
  double t_min = 0;
  int num_classes = 1;

  int class_of(double travel_time) const;  // clamped into [0, num_classes)
};

ClassGrid make_class_grid(std::span<const double> travel_times);

// Scheduled-departure encoding: 22 one-hot hour bins, 44 one-hot half-hour
// bins, sine and cosine of the 24-hour clock angle, and the raw departure
// scaled to [0,1] over the service span.
constexpr int kLrpcFeatureDim = 69;
std::vector<double> encode_lrpc_features(double scheduled_departure);

struct LrpcConfig {
  double lambda = 1e-3;  // L2 strength
  int epochs = 100;
  int batch_size = 32;
  double step = 0.1;  // decays as 1/sqrt(epoch)
  Kernel kernel = Kernel::gaussian;
  double bandwidth = 1.0;
  int min_route_trips = 10;
};

// Per-route multinomial logistic regression over the class grid, trained by
// seeded mini-batch gradient descent on the L2-regularized cross-entropy.
// Weights are row-major (num_classes x (kLrpcFeatureDim + 1)); the intercept
// is the last column.
struct LrpcModel {
  std::string route_id;
  ClassGrid grid;
  double lambda = 0;
  Kernel kernel = Kernel::gaussian;
  double bandwidth = 1.0;
  std::vector<double> weights;
  std::vector<double> loss_trace;  // mean regularized loss per epoch

  std::vector<double> predict_pmf(double scheduled_departure) const;
  DensityModel predict_density(double scheduled_departure) const;
  double weight_norm_sq() const;
};

/// Throws ErrorKind::data when the route has fewer than min_route_trips trips.
LrpcModel fit_lrpc(const std::vector<TripRecord>& route_trips, const LrpcConfig& config,
                   std::uint64_t seed);

/// Softmax with max-subtraction; strictly positive, sums to one.
std::vector<double> softmax(std::span<const double> logits);

/// Kernel-smoothed density from a pmf over the grid; pmf must sum to one.
DensityModel smooth_pmf(std::span<const double> pmf, const ClassGrid& grid, Kernel kernel,
                        double bandwidth);

nlohmann::ordered_json lrpc_to_json(const LrpcModel& model);
LrpcModel lrpc_from_json(const nlohmann::ordered_json& j);

}  // namespace bustt
