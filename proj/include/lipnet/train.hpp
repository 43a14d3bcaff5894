#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipnet/layers.hpp"

namespace lipnet {

enum class TrainMode { kProjected, kPenalty };

struct TrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::size_t iterations = 5000;
  std::size_t batch_size = 0;  // 0: full batch
  std::uint64_t seed = 42;
  TrainMode mode = TrainMode::kProjected;
  double penalty_weight = 0.1;
  std::size_t penalty_samples = 64;
  double projection_tolerance = kTrainedTol;
  bool freeze_tau = false;

  void check() const;
};

struct Dataset {
  std::vector<Vector> inputs;
  std::vector<Vector> targets;

  std::size_t size() const { return inputs.size(); }
  std::size_t input_dim() const { return inputs.empty() ? 0 : inputs.front().size(); }
  std::size_t target_dim() const { return targets.empty() ? 0 : targets.front().size(); }
  void check() const;
};

/// CSV with a header row, `input_dim` input columns, then the target columns.
Dataset load_dataset_csv(const std::filesystem::path& path, std::size_t input_dim);

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parameter gradients are stored in a network of the same shape. ReLU′(0) = 0;
/// MaxMin ties route the gradient as if x₀ ≥ x₁.
struct GradResult {
  AnyNetwork grad;
  Vector output;
  Vector input_grad;  // only for scalar outputs
};

GradResult backprop(const AnyNetwork& net, std::span<const double> x, std::span<const double> upstream);
NetworkG backprop(const NetworkG& net, std::span<const double> x, double upstream);
NetworkGTilde backprop(const NetworkGTilde& net, std::span<const double> x, double upstream);

/// Analytic input gradient of a scalar network.
Vector input_gradient(const AnyNetwork& net, std::span<const double> x);

/// All trainable values in a fixed order (lift, layers in order, head).
Vector flatten(const AnyNetwork& net);
AnyNetwork unflatten(const AnyNetwork& shape, std::span<const double> params);
std::size_t param_count(const AnyNetwork& net);

/// Same shapes, all values zero (τ included).
AnyNetwork zeros_like(const AnyNetwork& net);

/// Projects onto the constraint set. With project_lift = false the lift is left
/// as is, which is the penalty-mode convention.
AnyNetwork project_params(const AnyNetwork& net, bool project_lift = true);

/// Σᵢ relu(‖∇ₓ net(xᵢ)‖₂ − 1)². Scalar networks only.
double lipschitz_penalty(const AnyNetwork& net, const std::vector<Vector>& points);
/// Penalty value and its parameter gradient (double backprop).
std::pair<double, AnyNetwork> lipschitz_penalty_grad(const AnyNetwork& net,
                                                     const std::vector<Vector>& points);

/// Random feasible network. `depth` counts gradient-step (or Ẽ) layers.
/// `outputs` > 1 is only meaningful for Gc.
AnyNetwork init_network(const std::string& architecture, std::size_t d, std::size_t h,
                        std::size_t depth, std::uint64_t seed, std::size_t outputs = 1);

double mse(const AnyNetwork& net, const Dataset& data);

struct LossRecord {
  std::size_t iteration = 0;
  double loss = 0.0;
  double penalty = 0.0;
};

struct FitResult {
  AnyNetwork net;
  std::vector<LossRecord> history;  // one row per step, then a final row
};

FitResult fit(const AnyNetwork& net, const Dataset& data, const TrainConfig& config);

std::string history_csv(const std::vector<LossRecord>& history);

}  // namespace lipnet
