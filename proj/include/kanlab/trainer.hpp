#pragma once

/// @file trainer.hpp
/// @brief Initialization, losses, magnitude regularizers, full-batch training
/// and pruning.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kanlab/kan_net.hpp"
#include "kanlab/types.hpp"

namespace kanlab {

enum class Optimizer { adam, gradient_descent, lbfgs };

std::string to_string(Optimizer opt);
Optimizer parse_optimizer(const std::string& name);

struct TrainingConfig {
  std::size_t steps = 50;
  double learning_rate = 0.1;
  /// Overall regularization strength; zero disables the regularizer.
  double lambda = 0.0;
  /// Weight of the entropy term relative to the L1 term.
  double lambda_entropy = 10.0;
  std::uint64_t seed = 0;
  double split_fraction = 0.8;
  Optimizer optimizer = Optimizer::adam;
  /// Per-step L-BFGS budget: at most this many iterations and objective
  /// evaluations.
  int lbfgs_iterations = 20;
  int lbfgs_evaluations = 25;
  SplineSpec spec{3, 10, -1.0, 1.0};
  std::vector<int> shape{2, 4, 2};

  void validate() const;
};

struct TrainingReport {
  /// Loss after each optimizer step.
  std::vector<double> train_loss;
  std::vector<double> test_loss;
  /// Final parameter set in canonical order.
  std::vector<double> parameters;
};

void validate_shape(std::span<const int> shape);

/// Coefficients ~ N(0, 0.1^2) from a seeded mt19937_64; w_base = w_spline = 1.
KanNetwork init_network(std::span<const int> shape, const SplineSpec& spec,
                        std::uint64_t seed);

/// Places each layer-input grid on the observed range of that input, padded
/// by `pad` times the span on both sides. Hidden ranges come from pushing the
/// inputs through the preceding (already adjusted) layers.
void fit_grid_ranges(KanNetwork& net, std::span<const Vec> inputs, double pad = 0.1);

double mse_loss(const KanNetwork& net, const Dataset& data);

struct Regularization {
  double l1 = 0.0;
  double entropy = 0.0;
  /// Mean |phi_e| over the batch, per edge in canonical order.
  std::vector<double> magnitudes;
};

Regularization regularization(const KanNetwork& net, const Dataset& batch);

/// mse + lambda * (l1 + lambda_entropy * entropy) and its gradient.
LossGradient objective(const KanNetwork& net, const Dataset& batch, double lambda,
                       double lambda_entropy);

/// Temporal split: the first floor(fraction * size) pairs train.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction);

struct TrainResult {
  KanNetwork net;
  TrainingReport report;
};

/// Sets grid ranges from the training partition, then runs `config.steps`
/// full-batch optimizer steps. Throws TrainingDivergedError on a non-finite
/// loss or parameter, carrying the 1-based step (as in losses.csv).
TrainResult train(KanNetwork net, const Dataset& data, const TrainingConfig& config);

/// Edges whose mean magnitude on `batch` is below `threshold`.
std::vector<bool> edges_below(const KanNetwork& net, const Dataset& batch,
                              double threshold);

/// Zeroes and freezes every edge with mean |phi_e| < threshold.
KanNetwork prune(KanNetwork net, const Dataset& batch, double threshold);

}  // namespace kanlab
