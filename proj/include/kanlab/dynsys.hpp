#pragma once

/// @file dynsys.hpp
/// @brief Ground-truth systems, RK4 integration, trajectories and closed-loop
/// surrogate rollout.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kanlab/kan_net.hpp"
#include "kanlab/types.hpp"

namespace kanlab {

using StateFn = std::function<Vec(const Vec&)>;
using JacobianFn = std::function<Mat(const Vec&)>;

struct IkedaParams {
  double mu = 0.9;
};

/// McCann-Yodzis three-species food chain.
struct FoodChainParams {
  double K = 0.98;
  double x_p = 0.4;
  double y_p = 2.009;
  double x_q = 0.08;
  double y_q = 2.876;
  double N_0 = 0.16129;
  double P_0 = 0.5;
};

/// x' = 1 + mu (x cos t - y sin t), y' = mu (x sin t + y cos t),
/// t = 0.4 - 6 / (1 + x^2 + y^2).
Vec ikeda_step(const Vec& s, const IkedaParams& p);
Mat ikeda_jacobian(const Vec& s, const IkedaParams& p);

/// Vector field at (N, P, Q).
Vec food_chain_rhs(const Vec& s, const FoodChainParams& p);
Mat food_chain_jacobian(const Vec& s, const FoodChainParams& p);

/// Classical fourth-order Runge-Kutta step. Throws IntegrationError on
/// non-finite output and InvalidInputError unless dt > 0.
Vec rk4_step(const StateFn& rhs, const Vec& s, double dt);

enum class SystemKind { map, flow };

/// A ground-truth system: the map itself (kind map) or the vector field
/// (kind flow), together with its analytic Jacobian.
struct DynamicalSystem {
  std::string name;
  SystemKind kind = SystemKind::map;
  std::vector<std::string> component_names;
  StateFn function;
  JacobianFn jacobian;

  int dim() const { return static_cast<int>(component_names.size()); }
};

DynamicalSystem make_ikeda(const IkedaParams& p = {});
DynamicalSystem make_food_chain(const FoodChainParams& p = {});

enum class TrajectoryKind { map_iterates, flow_samples };

struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::map_iterates;
  /// Sampling interval; only meaningful for flow samples.
  double dt = 0.0;
  std::vector<std::string> component_names;
  std::vector<Vec> states;

  std::size_t size() const { return states.size(); }
  int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
  /// One component as a scalar series.
  std::vector<double> component(int index) const;
};

struct FlowSampling {
  double dt_sample = 0.5;
  /// Internal RK4 steps per sample; at least 10.
  int substeps = 20;
};

/// Advances a flow by `duration` in steps of at most `step`.
Vec integrate_flow(const DynamicalSystem& flow, const Vec& s, double duration,
                   double step);

/// Discards a transient (map steps, or time units for flows) and keeps
/// n_points states. Throws DivergenceError on escape to non-finite states.
Trajectory generate_trajectory(const DynamicalSystem& system, const Vec& x0,
                               std::size_t n_points, double transient,
                               const FlowSampling& sampling = {});

/// One-step truth: the map itself, or the flow over one sampling interval.
StateFn sampled_step(const DynamicalSystem& system, const FlowSampling& sampling = {});

Dataset make_dataset(const Trajectory& trajectory);

inline constexpr double kDefaultDivergenceBound = 1e3;

/// Iterates the network on its own output: states x0, G(x0), ..., n in total.
/// Throws RolloutDivergedError once the state norm exceeds `bound` or turns
/// non-finite.
Trajectory rollout(const KanNetwork& net, const Vec& x0, std::size_t n,
                   double bound = kDefaultDivergenceBound);

struct ModelError {
  double sup = 0.0;
  double mean = 0.0;
};

/// Euclidean pointwise error |model(x) - truth(x)| over the samples.
ModelError model_error(const StateFn& model, const StateFn& truth,
                       std::span<const Vec> samples);
ModelError model_error(const KanNetwork& net, const StateFn& truth,
                       std::span<const Vec> samples);

}  // namespace kanlab
