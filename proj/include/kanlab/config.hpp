#pragma once

/// @file config.hpp
/// @brief Experiment configuration: an INI-style file with one section per
/// block. Parsing is strict; unknown sections or keys are errors.
///
///   [system]       name, mu | K x_p y_p x_q y_q N_0 P_0, x0
///   [data]         n, transient, dt, substeps, split, seed
///   [model]        shape, k, G
///   [training]     steps, lr, lambda, lambda_entropy, optimizer,
///                  lbfgs_iterations, lbfgs_evaluations
///   [diagnostics]  bins, radii, lyapunov_steps, flow_time, orbit, settle,
///                  corr_points, spectrum_component, lo, hi, pad
///   [output]       dir (optional section)
///
/// Lists are comma separated. Comment lines start with ';' or '#'.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kanlab/dynsys.hpp"
#include "kanlab/trainer.hpp"

namespace kanlab {

struct SystemBlock {
  std::string name;
  IkedaParams ikeda;
  FoodChainParams food_chain;
  /// Initial condition; empty selects the system default.
  std::vector<double> x0;
};

struct DataBlock {
  std::size_t n = 10000;
  /// Map steps or time units; negative selects the system default.
  double transient = -1.0;
  /// Sampling interval for flows.
  double dt = 0.5;
  int substeps = 20;
  double split = 0.8;
  std::uint64_t seed = 0;
};

struct ModelBlock {
  std::vector<int> shape;
  int k = 3;
  int G = 10;
};

struct TrainingBlock {
  std::size_t steps = 50;
  double lr = 0.1;
  double lambda = 0.0;
  double lambda_entropy = 10.0;
  Optimizer optimizer = Optimizer::adam;
  int lbfgs_iterations = 20;
  int lbfgs_evaluations = 25;
};

struct DiagnosticsBlock {
  std::vector<int> bins{50};
  int radii = 20;
  /// Orbit length for map-type Lyapunov spectra (true map and surrogate).
  std::size_t lyapunov_steps = 100000;
  /// Integration time for the true flow spectrum.
  double flow_time = 5e4;
  /// Points in the long orbits compared by histogram, correlation dimension
  /// and power spectrum.
  std::size_t orbit = 100000;
  /// Surrogate iterates discarded before any statistic is taken.
  std::size_t settle = 1000;
  std::size_t corr_points = 5000;
  int spectrum_component = 0;
  /// Histogram bounds; empty means the padded reference bounding box.
  std::vector<double> lo;
  std::vector<double> hi;
  double pad = 0.05;
};

struct ExperimentConfig {
  SystemBlock system;
  DataBlock data;
  ModelBlock model;
  TrainingBlock training;
  DiagnosticsBlock diagnostics;
  std::filesystem::path output_dir = "kanlab-out";

  /// Checks every block against the invariants of the module it feeds.
  /// Throws ConfigError.
  void validate() const;

  DynamicalSystem make_system() const;
  FlowSampling sampling() const;
  Vec initial_state() const;
  double transient() const;
  TrainingConfig training_config() const;

  /// Normalized text of every field; two configs with equal canonical text
  /// describe the same experiment.
  std::string canonical() const;
  /// FNV-1a of the canonical text.
  std::string hash() const;
};

/// Parses and validates. `origin` names the source in error messages.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

Vec default_initial_state(const std::string& system);
double default_transient(const std::string& system);

/// "1, 2.5,3" -> {1, 2.5, 3}. Throws ConfigError naming `what`.
std::vector<double> parse_real_list(const std::string& text, const std::string& what);
std::vector<int> parse_int_list(const std::string& text, const std::string& what);

}  // namespace kanlab
