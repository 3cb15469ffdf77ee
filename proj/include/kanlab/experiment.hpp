#pragma once

/// @file experiment.hpp
/// @brief End-to-end pipeline: generate data, train, roll out, diagnose, and
/// write the artifact directory.

#include <filesystem>
#include <optional>

#include "kanlab/config.hpp"
#include "kanlab/diagnostics.hpp"
#include "kanlab/dynsys.hpp"
#include "kanlab/io.hpp"
#include "kanlab/trainer.hpp"

namespace kanlab {

Trajectory generate_stage(const ExperimentConfig& cfg);

TrainResult train_stage(const ExperimentConfig& cfg, const Trajectory& data);

/// Closed-loop orbit of data.n states started from the first data state.
Trajectory rollout_stage(const ExperimentConfig& cfg, const KanNetwork& net,
                         const Trajectory& data);

/// True and surrogate Lyapunov spectra, histogram KL divergence, correlation
/// dimensions, spectral peaks and pointwise model error, all computed on long
/// orbits regenerated from the config.
DiagnosticsReport diagnose_stage(const ExperimentConfig& cfg, const KanNetwork& net);

CompareOptions compare_options(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::filesystem::path directory;
  Trajectory data;
  KanNetwork net;
  TrainingReport training;
  Trajectory rollout;
  DiagnosticsReport diagnostics;
};

/// Runs every stage and writes traj.csv, model.json, losses.csv, rollout.csv
/// and diagnostics.json into `out` (default: the configured directory).
/// Errors leave as StageError naming the stage.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& out = std::nullopt);

}  // namespace kanlab
