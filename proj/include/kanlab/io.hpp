#pragma once

/// @file io.hpp
/// @brief Artifact persistence: trajectory and loss CSV files, the JSON model
/// file and the JSON diagnostics report.
///
/// CSV numbers are written with 17 significant digits so every double
/// survives a write/read cycle unchanged. Each artifact carries a provenance
/// line (tool version and config hash).

#include <filesystem>
#include <string>

#include "kanlab/diagnostics.hpp"
#include "kanlab/dynsys.hpp"
#include "kanlab/kan_net.hpp"
#include "kanlab/trainer.hpp"

namespace kanlab {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kModelFormatVersion = 1;

struct Provenance {
  std::string tool_version = kToolVersion;
  std::string config_hash = "none";
};

/// "%.17g" formatting.
std::string format_double(double value);

/// 64-bit FNV-1a of the text, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& text);

/// Header of component names, then one state per line. Flow trajectories
/// carry a "# dt=<value>" comment line.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          const Provenance& provenance = {});
Trajectory read_trajectory_csv(const std::filesystem::path& path);

/// step,train_loss,test_loss with 1-based steps.
void write_losses_csv(const std::filesystem::path& path, const TrainingReport& report,
                      const Provenance& provenance = {});

void save_model(const KanNetwork& net, const std::filesystem::path& path,
                const Provenance& provenance = {});

/// Throws VersionMismatchError for an unknown format version and
/// MalformedFileError for anything else that does not parse into a valid
/// network.
KanNetwork load_model(const std::filesystem::path& path);

std::string model_to_json(const KanNetwork& net, const Provenance& provenance = {});
KanNetwork model_from_json(const std::string& text);

/// Flat JSON document: exponents, kl, correlation dimensions, peak tables,
/// model error and every echoed setting as top-level fields.
std::string diagnostics_to_json(const DiagnosticsReport& report,
                                const Provenance& provenance = {});
void write_diagnostics_json(const std::filesystem::path& path,
                            const DiagnosticsReport& report,
                            const Provenance& provenance = {});

/// Writes text atomically enough for our purposes: to a sibling temp file,
/// then renamed into place.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace kanlab
