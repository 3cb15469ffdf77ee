#pragma once

/// @file diagnostics.hpp
/// @brief Invariants used to compare a surrogate against the true system:
/// Lyapunov spectra, invariant-measure histograms with KL divergence,
/// correlation dimension and Welch power spectra.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kanlab/dynsys.hpp"
#include "kanlab/types.hpp"

namespace kanlab {

enum class ExponentUnits { per_iterate, per_unit_time };

std::string to_string(ExponentUnits units);

struct LyapunovSpectrum {
  /// Sorted descending.
  std::vector<double> exponents;
  ExponentUnits units = ExponentUnits::per_iterate;
  std::size_t steps = 0;

  double sum() const;
};

/// QR re-orthonormalization of the tangent frame after every iterate. The
/// Jacobian is evaluated at each orbit state in turn. `initial_frame`
/// defaults to the identity and must be square with orthonormal columns.
LyapunovSpectrum lyapunov_map(const JacobianFn& jacobian, std::span<const Vec> orbit,
                              const std::optional<Mat>& initial_frame = std::nullopt);

struct FlowLyapunovOptions {
  double total_time = 5e4;
  double dt = 0.025;
  /// Re-orthonormalize every this many RK4 steps.
  int qr_interval = 10;
  double transient = 500.0;
  std::optional<Mat> initial_frame;
};

/// Integrates the state together with its variational equation
/// dPhi/dt = J(x) Phi using RK4, with periodic QR. Exponents per unit time.
LyapunovSpectrum lyapunov_flow(const StateFn& rhs, const JacobianFn& jacobian,
                               const Vec& x0, const FlowLyapunovOptions& options = {});

/// Per-iterate exponents of a map sampled every dt, converted to per unit time.
LyapunovSpectrum per_unit_time(const LyapunovSpectrum& map_spectrum, double dt);

inline constexpr double kHistogramSmoothing = 1e-9;

struct Histogram {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> bins;
  /// Cell masses, first dimension varying slowest.
  std::vector<double> probs;
  double smoothing = kHistogramSmoothing;

  std::size_t cell_count() const { return probs.size(); }
};

/// Box-counting estimate of the invariant measure. Points outside the bounds
/// land in the nearest boundary cell. Masses are (count/n + s) / (1 + s*cells).
Histogram invariant_histogram(std::span<const Vec> states, std::span<const double> lo,
                              std::span<const double> hi, std::span<const int> bins,
                              double smoothing = kHistogramSmoothing);

/// sum p log(p/q) with 0 log 0 = 0. Throws ShapeError for mismatched grids.
double kl_divergence(const Histogram& p, const Histogram& q);

/// Bounding box of the states, padded by `pad` times each span.
std::pair<std::vector<double>, std::vector<double>> padded_bounds(
    std::span<const Vec> states, double pad);

/// Fraction of pairs (i < j) closer than each radius.
std::vector<double> correlation_sums(std::span<const Vec> states,
                                     std::span<const double> radii);

/// Least-squares slope of log C(r) against log r over the radii with nonzero
/// sums. Throws InvalidInputError if fewer than two remain.
double correlation_dimension(std::span<const Vec> states, std::span<const double> radii);

/// `count` log-spaced radii between the 1st and 50th percentile of pairwise
/// distances on an evenly strided subsample of at most `subsample` points.
std::vector<double> default_radii(std::span<const Vec> states, int count = 20,
                                  std::size_t subsample = 2000);

struct PowerSpectrum {
  std::vector<double> frequencies;
  std::vector<double> powers;
  double resolution = 0.0;
};

/// One-sided Welch estimate: mean removed, Hann window, `segments` segments
/// with 50% overlap. Frequencies in cycles per unit of dt.
PowerSpectrum power_spectrum(std::span<const double> series, double dt = 1.0,
                             int segments = 8);

struct SpectralPeak {
  std::size_t bin = 0;
  double frequency = 0.0;
  double power = 0.0;
};

/// Largest local maxima above the zero-frequency bin, strongest first.
std::vector<SpectralPeak> spectral_peaks(const PowerSpectrum& spectrum,
                                         std::size_t count = 5);

struct CompareOptions {
  /// Histogram bins per dimension; one entry applies to every dimension.
  std::vector<int> bins{50};
  /// Histogram bounds; empty means the reference bounding box padded by `pad`.
  std::vector<double> lo;
  std::vector<double> hi;
  double pad = 0.05;
  double smoothing = kHistogramSmoothing;
  int radii_count = 20;
  /// Points entering the correlation sums, strided evenly over each orbit.
  std::size_t corr_points = 5000;
  int spectrum_component = 0;
  int spectrum_segments = 8;
  std::size_t peak_count = 5;
};

/// Everything the comparison of a reference orbit with a surrogate orbit
/// produces. Lyapunov spectra and model error need the systems themselves and
/// are filled in by the caller when available.
struct DiagnosticsReport {
  std::string system;
  std::optional<LyapunovSpectrum> true_lyapunov;
  std::optional<LyapunovSpectrum> model_lyapunov;

  double kl = 0.0;
  std::vector<double> histogram_lo;
  std::vector<double> histogram_hi;
  std::vector<int> histogram_bins;
  double smoothing = kHistogramSmoothing;

  double corr_dim_true = 0.0;
  double corr_dim_model = 0.0;
  std::vector<double> radii;

  int spectrum_component = 0;
  double spectral_resolution = 0.0;
  std::vector<SpectralPeak> true_peaks;
  std::vector<SpectralPeak> model_peaks;

  std::optional<ModelError> model_error;

  std::size_t reference_points = 0;
  std::size_t model_points = 0;
  /// Numeric settings echoed into the serialized report.
  std::vector<std::pair<std::string, double>> settings;
};

/// Evenly strided subsample of at most `count` states.
std::vector<Vec> strided_subsample(std::span<const Vec> states, std::size_t count);

/// KL(reference || model) of invariant histograms, correlation dimensions with
/// radii taken from the reference, and Welch spectra of one component.
/// `dt` is the sampling interval of both orbits.
DiagnosticsReport compare_orbits(std::span<const Vec> reference, std::span<const Vec> model,
                                 double dt, const CompareOptions& options = {});

}  // namespace kanlab
