#pragma once

/// @file spline.hpp
/// @brief Uniform B-spline bases and the learnable edge activation built on them.
///
/// Knots are uniform on [lo, hi] with `degree` extra knots past each end, so a
/// spline of degree k on G intervals has G + 2k + 1 knots and G + k basis
/// functions. Points outside [lo, hi] are evaluated with the polynomial piece
/// of the nearest boundary interval (no clamping), which keeps every basis
/// function and its derivative smooth on the whole real line.

#include <array>
#include <span>
#include <vector>

namespace kanlab {

inline constexpr int kMaxSplineDegree = 7;

struct SplineSpec {
  int degree = 3;
  int grid_size = 10;
  double lo = -1.0;
  double hi = 1.0;

  /// Throws InvalidSpecError unless 0 <= degree <= kMaxSplineDegree,
  /// grid_size >= 1 and lo < hi (both finite).
  void validate() const;

  double spacing() const { return (hi - lo) / grid_size; }
  int basis_count() const { return grid_size + degree; }
  int knot_count() const { return grid_size + 2 * degree + 1; }

  friend bool operator==(const SplineSpec&, const SplineSpec&) = default;
};

std::vector<double> make_knots(const SplineSpec& spec);

/// The k+1 basis functions that can be nonzero at x, starting at index `first`.
struct LocalBasis {
  int first = 0;
  std::array<double, kMaxSplineDegree + 1> values{};
  std::array<double, kMaxSplineDegree + 1> slopes{};
};

/// Fills `out` with the local basis at x. Slopes are only computed when
/// `with_slopes` is set (and are zero for degree 0). `knots` must hold
/// G + 2k + 1 increasing knots; x must be finite.
void evaluate_local(std::span<const double> knots, int degree, double x,
                    LocalBasis& out, bool with_slopes);

/// All G + k basis values at x (Cox-de Boor).
std::vector<double> basis_eval(std::span<const double> knots, int degree, double x);

/// All G + k basis derivatives at x. Throws UnsupportedDegreeError for k = 0.
std::vector<double> basis_derivative(std::span<const double> knots, int degree,
                                     double x);

double silu(double x);
double silu_derivative(double x);

/// One learnable edge function
///   y = w_base * silu(x) + w_spline * sum_i c_i B_i(x).
struct SplineActivation {
  SplineSpec spec;
  std::vector<double> knots;
  std::vector<double> coeffs;
  double w_base = 0.0;
  double w_spline = 1.0;
  /// Pruned edges are held at zero and excluded from training.
  bool frozen = false;

  SplineActivation() = default;
  /// Zero spline with the given weights.
  explicit SplineActivation(const SplineSpec& spec, double w_base = 0.0,
                            double w_spline = 1.0);

  int parameter_count() const { return spec.basis_count() + 2; }

  /// Checks the knot grid against the spec, the coefficient count and that
  /// every parameter is finite.
  void validate() const;

  /// Moves the grid to a new range, keeping coefficients.
  void set_range(double lo, double hi);

  void zero_out();

  double operator()(double x) const;
};

double activation_eval(const SplineActivation& act, double x);

struct ActivationGrad {
  double dx = 0.0;
  std::vector<double> dcoeffs;
  double dw_base = 0.0;
  double dw_spline = 0.0;
};

ActivationGrad activation_grad(const SplineActivation& act, double x);

}  // namespace kanlab
