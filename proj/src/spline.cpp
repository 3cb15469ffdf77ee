#include "kanlab/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kanlab/error.hpp"

namespace kanlab {

namespace {

int grid_size_of(std::span<const double> knots, int degree) {
  const int g = static_cast<int>(knots.size()) - 2 * degree - 1;
  if (degree < 0 || degree > kMaxSplineDegree || g < 1) {
    throw InvalidSpecError("knot vector of size " + std::to_string(knots.size()) +
                           " does not fit degree " + std::to_string(degree));
  }
  return g;
}

// Span i with knots[i] <= x < knots[i+1], restricted to the intervals of the
// base range [knots[k], knots[G+k]]. Outside the range the boundary span is
// used, which yields the polynomial extension.
int find_span(std::span<const double> knots, int degree, int grid, double x) {
  const int lo_span = degree;
  const int hi_span = grid + degree - 1;
  const double h = (knots[grid + degree] - knots[degree]) / grid;
  double guess = std::floor((x - knots[degree]) / h);
  guess = std::clamp(guess, 0.0, static_cast<double>(grid - 1));
  int i = lo_span + static_cast<int>(guess);
  while (i > lo_span && x < knots[i]) --i;
  while (i < hi_span && x >= knots[i + 1]) ++i;
  return i;
}

// Piegl & Tiller basis recursion up to `degree` at span i.
void basis_at_span(std::span<const double> knots, int span, int degree, double x,
                   double* n) {
  n[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double right = knots[span + r + 1] - x;
      const double left = x - knots[span + 1 - j + r];
      const double temp = n[r] / (right + left);
      n[r] = saved + right * temp;
      saved = left * temp;
    }
    n[j] = saved;
  }
}

}  // namespace

void SplineSpec::validate() const {
  if (degree < 0 || degree > kMaxSplineDegree) {
    throw InvalidSpecError("spline degree must be in [0, " +
                           std::to_string(kMaxSplineDegree) + "], got " +
                           std::to_string(degree));
  }
  if (grid_size < 1) {
    throw InvalidSpecError("grid size must be positive, got " +
                           std::to_string(grid_size));
  }
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    throw InvalidSpecError("spline range must be a finite interval with lo < hi");
  }
}

std::vector<double> make_knots(const SplineSpec& spec) {
  spec.validate();
  const double h = spec.spacing();
  std::vector<double> knots(spec.knot_count());
  for (int i = 0; i < spec.knot_count(); ++i) {
    knots[i] = spec.lo + (i - spec.degree) * h;
  }
  return knots;
}

void evaluate_local(std::span<const double> knots, int degree, double x,
                    LocalBasis& out, bool with_slopes) {
  if (!std::isfinite(x)) throw DomainError("spline argument is not finite");
  const int grid = grid_size_of(knots, degree);
  const int span = find_span(knots, degree, grid, x);
  out.first = span - degree;

  if (degree == 0) {
    out.values[0] = 1.0;
    out.slopes[0] = 0.0;
    return;
  }

  double* n = out.values.data();
  basis_at_span(knots, span, degree - 1, x, n);

  if (with_slopes) {
    // B'_{j,k} = k/(t_{j+k}-t_j) B_{j,k-1} - k/(t_{j+k+1}-t_{j+1}) B_{j+1,k-1}
    for (int r = 0; r <= degree; ++r) {
      const int j = out.first + r;
      double d = 0.0;
      if (r >= 1) d += degree * n[r - 1] / (knots[j + degree] - knots[j]);
      if (r < degree) d -= degree * n[r] / (knots[j + degree + 1] - knots[j + 1]);
      out.slopes[r] = d;
    }
  }

  // Final elevation step from degree k-1 to k.
  double saved = 0.0;
  for (int r = 0; r < degree; ++r) {
    const double right = knots[span + r + 1] - x;
    const double left = x - knots[span + 1 - degree + r];
    const double temp = n[r] / (right + left);
    n[r] = saved + right * temp;
    saved = left * temp;
  }
  n[degree] = saved;
}

std::vector<double> basis_eval(std::span<const double> knots, int degree, double x) {
  const int grid = grid_size_of(knots, degree);
  LocalBasis local;
  evaluate_local(knots, degree, x, local, false);
  std::vector<double> out(grid + degree, 0.0);
  for (int r = 0; r <= degree; ++r) out[local.first + r] = local.values[r];
  return out;
}

std::vector<double> basis_derivative(std::span<const double> knots, int degree,
                                     double x) {
  if (degree == 0) {
    throw UnsupportedDegreeError("basis derivative requires degree >= 1");
  }
  const int grid = grid_size_of(knots, degree);
  LocalBasis local;
  evaluate_local(knots, degree, x, local, true);
  std::vector<double> out(grid + degree, 0.0);
  for (int r = 0; r <= degree; ++r) out[local.first + r] = local.slopes[r];
  return out;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_derivative(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

SplineActivation::SplineActivation(const SplineSpec& s, double base, double spline)
    : spec(s),
      knots(make_knots(s)),
      coeffs(s.basis_count(), 0.0),
      w_base(base),
      w_spline(spline) {}

void SplineActivation::validate() const {
  spec.validate();
  if (static_cast<int>(knots.size()) != spec.knot_count()) {
    throw InvalidSpecError("activation has " + std::to_string(knots.size()) +
                           " knots, expected " + std::to_string(spec.knot_count()));
  }
  if (static_cast<int>(coeffs.size()) != spec.basis_count()) {
    throw InvalidSpecError("activation has " + std::to_string(coeffs.size()) +
                           " coefficients, expected " +
                           std::to_string(spec.basis_count()));
  }
  const double h = spec.spacing();
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const double expected = spec.lo + (static_cast<double>(i) - spec.degree) * h;
    if (!std::isfinite(knots[i]) ||
        std::abs(knots[i] - expected) > 1e-12 * std::max(1.0, std::abs(expected))) {
      throw InvalidSpecError("knot " + std::to_string(i) +
                             " is off the uniform grid of the spec");
    }
  }
  for (double c : coeffs) {
    if (!std::isfinite(c)) throw InvalidSpecError("non-finite spline coefficient");
  }
  if (!std::isfinite(w_base) || !std::isfinite(w_spline)) {
    throw InvalidSpecError("non-finite activation weight");
  }
}

void SplineActivation::set_range(double lo, double hi) {
  SplineSpec next = spec;
  next.lo = lo;
  next.hi = hi;
  knots = make_knots(next);
  spec = next;
}

void SplineActivation::zero_out() {
  std::fill(coeffs.begin(), coeffs.end(), 0.0);
  w_base = 0.0;
  w_spline = 0.0;
}

double SplineActivation::operator()(double x) const {
  LocalBasis local;
  evaluate_local(knots, spec.degree, x, local, false);
  double s = 0.0;
  for (int r = 0; r <= spec.degree; ++r) s += coeffs[local.first + r] * local.values[r];
  return w_base * silu(x) + w_spline * s;
}

double activation_eval(const SplineActivation& act, double x) { return act(x); }

ActivationGrad activation_grad(const SplineActivation& act, double x) {
  LocalBasis local;
  evaluate_local(act.knots, act.spec.degree, x, local, true);
  ActivationGrad g;
  g.dcoeffs.assign(act.coeffs.size(), 0.0);
  double s = 0.0;
  double ds = 0.0;
  for (int r = 0; r <= act.spec.degree; ++r) {
    const int i = local.first + r;
    g.dcoeffs[i] = act.w_spline * local.values[r];
    s += act.coeffs[i] * local.values[r];
    ds += act.coeffs[i] * local.slopes[r];
  }
  g.dw_base = silu(x);
  g.dw_spline = s;
  g.dx = act.w_base * silu_derivative(x) + act.w_spline * ds;
  return g;
}

}  // namespace kanlab
