#pragma once

// Shared oracles and fixtures for the unit suites.

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kanlab/kan_net.hpp"
#include "kanlab/spline.hpp"
#include "kanlab/trainer.hpp"

namespace testing {

using kanlab::Mat;
using kanlab::Vec;

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Textbook Cox-de Boor recursion on half-open intervals, no span search and no
// shared code with the library.
inline double cox_de_boor(const std::vector<double>& t, int i, int k, double x) {
  if (k == 0) return (t[i] <= x && x < t[i + 1]) ? 1.0 : 0.0;
  double left = 0.0;
  double right = 0.0;
  const double d1 = t[i + k] - t[i];
  const double d2 = t[i + k + 1] - t[i + 1];
  if (d1 > 0.0) left = (x - t[i]) / d1 * cox_de_boor(t, i, k - 1, x);
  if (d2 > 0.0) right = (t[i + k + 1] - x) / d2 * cox_de_boor(t, i + 1, k - 1, x);
  return left + right;
}

inline std::vector<double> uniform_knots(double a, double b, int G, int k) {
  const double h = (b - a) / G;
  std::vector<double> t(G + 2 * k + 1);
  for (int i = 0; i < static_cast<int>(t.size()); ++i) t[i] = a + (i - k) * h;
  return t;
}

inline double central_difference(const std::function<double(double)>& f, double x,
                                  double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  const Vec y0 = f(x);
  Mat J(y0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec xp = x;
    Vec xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

// Largest entrywise error relative to the largest entry of the reference.
inline double matrix_rel_err(const Mat& a, const Mat& ref) {
  return (a - ref).cwiseAbs().maxCoeff() / std::max(ref.cwiseAbs().maxCoeff(), 1e-12);
}

// Least-squares fit of the spline part of `act` to f on its grid range.
inline void fit_spline(kanlab::SplineActivation& act, const std::function<double(double)>& f) {
  const int m = 200;
  const int nb = act.spec.basis_count();
  Mat A(m, nb);
  Vec y(m);
  for (int r = 0; r < m; ++r) {
    const double x = act.spec.lo + (act.spec.hi - act.spec.lo) * r / (m - 1);
    const auto b = kanlab::basis_eval(act.knots, act.spec.degree, x);
    for (int c = 0; c < nb; ++c) A(r, c) = b[c];
    y[r] = f(x);
  }
  const Vec c = A.colPivHouseholderQr().solve(y);
  act.w_base = 0.0;
  act.w_spline = 1.0;
  act.coeffs.assign(c.data(), c.data() + c.size());
}

// Every layer passes input p straight to output p (square layers only).
inline kanlab::KanNetwork identity_network(const std::vector<int>& shape,
                                           const kanlab::SplineSpec& spec) {
  std::vector<kanlab::KanLayer> layers;
  for (std::size_t l = 0; l + 1 < shape.size(); ++l) {
    kanlab::KanLayer layer(shape[l], shape[l + 1], spec);
    for (int q = 0; q < shape[l + 1]; ++q) {
      for (int p = 0; p < shape[l]; ++p) {
        if (p == q) fit_spline(layer.edge(q, p), [](double x) { return x; });
      }
    }
    layers.push_back(std::move(layer));
  }
  return kanlab::KanNetwork(std::move(layers));
}

// Seeded random network with nonzero base weights, for derivative checks.
inline kanlab::KanNetwork random_network(const std::vector<int>& shape,
                                         const kanlab::SplineSpec& spec, unsigned seed) {
  kanlab::KanNetwork net = kanlab::init_network(shape, spec, seed);
  std::mt19937 rng(seed + 17);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (auto& layer : net.layers()) {
    for (auto& e : layer.edges()) {
      for (auto& c : e.coeffs) c = u(rng);
      e.w_base = u(rng);
      e.w_spline = 1.0 + 0.5 * u(rng);
    }
  }
  return net;
}

inline Vec random_vec(std::mt19937& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("kanlab-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
