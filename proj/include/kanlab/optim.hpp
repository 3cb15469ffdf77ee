#pragma once

/// @file optim.hpp
/// @brief Full-batch first-order optimizers over a flat parameter vector.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace kanlab {

/// Evaluates the objective at theta and writes its gradient into grad.
using ObjectiveFn = std::function<double(std::span<const double> theta,
                                         std::span<double> grad)>;

class AdamOptimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  AdamOptimizer(std::size_t n, double learning_rate);

  void step(std::span<double> theta, std::span<const double> grad);

 private:
  double lr_;
  long t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

/// Limited-memory BFGS with a strong Wolfe line search. The learning rate is
/// the initial trial step of each line search (scaled by 1/|g|_1 on the very
/// first iteration, when no curvature information exists).
class LbfgsOptimizer {
 public:
  struct Options {
    double learning_rate = 1.0;
    std::size_t history = 10;
    int max_line_search_evals = 25;
    double c1 = 1e-4;
    double c2 = 0.9;
  };

  LbfgsOptimizer(std::size_t n, Options options);

  /// One iteration: direction, line search, history update. Entries of
  /// `mask` that are zero are held fixed. The line search stops after
  /// `max_evals` evaluations (0 uses the option default). Returns the
  /// objective at the new point.
  double step(const ObjectiveFn& f, std::vector<double>& theta,
              std::span<const char> mask, int max_evals = 0);

  std::size_t evaluations() const { return evaluations_; }

 private:
  std::vector<double> direction(const std::vector<double>& g) const;

  Options opt_;
  std::size_t n_;
  bool have_point_ = false;
  double f_ = 0.0;
  std::vector<double> g_;
  std::deque<std::vector<double>> s_hist_;
  std::deque<std::vector<double>> y_hist_;
  std::deque<double> rho_hist_;
  std::size_t evaluations_ = 0;
};

}  // namespace kanlab
