#include "kanlab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kanlab {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Minimizer of the cubic through (x1, f1, g1) and (x2, f2, g2), restricted to
// [lo, hi]; falls back to the midpoint when the cubic has no minimum.
double cubic_minimizer(double x1, double f1, double g1, double x2, double f2,
                       double g2, double lo, double hi) {
  const double d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
  const double d2_sq = d1 * d1 - g1 * g2;
  if (d2_sq >= 0.0) {
    double d2 = std::sqrt(d2_sq);
    if (x1 > x2) d2 = -d2;
    const double t = x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2));
    if (std::isfinite(t)) return std::clamp(t, lo, hi);
  }
  return 0.5 * (lo + hi);
}

struct Probe {
  double t = 0.0;
  double f = 0.0;
  double slope = 0.0;
  std::vector<double> grad;
};

}  // namespace

AdamOptimizer::AdamOptimizer(std::size_t n, double learning_rate)
    : lr_(learning_rate), m_(n, 0.0), v_(n, 0.0) {}

void AdamOptimizer::step(std::span<double> theta, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    theta[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEpsilon);
  }
}

LbfgsOptimizer::LbfgsOptimizer(std::size_t n, Options options)
    : opt_(options), n_(n), g_(n, 0.0) {}

std::vector<double> LbfgsOptimizer::direction(const std::vector<double>& g) const {
  std::vector<double> q = g;
  const std::size_t m = s_hist_.size();
  std::vector<double> alpha(m);
  for (std::size_t i = m; i-- > 0;) {
    alpha[i] = rho_hist_[i] * dot(s_hist_[i], q);
    for (std::size_t j = 0; j < n_; ++j) q[j] -= alpha[i] * y_hist_[i][j];
  }
  if (m > 0) {
    const double gamma = dot(s_hist_.back(), y_hist_.back()) /
                         dot(y_hist_.back(), y_hist_.back());
    for (auto& v : q) v *= gamma;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double beta = rho_hist_[i] * dot(y_hist_[i], q);
    for (std::size_t j = 0; j < n_; ++j) q[j] += s_hist_[i][j] * (alpha[i] - beta);
  }
  for (auto& v : q) v = -v;
  return q;
}

double LbfgsOptimizer::step(const ObjectiveFn& f, std::vector<double>& theta,
                            std::span<const char> mask, int max_evals) {
  const int budget = max_evals > 0 ? std::min(max_evals, opt_.max_line_search_evals)
                                   : opt_.max_line_search_evals;
  auto evaluate = [&](std::span<const double> x, std::vector<double>& g) {
    ++evaluations_;
    const double value = f(x, g);
    for (std::size_t i = 0; i < n_; ++i) {
      if (!mask.empty() && !mask[i]) g[i] = 0.0;
    }
    return value;
  };

  if (!have_point_) {
    f_ = evaluate(theta, g_);
    have_point_ = true;
  }
  if (!std::isfinite(f_)) return f_;

  std::vector<double> d = direction(g_);
  double slope0 = dot(g_, d);
  if (!(slope0 < 0.0)) {
    // Not a descent direction: restart from steepest descent.
    s_hist_.clear();
    y_hist_.clear();
    rho_hist_.clear();
    d = g_;
    for (auto& v : d) v = -v;
    slope0 = dot(g_, d);
    if (!(slope0 < 0.0)) return f_;
  }

  double t = opt_.learning_rate;
  if (s_hist_.empty()) {
    double g1 = 0.0;
    for (double v : g_) g1 += std::abs(v);
    t = std::min(1.0, 1.0 / g1) * opt_.learning_rate;
  }

  std::vector<double> x(n_);
  auto probe_at = [&](double step) {
    Probe p;
    p.t = step;
    p.grad.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) x[i] = theta[i] + step * d[i];
    p.f = evaluate(x, p.grad);
    p.slope = dot(p.grad, d);
    return p;
  };
  auto armijo = [&](const Probe& p) { return p.f <= f_ + opt_.c1 * p.t * slope0; };
  auto curvature = [&](const Probe& p) { return std::abs(p.slope) <= -opt_.c2 * slope0; };

  Probe prev{0.0, f_, slope0, g_};
  Probe accepted;
  bool found = false;
  Probe best = prev;
  int evals = 0;

  // Bracketing phase; `lo` always satisfies sufficient decrease.
  Probe lo;
  Probe hi;
  bool bracketed = false;
  while (evals < budget) {
    Probe cur = probe_at(t);
    ++evals;
    if (std::isfinite(cur.f) && cur.f < best.f) best = cur;
    if (!std::isfinite(cur.f) || !armijo(cur) || (evals > 1 && cur.f >= prev.f)) {
      lo = prev;
      hi = cur;
      bracketed = true;
      break;
    }
    if (curvature(cur)) {
      accepted = cur;
      found = true;
      break;
    }
    if (cur.slope >= 0.0) {
      lo = cur;
      hi = prev;
      bracketed = true;
      break;
    }
    const double t_next =
        cubic_minimizer(prev.t, prev.f, prev.slope, cur.t, cur.f, cur.slope,
                        cur.t + 0.01 * (cur.t - prev.t), 10.0 * cur.t);
    prev = std::move(cur);
    t = t_next;
  }

  // Zoom phase.
  while (!found && bracketed && evals < budget) {
    const double a = std::min(lo.t, hi.t);
    const double b = std::max(lo.t, hi.t);
    const double width = b - a;
    if (width <= 1e-14 * std::max(1.0, b)) break;
    double trial = 0.5 * (a + b);
    if (std::isfinite(hi.f)) {
      trial = cubic_minimizer(lo.t, lo.f, lo.slope, hi.t, hi.f, hi.slope, a, b);
    }
    // Stay away from the bracket ends.
    trial = std::clamp(trial, a + 0.1 * width, b - 0.1 * width);
    Probe cur = probe_at(trial);
    ++evals;
    if (std::isfinite(cur.f) && cur.f < best.f) best = cur;
    if (!std::isfinite(cur.f) || !armijo(cur) || cur.f >= lo.f) {
      hi = std::move(cur);
      continue;
    }
    if (curvature(cur)) {
      accepted = std::move(cur);
      found = true;
      break;
    }
    if (cur.slope * (hi.t - lo.t) >= 0.0) hi = lo;
    lo = std::move(cur);
  }

  if (!found) {
    // Budget exhausted: keep the lowest point seen, if it improved.
    if (best.t == 0.0) return f_;
    accepted = std::move(best);
  }

  std::vector<double> s(n_);
  std::vector<double> y(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    s[i] = accepted.t * d[i];
    y[i] = accepted.grad[i] - g_[i];
    theta[i] += s[i];
  }
  const double ys = dot(y, s);
  if (ys > 1e-10) {
    s_hist_.push_back(std::move(s));
    y_hist_.push_back(std::move(y));
    rho_hist_.push_back(1.0 / ys);
    if (s_hist_.size() > opt_.history) {
      s_hist_.pop_front();
      y_hist_.pop_front();
      rho_hist_.pop_front();
    }
  }
  f_ = accepted.f;
  g_ = std::move(accepted.grad);
  return f_;
}

}  // namespace kanlab
