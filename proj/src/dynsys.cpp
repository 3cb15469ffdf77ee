#include "kanlab/dynsys.hpp"

#include <cmath>
#include <string>

#include "kanlab/error.hpp"

namespace kanlab {

namespace {

void require_dim(const Vec& s, int dim, const char* what) {
  if (s.size() != dim) {
    throw ShapeError(std::string(what) + " expects a " + std::to_string(dim) +
                     "-vector, got " + std::to_string(s.size()));
  }
}

bool all_finite(const Vec& s) { return s.allFinite(); }

}  // namespace

Vec ikeda_step(const Vec& s, const IkedaParams& p) {
  require_dim(s, 2, "ikeda_step");
  const double x = s[0];
  const double y = s[1];
  const double phase = 0.4 - 6.0 / (1.0 + x * x + y * y);
  const double c = std::cos(phase);
  const double sn = std::sin(phase);
  Vec out(2);
  out << 1.0 + p.mu * (x * c - y * sn), p.mu * (x * sn + y * c);
  return out;
}

Mat ikeda_jacobian(const Vec& s, const IkedaParams& p) {
  require_dim(s, 2, "ikeda_jacobian");
  const double x = s[0];
  const double y = s[1];
  const double r = 1.0 + x * x + y * y;
  const double phase = 0.4 - 6.0 / r;
  const double dphase_dx = 12.0 * x / (r * r);
  const double dphase_dy = 12.0 * y / (r * r);
  const double c = std::cos(phase);
  const double sn = std::sin(phase);
  const double u = x * c - y * sn;  // d/dphase of (x sn + y c)
  const double v = x * sn + y * c;  // -d/dphase of (x c - y sn)
  Mat j(2, 2);
  j << p.mu * (c - v * dphase_dx), p.mu * (-sn - v * dphase_dy),
      p.mu * (sn + u * dphase_dx), p.mu * (c + u * dphase_dy);
  return j;
}

Vec food_chain_rhs(const Vec& s, const FoodChainParams& p) {
  require_dim(s, 3, "food_chain_rhs");
  const double n = s[0];
  const double pr = s[1];
  const double q = s[2];
  const double graze = n / (n + p.N_0);
  const double prey = pr / (pr + p.P_0);
  Vec out(3);
  out << n * (1.0 - n / p.K) - p.x_p * p.y_p * graze * pr,
      p.x_p * pr * (p.y_p * graze - 1.0) - p.x_q * p.y_q * prey * q,
      p.x_q * q * (p.y_q * prey - 1.0);
  return out;
}

Mat food_chain_jacobian(const Vec& s, const FoodChainParams& p) {
  require_dim(s, 3, "food_chain_jacobian");
  const double n = s[0];
  const double pr = s[1];
  const double q = s[2];
  const double graze = n / (n + p.N_0);
  const double dgraze = p.N_0 / ((n + p.N_0) * (n + p.N_0));
  const double prey = pr / (pr + p.P_0);
  const double dprey = p.P_0 / ((pr + p.P_0) * (pr + p.P_0));
  Mat j(3, 3);
  j(0, 0) = 1.0 - 2.0 * n / p.K - p.x_p * p.y_p * pr * dgraze;
  j(0, 1) = -p.x_p * p.y_p * graze;
  j(0, 2) = 0.0;
  j(1, 0) = p.x_p * p.y_p * pr * dgraze;
  j(1, 1) = p.x_p * p.y_p * graze - p.x_p - p.x_q * p.y_q * q * dprey;
  j(1, 2) = -p.x_q * p.y_q * prey;
  j(2, 0) = 0.0;
  j(2, 1) = p.x_q * p.y_q * q * dprey;
  j(2, 2) = p.x_q * p.y_q * prey - p.x_q;
  return j;
}

Vec rk4_step(const StateFn& rhs, const Vec& s, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw InvalidInputError("rk4 step size must be positive and finite");
  }
  const Vec k1 = rhs(s);
  const Vec k2 = rhs(s + 0.5 * dt * k1);
  const Vec k3 = rhs(s + 0.5 * dt * k2);
  const Vec k4 = rhs(s + dt * k3);
  Vec out = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!all_finite(out)) throw IntegrationError("rk4 produced a non-finite state");
  return out;
}

DynamicalSystem make_ikeda(const IkedaParams& p) {
  DynamicalSystem sys;
  sys.name = "ikeda";
  sys.kind = SystemKind::map;
  sys.component_names = {"x", "y"};
  sys.function = [p](const Vec& s) { return ikeda_step(s, p); };
  sys.jacobian = [p](const Vec& s) { return ikeda_jacobian(s, p); };
  return sys;
}

DynamicalSystem make_food_chain(const FoodChainParams& p) {
  DynamicalSystem sys;
  sys.name = "food_chain";
  sys.kind = SystemKind::flow;
  sys.component_names = {"N", "P", "Q"};
  sys.function = [p](const Vec& s) { return food_chain_rhs(s, p); };
  sys.jacobian = [p](const Vec& s) { return food_chain_jacobian(s, p); };
  return sys;
}

std::vector<double> Trajectory::component(int index) const {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s[index]);
  return out;
}

Vec integrate_flow(const DynamicalSystem& flow, const Vec& s, double duration,
                   double step) {
  if (duration <= 0.0) return s;
  const long n = static_cast<long>(std::ceil(duration / step - 1e-9));
  const double h = duration / static_cast<double>(n);
  Vec x = s;
  for (long i = 0; i < n; ++i) x = rk4_step(flow.function, x, h);
  return x;
}

Trajectory generate_trajectory(const DynamicalSystem& system, const Vec& x0,
                               std::size_t n_points, double transient,
                               const FlowSampling& sampling) {
  require_dim(x0, system.dim(), "generate_trajectory");
  if (n_points == 0) throw InvalidInputError("trajectory needs at least one point");
  if (!(transient >= 0.0)) throw InvalidInputError("transient must be nonnegative");

  Trajectory traj;
  traj.component_names = system.component_names;
  traj.states.reserve(n_points);

  if (system.kind == SystemKind::map) {
    traj.kind = TrajectoryKind::map_iterates;
    Vec x = x0;
    const long skip = static_cast<long>(std::llround(transient));
    for (long i = 0; i < skip; ++i) {
      x = system.function(x);
      if (!all_finite(x)) {
        throw DivergenceError("map orbit left the finite range during the transient");
      }
    }
    traj.states.push_back(x);
    while (traj.states.size() < n_points) {
      x = system.function(x);
      if (!all_finite(x)) {
        throw DivergenceError("map orbit became non-finite at point " +
                              std::to_string(traj.states.size()));
      }
      traj.states.push_back(x);
    }
    return traj;
  }

  if (!(sampling.dt_sample > 0.0)) throw InvalidInputError("sampling interval must be positive");
  if (sampling.substeps < 10) {
    throw InvalidInputError("flow integration needs at least 10 internal steps per sample");
  }
  traj.kind = TrajectoryKind::flow_samples;
  traj.dt = sampling.dt_sample;
  const double h = sampling.dt_sample / sampling.substeps;
  Vec x;
  try {
    x = integrate_flow(system, x0, transient, h);
    traj.states.push_back(x);
    while (traj.states.size() < n_points) {
      for (int i = 0; i < sampling.substeps; ++i) x = rk4_step(system.function, x, h);
      traj.states.push_back(x);
    }
  } catch (const IntegrationError& e) {
    throw DivergenceError(std::string("flow trajectory diverged: ") + e.what());
  }
  return traj;
}

StateFn sampled_step(const DynamicalSystem& system, const FlowSampling& sampling) {
  if (system.kind == SystemKind::map) return system.function;
  const double h = sampling.dt_sample / sampling.substeps;
  const int n = sampling.substeps;
  StateFn rhs = system.function;
  return [rhs, h, n](const Vec& s) {
    Vec x = s;
    for (int i = 0; i < n; ++i) x = rk4_step(rhs, x, h);
    return x;
  };
}

Dataset make_dataset(const Trajectory& trajectory) {
  Dataset data;
  if (trajectory.size() < 2) return data;
  data.inputs.assign(trajectory.states.begin(), trajectory.states.end() - 1);
  data.targets.assign(trajectory.states.begin() + 1, trajectory.states.end());
  return data;
}

Trajectory rollout(const KanNetwork& net, const Vec& x0, std::size_t n, double bound) {
  if (net.input_dim() != net.output_dim() || x0.size() != net.input_dim()) {
    throw ShapeError("rollout needs a square network matching the initial state");
  }
  Trajectory traj;
  traj.kind = TrajectoryKind::map_iterates;
  traj.states.reserve(n);
  if (n == 0) return traj;
  Vec x = x0;
  traj.states.push_back(x);
  std::vector<LayerCache> caches;
  for (std::size_t i = 1; i < n; ++i) {
    x = net.forward(x, caches);
    if (!all_finite(x) || x.norm() > bound) {
      throw RolloutDivergedError("surrogate orbit left the bound " + std::to_string(bound),
                                 static_cast<long>(i));
    }
    traj.states.push_back(x);
  }
  return traj;
}

ModelError model_error(const StateFn& model, const StateFn& truth,
                       std::span<const Vec> samples) {
  ModelError err;
  if (samples.empty()) return err;
  double total = 0.0;
  for (const auto& x : samples) {
    const double e = (model(x) - truth(x)).norm();
    err.sup = std::max(err.sup, e);
    total += e;
  }
  err.mean = total / static_cast<double>(samples.size());
  return err;
}

ModelError model_error(const KanNetwork& net, const StateFn& truth,
                       std::span<const Vec> samples) {
  return model_error([&net](const Vec& x) { return net.forward(x); }, truth, samples);
}

}  // namespace kanlab
