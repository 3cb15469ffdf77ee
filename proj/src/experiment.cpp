#include "kanlab/experiment.hpp"

#include <algorithm>
#include <functional>
#include <string>

#include "kanlab/error.hpp"

namespace kanlab {

namespace fs = std::filesystem;

namespace {

template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

bool is_flow(const ExperimentConfig& cfg) { return cfg.system.name == "food_chain"; }

}  // namespace

Trajectory generate_stage(const ExperimentConfig& cfg) {
  return generate_trajectory(cfg.make_system(), cfg.initial_state(), cfg.data.n, cfg.transient(),
                             cfg.sampling());
}

TrainResult train_stage(const ExperimentConfig& cfg, const Trajectory& data) {
  const TrainingConfig tc = cfg.training_config();
  KanNetwork net = init_network(tc.shape, tc.spec, tc.seed);
  return train(std::move(net), make_dataset(data), tc);
}

Trajectory rollout_stage(const ExperimentConfig& cfg, const KanNetwork& net,
                         const Trajectory& data) {
  Trajectory out = rollout(net, data.states.front(), cfg.data.n);
  out.kind = data.kind;
  out.dt = data.dt;
  out.component_names = data.component_names;
  return out;
}

CompareOptions compare_options(const ExperimentConfig& cfg) {
  CompareOptions opt;
  opt.bins = cfg.diagnostics.bins;
  opt.lo = cfg.diagnostics.lo;
  opt.hi = cfg.diagnostics.hi;
  opt.pad = cfg.diagnostics.pad;
  opt.radii_count = cfg.diagnostics.radii;
  opt.corr_points = cfg.diagnostics.corr_points;
  opt.spectrum_component = cfg.diagnostics.spectrum_component;
  return opt;
}

DiagnosticsReport diagnose_stage(const ExperimentConfig& cfg, const KanNetwork& net) {
  const DynamicalSystem system = cfg.make_system();
  const FlowSampling sampling = cfg.sampling();
  const auto& d = cfg.diagnostics;
  const bool flow = is_flow(cfg);
  const double dt = flow ? sampling.dt_sample : 1.0;
  const std::size_t length = std::max(d.orbit, d.lyapunov_steps);

  const Trajectory reference =
      generate_trajectory(system, cfg.initial_state(), length, cfg.transient(), sampling);
  Trajectory model = rollout(net, reference.states.front(), d.settle + length);
  model.states.erase(model.states.begin(), model.states.begin() + static_cast<long>(d.settle));

  const std::span<const Vec> ref_orbit(reference.states.data(), d.orbit);
  const std::span<const Vec> model_orbit(model.states.data(), d.orbit);
  DiagnosticsReport report = compare_orbits(ref_orbit, model_orbit, dt, compare_options(cfg));
  report.system = system.name;

  const JacobianFn net_jacobian = [&net](const Vec& x) { return net.jacobian(x); };
  const LyapunovSpectrum model_map = lyapunov_map(
      net_jacobian, std::span<const Vec>(model.states.data(), d.lyapunov_steps));
  if (flow) {
    FlowLyapunovOptions fo;
    fo.total_time = d.flow_time;
    fo.dt = sampling.dt_sample / sampling.substeps;
    fo.transient = cfg.transient();
    report.true_lyapunov = lyapunov_flow(system.function, system.jacobian, cfg.initial_state(), fo);
    report.model_lyapunov = per_unit_time(model_map, dt);
  } else {
    report.true_lyapunov = lyapunov_map(
        system.jacobian, std::span<const Vec>(reference.states.data(), d.lyapunov_steps));
    report.model_lyapunov = model_map;
  }

  const std::size_t error_points = std::min<std::size_t>(d.orbit, 10000);
  report.model_error = model_error(net, sampled_step(system, sampling),
                                   std::span<const Vec>(reference.states.data(), error_points));

  report.settings = {
      {"sampling_dt", dt},
      {"lyapunov_steps", static_cast<double>(d.lyapunov_steps)},
      {"flow_time", flow ? d.flow_time : 0.0},
      {"flow_step", flow ? sampling.dt_sample / sampling.substeps : 0.0},
      {"qr_interval", flow ? 10.0 : 1.0},
      {"orbit", static_cast<double>(d.orbit)},
      {"settle", static_cast<double>(d.settle)},
      {"corr_points", static_cast<double>(d.corr_points)},
      {"radii_count", static_cast<double>(d.radii)},
      {"histogram_pad", d.lo.empty() ? d.pad : 0.0},
      {"model_error_points", static_cast<double>(error_points)},
      {"spectrum_segments", 8.0},
  };
  return report;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::optional<fs::path>& out) {
  in_stage("config", [&] { cfg.validate(); });
  ExperimentResult result;
  result.directory = out ? *out : cfg.output_dir;
  const Provenance prov{kToolVersion, cfg.hash()};

  result.data = in_stage("generate", [&] {
    Trajectory t = generate_stage(cfg);
    write_trajectory_csv(result.directory / "traj.csv", t, prov);
    return t;
  });
  TrainResult trained = in_stage("train", [&] {
    TrainResult r = train_stage(cfg, result.data);
    save_model(r.net, result.directory / "model.json", prov);
    write_losses_csv(result.directory / "losses.csv", r.report, prov);
    return r;
  });
  result.net = std::move(trained.net);
  result.training = std::move(trained.report);
  result.rollout = in_stage("rollout", [&] {
    Trajectory t = rollout_stage(cfg, result.net, result.data);
    write_trajectory_csv(result.directory / "rollout.csv", t, prov);
    return t;
  });
  result.diagnostics = in_stage("diagnose", [&] {
    DiagnosticsReport r = diagnose_stage(cfg, result.net);
    write_diagnostics_json(result.directory / "diagnostics.json", r, prov);
    return r;
  });
  return result;
}

}  // namespace kanlab
