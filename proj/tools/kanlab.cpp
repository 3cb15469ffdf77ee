// kanlab command-line front end. Each subcommand runs one pipeline stage and
// writes one artifact; `run` chains them from a config file.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kanlab/config.hpp"
#include "kanlab/diagnostics.hpp"
#include "kanlab/error.hpp"
#include "kanlab/experiment.hpp"
#include "kanlab/io.hpp"

using namespace kanlab;

namespace {

struct SystemArgs {
  std::string name;
  double mu = IkedaParams{}.mu;
  double K = FoodChainParams{}.K;
  std::vector<double> x0;
  std::optional<double> transient;
};

void add_system_options(CLI::App* cmd, SystemArgs& args, bool required) {
  auto* opt = cmd->add_option("--system", args.name, "ikeda or food_chain")
                  ->check(CLI::IsMember({"ikeda", "food_chain"}));
  if (required) opt->required();
  cmd->add_option("--mu", args.mu, "Ikeda parameter")->capture_default_str();
  cmd->add_option("--K", args.K, "food-chain carrying capacity")->capture_default_str();
  cmd->add_option("--x0", args.x0, "initial state")->delimiter(',');
  cmd->add_option("--transient", args.transient,
                  "discarded map steps or time units (default 1000 / 500)");
}

DynamicalSystem build_system(const SystemArgs& args) {
  if (args.name == "ikeda") return make_ikeda(IkedaParams{args.mu});
  FoodChainParams p;
  p.K = args.K;
  return make_food_chain(p);
}

Vec initial_state(const SystemArgs& args) {
  if (args.x0.empty()) return default_initial_state(args.name);
  return Eigen::Map<const Vec>(args.x0.data(), static_cast<Eigen::Index>(args.x0.size()));
}

double transient(const SystemArgs& args) {
  return args.transient ? *args.transient : default_transient(args.name);
}

// Artifacts written by single subcommands carry a hash of the full option set.
Provenance provenance_of(const CLI::App* cmd) {
  return {kToolVersion, fnv1a_hex(cmd->get_name() + "\n" + cmd->config_to_str(true, false))};
}

Vec start_state(const std::string& from, const std::vector<double>& x0, Trajectory* source) {
  if (!from.empty()) {
    *source = read_trajectory_csv(from);
    if (source->states.empty()) throw InvalidInputError(from + " holds no states");
    return source->states.front();
  }
  if (x0.empty()) throw InvalidInputError("either --from or --x0 is required");
  return Eigen::Map<const Vec>(x0.data(), static_cast<Eigen::Index>(x0.size()));
}

void print_spectrum(const std::string& label, const LyapunovSpectrum& s) {
  std::printf("%s (%s, %zu steps)\n", label.c_str(), to_string(s.units).c_str(), s.steps);
  for (std::size_t i = 0; i < s.exponents.size(); ++i) {
    std::printf("lambda_%zu = %s\n", i + 1, format_double(s.exponents[i]).c_str());
  }
  std::printf("sum = %s\n", format_double(s.sum()).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAN surrogate discovery and dynamical-invariant diagnostics"};
  app.set_version_flag("--version", std::string("kanlab ") + kToolVersion);
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "simulate a ground-truth trajectory");
  SystemArgs gen_sys;
  std::size_t gen_n = 10000;
  FlowSampling gen_sampling;
  std::string gen_out;
  add_system_options(gen, gen_sys, true);
  gen->add_option("--n", gen_n, "points kept after the transient")->capture_default_str();
  gen->add_option("--dt", gen_sampling.dt_sample, "flow sampling interval")->capture_default_str();
  gen->add_option("--substeps", gen_sampling.substeps, "RK4 steps per sample")
      ->capture_default_str();
  gen->add_option("--out", gen_out, "trajectory CSV")->required();

  // train
  auto* trn = app.add_subcommand("train", "fit a KAN to one-step pairs of a trajectory");
  std::string trn_data;
  std::string trn_out;
  std::string trn_losses;
  TrainingConfig tc;
  std::string trn_optimizer = "adam";
  trn->add_option("--data", trn_data, "trajectory CSV")->required();
  trn->add_option("--shape", tc.shape, "layer widths")->delimiter(',')->capture_default_str();
  trn->add_option("--degree", tc.spec.degree, "spline degree k")->capture_default_str();
  trn->add_option("--grid", tc.spec.grid_size, "grid size G")->capture_default_str();
  trn->add_option("--steps", tc.steps, "optimizer steps")->capture_default_str();
  trn->add_option("--lr", tc.learning_rate, "learning rate")->capture_default_str();
  trn->add_option("--lambda", tc.lambda, "regularization strength")->capture_default_str();
  trn->add_option("--lambda-entropy", tc.lambda_entropy, "entropy weight")->capture_default_str();
  trn->add_option("--seed", tc.seed, "initialization seed")->capture_default_str();
  trn->add_option("--split", tc.split_fraction, "training fraction")->capture_default_str();
  trn->add_option("--optimizer", trn_optimizer, "adam, gradient-descent or lbfgs")
      ->capture_default_str();
  trn->add_option("--lbfgs-iterations", tc.lbfgs_iterations)->capture_default_str();
  trn->add_option("--lbfgs-evaluations", tc.lbfgs_evaluations)->capture_default_str();
  trn->add_option("--out", trn_out, "model JSON")->required();
  trn->add_option("--losses", trn_losses, "also write the loss curves to this CSV");

  // rollout
  auto* rol = app.add_subcommand("rollout", "iterate a trained model on its own output");
  std::string rol_model;
  std::string rol_from;
  std::vector<double> rol_x0;
  std::size_t rol_n = 10000;
  double rol_bound = kDefaultDivergenceBound;
  std::string rol_out;
  rol->add_option("--model", rol_model, "model JSON")->required();
  rol->add_option("--from", rol_from, "start from the first state of this trajectory CSV");
  rol->add_option("--x0", rol_x0, "initial state")->delimiter(',');
  rol->add_option("--n", rol_n, "states including the initial one")->capture_default_str();
  rol->add_option("--bound", rol_bound, "divergence bound on the state norm")
      ->capture_default_str();
  rol->add_option("--out", rol_out, "rollout CSV")->required();

  // lyapunov
  auto* lya = app.add_subcommand("lyapunov", "Lyapunov spectrum of a system or a model");
  SystemArgs lya_sys;
  std::string lya_model;
  std::string lya_from;
  std::size_t lya_steps = 100000;
  double lya_time = 5e4;
  double lya_dt = 0.025;
  double lya_sample_dt = 0.0;
  add_system_options(lya, lya_sys, false);
  lya->add_option("--model", lya_model, "model JSON instead of a ground-truth system");
  lya->add_option("--from", lya_from, "model start: first state of this trajectory CSV");
  lya->add_option("--steps", lya_steps, "map iterates")->capture_default_str();
  lya->add_option("--time", lya_time, "flow integration time")->capture_default_str();
  lya->add_option("--dt", lya_dt, "flow integration step")->capture_default_str();
  lya->add_option("--sample-dt", lya_sample_dt,
                  "model sampling interval; exponents are divided by it when set");

  // diagnose
  auto* dia = app.add_subcommand("diagnose", "compare a trained model with its system");
  std::string dia_config;
  std::string dia_model;
  std::string dia_out = "diagnostics.json";
  dia->add_option("--config", dia_config, "experiment config")->required();
  dia->add_option("--model", dia_model, "model JSON")->required();
  dia->add_option("--out", dia_out, "diagnostics JSON")->capture_default_str();

  // compare
  auto* cmp = app.add_subcommand("compare", "compare two trajectories by invariant statistics");
  std::string cmp_ref;
  std::string cmp_test;
  std::string cmp_out = "diagnostics.json";
  CompareOptions copt;
  cmp->add_option("--ref", cmp_ref, "reference trajectory CSV")->required();
  cmp->add_option("--test", cmp_test, "trajectory CSV to compare")->required();
  cmp->add_option("--bins", copt.bins, "histogram bins per dimension")->delimiter(',');
  cmp->add_option("--lo", copt.lo, "histogram lower bounds")->delimiter(',');
  cmp->add_option("--hi", copt.hi, "histogram upper bounds")->delimiter(',');
  cmp->add_option("--pad", copt.pad, "bounding-box padding when no bounds are given")
      ->capture_default_str();
  cmp->add_option("--radii", copt.radii_count, "correlation radii")->capture_default_str();
  cmp->add_option("--corr-points", copt.corr_points, "points in the correlation sums")
      ->capture_default_str();
  cmp->add_option("--component", copt.spectrum_component, "component for the power spectrum")
      ->capture_default_str();
  cmp->add_option("--out", cmp_out, "diagnostics JSON")->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "full experiment from a config file");
  std::string run_config;
  std::string run_out;
  run->add_option("--config", run_config, "experiment config")->required();
  run->add_option("--out", run_out, "artifact directory (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::usage);
  }

  try {
    if (gen->parsed()) {
      const DynamicalSystem system = build_system(gen_sys);
      const Trajectory t = generate_trajectory(system, initial_state(gen_sys), gen_n,
                                               transient(gen_sys), gen_sampling);
      write_trajectory_csv(gen_out, t, provenance_of(gen));
      std::printf("wrote %zu states to %s\n", t.size(), gen_out.c_str());
    } else if (trn->parsed()) {
      tc.optimizer = parse_optimizer(trn_optimizer);
      tc.validate();
      const Trajectory data = read_trajectory_csv(trn_data);
      TrainResult r = train(init_network(tc.shape, tc.spec, tc.seed), make_dataset(data), tc);
      const Provenance prov = provenance_of(trn);
      save_model(r.net, trn_out, prov);
      if (!trn_losses.empty()) write_losses_csv(trn_losses, r.report, prov);
      std::printf("final train loss %s, test loss %s\n",
                  format_double(r.report.train_loss.back()).c_str(),
                  format_double(r.report.test_loss.back()).c_str());
    } else if (rol->parsed()) {
      const KanNetwork net = load_model(rol_model);
      Trajectory source;
      const Vec x0 = start_state(rol_from, rol_x0, &source);
      Trajectory t = rollout(net, x0, rol_n, rol_bound);
      if (!rol_from.empty()) {
        t.kind = source.kind;
        t.dt = source.dt;
        t.component_names = source.component_names;
      } else {
        for (int i = 0; i < net.output_dim(); ++i) {
          t.component_names.push_back("x" + std::to_string(i + 1));
        }
      }
      write_trajectory_csv(rol_out, t, provenance_of(rol));
      std::printf("wrote %zu states to %s\n", t.size(), rol_out.c_str());
    } else if (lya->parsed()) {
      if (!lya_model.empty()) {
        const KanNetwork net = load_model(lya_model);
        Trajectory source;
        const Vec x0 = start_state(lya_from, lya_sys.x0, &source);
        const Trajectory orbit = rollout(net, x0, lya_steps);
        const JacobianFn jac = [&net](const Vec& x) { return net.jacobian(x); };
        LyapunovSpectrum s = lyapunov_map(jac, orbit.states);
        const double sample_dt = lya_sample_dt > 0.0 ? lya_sample_dt : source.dt;
        if (sample_dt > 0.0) s = per_unit_time(s, sample_dt);
        print_spectrum("model " + lya_model, s);
      } else {
        if (lya_sys.name.empty()) throw InvalidInputError("either --system or --model is required");
        const DynamicalSystem system = build_system(lya_sys);
        if (system.kind == SystemKind::map) {
          const Trajectory orbit =
              generate_trajectory(system, initial_state(lya_sys), lya_steps, transient(lya_sys));
          print_spectrum(system.name, lyapunov_map(system.jacobian, orbit.states));
        } else {
          FlowLyapunovOptions fo;
          fo.total_time = lya_time;
          fo.dt = lya_dt;
          fo.transient = transient(lya_sys);
          print_spectrum(system.name, lyapunov_flow(system.function, system.jacobian,
                                                    initial_state(lya_sys), fo));
        }
      }
    } else if (dia->parsed()) {
      const ExperimentConfig cfg = load_config(dia_config);
      const KanNetwork net = load_model(dia_model);
      const DiagnosticsReport r = diagnose_stage(cfg, net);
      write_diagnostics_json(dia_out, r, {kToolVersion, cfg.hash()});
      std::printf("kl %s, corr_dim true %s model %s\n", format_double(r.kl).c_str(),
                  format_double(r.corr_dim_true).c_str(), format_double(r.corr_dim_model).c_str());
    } else if (cmp->parsed()) {
      const Trajectory ref = read_trajectory_csv(cmp_ref);
      const Trajectory test = read_trajectory_csv(cmp_test);
      const double dt = ref.kind == TrajectoryKind::flow_samples ? ref.dt : 1.0;
      DiagnosticsReport r = compare_orbits(ref.states, test.states, dt, copt);
      r.system = "trajectories";
      r.settings = {{"sampling_dt", dt},
                    {"corr_points", static_cast<double>(copt.corr_points)},
                    {"radii_count", static_cast<double>(copt.radii_count)},
                    {"histogram_pad", copt.lo.empty() ? copt.pad : 0.0},
                    {"spectrum_segments", static_cast<double>(copt.spectrum_segments)}};
      write_diagnostics_json(cmp_out, r, provenance_of(cmp));
      std::printf("kl %s\n", format_double(r.kl).c_str());
    } else if (run->parsed()) {
      const ExperimentConfig cfg = load_config(run_config);
      std::optional<std::filesystem::path> out;
      if (!run_out.empty()) out = run_out;
      const ExperimentResult r = run_experiment(cfg, out);
      std::printf("artifacts in %s\n", r.directory.string().c_str());
      std::printf("final train loss %s\n", format_double(r.training.train_loss.back()).c_str());
      print_spectrum("true", *r.diagnostics.true_lyapunov);
      print_spectrum("model", *r.diagnostics.model_lyapunov);
      std::printf("kl = %s\n", format_double(r.diagnostics.kl).c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "kanlab: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kanlab: internal error: %s\n", e.what());
    return static_cast<int>(ExitCode::internal);
  }
  return 0;
}
