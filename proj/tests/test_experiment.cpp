#include "doctest.h"
#include "kanlab/error.hpp"
#include "kanlab/experiment.hpp"
#include "support.hpp"

using namespace kanlab;

namespace {

ExperimentConfig small_ikeda() {
  return parse_config(R"([system]
name = ikeda
[data]
n = 600
seed = 3
[model]
shape = 2, 3, 2
G = 5
[training]
steps = 8
lr = 1
optimizer = lbfgs
[diagnostics]
lo = -1, -2.5
hi = 2, 1
orbit = 2000
lyapunov_steps = 2000
settle = 100
corr_points = 800
)");
}

std::string stage_of(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  try {
    run_experiment(cfg, dir);
  } catch (const StageError& e) {
    return e.stage();
  }
  return "";
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("pipeline writes every artifact and reruns identically") {
  const auto dir = testing::scratch_dir("experiment");
  const ExperimentConfig cfg = small_ikeda();
  const ExperimentResult a = run_experiment(cfg, dir / "a");
  const ExperimentResult b = run_experiment(cfg, dir / "b");
  for (const char* f : {"traj.csv", "model.json", "losses.csv", "rollout.csv", "diagnostics.json"}) {
    CAPTURE(f);
    REQUIRE(std::filesystem::exists(dir / "a" / f));
    CHECK(read_text_file(dir / "a" / f) == read_text_file(dir / "b" / f));
  }
  CHECK(a.data.size() == 600);
  CHECK(a.rollout.size() == 600);
  CHECK(a.training.train_loss.size() == 8);
  CHECK(a.training.train_loss.back() < a.training.train_loss.front());
  CHECK(a.net.parameters() == b.net.parameters());
  REQUIRE(a.diagnostics.true_lyapunov);
  REQUIRE(a.diagnostics.model_lyapunov);
  CHECK(a.diagnostics.kl >= 0.0);
  CHECK(read_text_file(dir / "a" / "losses.csv").find("config=" + cfg.hash()) != std::string::npos);

  const Trajectory traj = read_trajectory_csv(dir / "a" / "traj.csv");
  CHECK(traj.states == a.data.states);
  CHECK(load_model(dir / "a" / "model.json").parameters() == a.net.parameters());
}

TEST_CASE("errors name their stage") {
  const auto dir = testing::scratch_dir("experiment-errors");
  ExperimentConfig cfg = small_ikeda();
  cfg.data.n = 1;
  CHECK(stage_of(cfg, dir) == "config");

  cfg = small_ikeda();
  cfg.training.optimizer = Optimizer::gradient_descent;
  cfg.training.lr = 1e12;
  CHECK(stage_of(cfg, dir) == "train");
  try {
    run_experiment(cfg, dir);
  } catch (const Error& e) {
    CHECK(e.code() == ExitCode::training_diverged);
    CHECK(std::string(e.what()).rfind("train: ", 0) == 0);
  }
}

}  // TEST_SUITE
