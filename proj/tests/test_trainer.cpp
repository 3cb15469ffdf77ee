#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "kanlab/dynsys.hpp"
#include "kanlab/error.hpp"
#include "kanlab/optim.hpp"
#include "kanlab/trainer.hpp"
#include "support.hpp"

using namespace kanlab;
using testing::rel_err;

namespace {

Dataset ikeda_data(std::size_t n = 10000) {
  return make_dataset(generate_trajectory(make_ikeda(), Vec::Constant(2, 0.1), n, 1000));
}

Dataset random_batch(std::mt19937& rng, int in, int out, int n) {
  Dataset d;
  for (int i = 0; i < n; ++i) {
    d.inputs.push_back(testing::random_vec(rng, in));
    d.targets.push_back(testing::random_vec(rng, out));
  }
  return d;
}

// Network whose edges carry fixed constant outputs c_e on [-1, 1].
KanNetwork constant_edges(const std::vector<double>& values) {
  const SplineSpec spec{3, 4, -1.0, 1.0};
  KanLayer layer(1, static_cast<int>(values.size()), spec);
  for (std::size_t q = 0; q < values.size(); ++q) {
    for (auto& c : layer.edge(static_cast<int>(q), 0).coeffs) c = values[q];
  }
  return KanNetwork({layer});
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("initialization") {
  const SplineSpec spec{3, 10, -1.0, 1.0};
  const KanNetwork a = init_network(std::vector<int>{2, 4, 2}, spec, 0);
  const KanNetwork b = init_network(std::vector<int>{2, 4, 2}, spec, 0);
  const KanNetwork c = init_network(std::vector<int>{2, 4, 2}, spec, 1);
  CHECK(a.parameters() == b.parameters());
  CHECK(a.parameters() != c.parameters());
  CHECK(a.edge_count() == 16);
  CHECK(init_network(std::vector<int>{3, 3}, SplineSpec{3, 3, -1.0, 1.0}, 0).edge_count() == 9);

  double sum = 0.0;
  double sq = 0.0;
  int n = 0;
  const KanNetwork big = init_network(std::vector<int>{5, 20, 5}, spec, 3);
  for (const auto& layer : big.layers()) {
    for (const auto& e : layer.edges()) {
      CHECK(e.w_base == 1.0);
      CHECK(e.w_spline == 1.0);
      for (double v : e.coeffs) {
        sum += v;
        sq += v * v;
        ++n;
      }
    }
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::sqrt(sq / n - mean * mean) == doctest::Approx(0.1).epsilon(0.05));

  CHECK_THROWS_AS(init_network(std::vector<int>{2}, spec, 0), InvalidInputError);
  CHECK_THROWS_AS(init_network(std::vector<int>{2, 0, 2}, spec, 0), InvalidInputError);
}

TEST_CASE("mean squared error") {
  const SplineSpec spec{3, 5, -1.0, 1.0};
  const KanNetwork net = testing::random_network({2, 3, 2}, spec, 1);
  std::mt19937 rng(1);
  Dataset d;
  for (int i = 0; i < 20; ++i) {
    d.inputs.push_back(testing::random_vec(rng, 2));
    d.targets.push_back(net.forward(d.inputs.back()));
  }
  CHECK(mse_loss(net, d) == 0.0);
  const double delta = 0.25;
  for (auto& t : d.targets) t.array() += delta;
  CHECK(mse_loss(net, d) == doctest::Approx(delta * delta).epsilon(1e-12));

  const KanNetwork fresh = init_network(std::vector<int>{2, 4, 2}, SplineSpec{3, 10, -1.0, 1.0}, 0);
  const double ikeda = mse_loss(fresh, ikeda_data(2000));
  CHECK(std::isfinite(ikeda));
  CHECK(ikeda > 0.0);
  CHECK_THROWS_AS(mse_loss(net, Dataset{}), InvalidInputError);
}

TEST_CASE("magnitude regularizers") {
  Dataset batch;
  for (double x : {-0.5, 0.0, 0.5}) {
    batch.inputs.push_back(Vec::Constant(1, x));
    batch.targets.push_back(Vec::Zero(1));
  }
  SUBCASE("single edge has zero entropy") {
    const KanNetwork net = constant_edges({0.7});
    const Regularization r = regularization(net, batch);
    CHECK(r.l1 == doctest::Approx(0.7));
    CHECK(r.entropy == doctest::Approx(0.0));
  }
  SUBCASE("two equal edges have entropy ln 2") {
    Dataset b2 = batch;
    for (auto& t : b2.targets) t = Vec::Zero(2);
    const Regularization r = regularization(constant_edges({0.3, -0.3}), b2);
    CHECK(r.l1 == doctest::Approx(0.6));
    CHECK(r.entropy == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("dead network") {
    Dataset b2 = batch;
    for (auto& t : b2.targets) t = Vec::Zero(2);
    const Regularization r = regularization(constant_edges({0.0, 0.0}), b2);
    CHECK(r.l1 == 0.0);
    CHECK(r.entropy == 0.0);
  }
  SUBCASE("entropy lies in [0, ln #edges]") {
    std::mt19937 rng(4);
    for (unsigned seed = 0; seed < 20; ++seed) {
      const KanNetwork net = testing::random_network({2, 3, 2}, SplineSpec{3, 4, -1.0, 1.0}, seed);
      const Regularization r = regularization(net, random_batch(rng, 2, 2, 16));
      CHECK(r.entropy >= 0.0);
      CHECK(r.entropy <= std::log(static_cast<double>(net.edge_count())) + 1e-12);
    }
  }
}

TEST_CASE("regularized objective gradient") {
  const SplineSpec spec{3, 5, -1.0, 1.0};
  std::mt19937 rng(21);
  for (unsigned seed : {2u, 5u}) {
    const KanNetwork net = testing::random_network({2, 2, 2}, spec, seed);
    const Dataset d = random_batch(rng, 2, 2, 12);
    const double lambda = 0.05;
    const double lambda_entropy = 2.0;
    const LossGradient lg = objective(net, d, lambda, lambda_entropy);
    const Regularization reg = regularization(net, d);
    CHECK(rel_err(lg.loss, mse_loss(net, d) + lambda * (reg.l1 + lambda_entropy * reg.entropy)) <
          1e-13);
    auto value = [&](const std::vector<double>& theta) {
      KanNetwork p = net;
      p.set_parameters(theta);
      return objective(p, d, lambda, lambda_entropy).loss;
    };
    const std::vector<double> theta = net.parameters();
    double scale = 0.0;
    for (double g : lg.grad) scale = std::max(scale, std::abs(g));
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      std::vector<double> up = theta;
      std::vector<double> down = theta;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      const double fd = (value(up) - value(down)) / 2e-6;
      worst = std::max(worst, std::abs(fd - lg.grad[i]) / std::max(std::abs(fd), 1e-3 * scale));
    }
    CHECK(worst < 1e-5);
  }
  SUBCASE("zero strength is the plain loss") {
    const KanNetwork net = testing::random_network({2, 2}, spec, 3);
    const Dataset d = random_batch(rng, 2, 2, 8);
    const LossGradient a = objective(net, d, 0.0, 10.0);
    const LossGradient b = backprop(net, d);
    CHECK(a.loss == b.loss);
    CHECK(a.grad == b.grad);
  }
}

TEST_CASE("a small gradient step does not increase the loss") {
  std::mt19937 rng(8);
  for (unsigned seed = 0; seed < 10; ++seed) {
    KanNetwork net = testing::random_network({2, 3, 2}, SplineSpec{3, 4, -1.0, 1.0}, seed);
    const Dataset d = random_batch(rng, 2, 2, 20);
    const LossGradient g = objective(net, d, 0.0, 0.0);
    std::vector<double> theta = net.parameters();
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= 1e-4 * g.grad[i];
    net.set_parameters(theta);
    CHECK(mse_loss(net, d) <= g.loss);
  }
}

TEST_CASE("temporal split") {
  Dataset d;
  for (int i = 0; i < 10; ++i) {
    d.inputs.push_back(Vec::Constant(1, i));
    d.targets.push_back(Vec::Constant(1, i + 1));
  }
  const auto [train_set, test_set] = split_dataset(d, 0.8);
  CHECK(train_set.size() == 8);
  CHECK(test_set.size() == 2);
  CHECK(train_set.inputs.back()[0] == 7.0);
  CHECK(test_set.inputs.front()[0] == 8.0);
  CHECK_THROWS_AS(split_dataset(d, 0.0), InvalidInputError);
  CHECK_THROWS_AS(split_dataset(d, 1.0), InvalidInputError);
  CHECK_THROWS_AS(split_dataset(d, 0.05), InvalidInputError);
}

TEST_CASE("grid ranges follow the data") {
  KanNetwork net = init_network(std::vector<int>{2, 3, 2}, SplineSpec{3, 5, -1.0, 1.0}, 0);
  std::vector<Vec> xs;
  for (int i = 0; i <= 10; ++i) xs.push_back((Vec(2) << 2.0 + 0.1 * i, -3.0).finished());
  fit_grid_ranges(net, xs);
  const auto& e0 = net.layers()[0].edge(0, 0);
  CHECK(e0.spec.lo == doctest::Approx(2.0 - 0.1));
  CHECK(e0.spec.hi == doctest::Approx(3.0 + 0.1));
  // Constant input: unit padding on both sides.
  const auto& e1 = net.layers()[0].edge(0, 1);
  CHECK(e1.spec.lo == doctest::Approx(-4.0));
  CHECK(e1.spec.hi == doctest::Approx(-2.0));
  CHECK_NOTHROW(net.validate());
}

TEST_CASE("training config validation") {
  TrainingConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [&](auto mutate) {
    TrainingConfig b;
    mutate(b);
    CHECK_THROWS_AS(b.validate(), InvalidInputError);
  };
  bad([](TrainingConfig& b) { b.steps = 0; });
  bad([](TrainingConfig& b) { b.learning_rate = 0.0; });
  bad([](TrainingConfig& b) { b.learning_rate = NAN; });
  bad([](TrainingConfig& b) { b.lambda = -1.0; });
  bad([](TrainingConfig& b) { b.lambda_entropy = INFINITY; });
  bad([](TrainingConfig& b) { b.split_fraction = 1.0; });
  bad([](TrainingConfig& b) { b.shape = {2}; });
  CHECK(parse_optimizer("adam") == Optimizer::adam);
  CHECK(parse_optimizer("gradient-descent") == Optimizer::gradient_descent);
  CHECK(parse_optimizer("lbfgs") == Optimizer::lbfgs);
  CHECK_THROWS_AS(parse_optimizer("sgd"), InvalidInputError);
  CHECK(to_string(Optimizer::gradient_descent) == "gradient-descent");
}

TEST_CASE("a constant map is learned quickly") {
  Dataset d;
  std::mt19937 rng(6);
  const Vec c = (Vec(2) << 0.3, -0.6).finished();
  for (int i = 0; i < 200; ++i) {
    d.inputs.push_back(testing::random_vec(rng, 2));
    d.targets.push_back(c);
  }
  TrainingConfig tc;
  tc.shape = {2, 2};
  tc.spec = SplineSpec{3, 5, -1.0, 1.0};
  tc.steps = 20;
  tc.optimizer = Optimizer::lbfgs;
  tc.learning_rate = 1.0;
  const TrainResult r = train(init_network(tc.shape, tc.spec, 0), d, tc);
  CHECK(r.report.train_loss.back() < 1e-6);

  // Adam's per-coordinate steps of size lr keep it hovering near 1e-2 here.
  tc.optimizer = Optimizer::adam;
  tc.learning_rate = 0.05;
  const TrainResult a = train(init_network(tc.shape, tc.spec, 0), d, tc);
  CHECK(a.report.train_loss.back() < 0.1 * a.report.train_loss.front());
}

TEST_CASE("Ikeda protocol with the default optimizer") {
  TrainingConfig tc;  // [2,4,2], G = 10, k = 3, 50 steps, lr 0.1, 80/20, seed 0
  REQUIRE(tc.optimizer == Optimizer::adam);
  const Dataset d = ikeda_data();
  const TrainResult r = train(init_network(tc.shape, tc.spec, tc.seed), d, tc);
  const auto& loss = r.report.train_loss;
  REQUIRE(loss.size() == 50);
  REQUIRE(r.report.test_loss.size() == 50);
  CHECK(loss.back() < 1e-2);
  for (std::size_t i = loss.size() - 10; i < loss.size(); ++i) CHECK(loss[i] <= loss[i - 1]);
  for (double v : r.report.test_loss) CHECK(v >= 0.0);
  CHECK(r.report.parameters == r.net.parameters());
}

TEST_CASE("food-chain protocol with the default optimizer") {
  TrainingConfig tc;
  tc.shape = {3, 3};
  tc.spec = SplineSpec{3, 3, -1.0, 1.0};
  tc.steps = 100;
  tc.learning_rate = 0.5;
  tc.split_fraction = 0.9;
  FlowSampling sampling;
  const Trajectory traj = generate_trajectory(make_food_chain(), (Vec(3) << 0.7, 0.2, 1.0).finished(),
                                              10000, 500.0, sampling);
  const TrainResult r = train(init_network(tc.shape, tc.spec, 0), make_dataset(traj), tc);
  CHECK(r.report.train_loss.back() < 1e-2);
}

TEST_CASE("training is deterministic") {
  TrainingConfig tc;
  tc.steps = 5;
  tc.optimizer = Optimizer::lbfgs;
  tc.learning_rate = 1.0;
  const Dataset d = ikeda_data(1000);
  const TrainResult a = train(init_network(tc.shape, tc.spec, 0), d, tc);
  const TrainResult b = train(init_network(tc.shape, tc.spec, 0), d, tc);
  CHECK(a.report.train_loss == b.report.train_loss);
  CHECK(a.report.test_loss == b.report.test_loss);
  CHECK(a.report.parameters == b.report.parameters);
}

TEST_CASE("divergent training is reported with its step") {
  TrainingConfig tc;
  tc.steps = 50;
  tc.optimizer = Optimizer::gradient_descent;
  tc.learning_rate = 1e12;
  const Dataset d = ikeda_data(500);
  try {
    train(init_network(tc.shape, tc.spec, 0), d, tc);
    FAIL("expected divergence");
  } catch (const TrainingDivergedError& e) {
    CHECK(e.step() >= 1);
    CHECK(e.step() <= 50);
    CHECK(e.code() == ExitCode::training_diverged);
  }
}

TEST_CASE("pruning") {
  const SplineSpec spec{3, 4, -1.0, 1.0};
  std::mt19937 rng(10);
  const KanNetwork net = testing::random_network({2, 3, 2}, spec, 10);
  const Dataset batch = random_batch(rng, 2, 2, 30);
  SUBCASE("threshold zero changes nothing") {
    const KanNetwork p = prune(net, batch, 0.0);
    CHECK(p.parameters() == net.parameters());
  }
  SUBCASE("infinite threshold silences the network") {
    const KanNetwork p = prune(net, batch, std::numeric_limits<double>::infinity());
    for (int i = 0; i < 20; ++i) CHECK(p.forward(testing::random_vec(rng, 2)).isZero(0.0));
    for (char m : p.trainable_mask()) CHECK(m == 0);
    CHECK(p.shape() == net.shape());
  }
  SUBCASE("only the dominant edge survives") {
    KanLayer layer(2, 2, spec);
    for (int q = 0; q < 2; ++q) {
      for (int p = 0; p < 2; ++p) {
        const double v = (q == 1 && p == 0) ? 1.0 : 1e-6;
        for (auto& c : layer.edge(q, p).coeffs) c = v;
      }
    }
    const KanNetwork p = prune(KanNetwork({layer}), batch, 1e-3);
    const auto below = edges_below(KanNetwork({layer}), batch, 1e-3);
    CHECK(below == std::vector<bool>{true, true, false, true});
    CHECK(!p.layers()[0].edge(1, 0).frozen);
    CHECK(p.layers()[0].edge(0, 0).frozen);
    CHECK(p.layers()[0].edge(1, 0).coeffs == layer.edge(1, 0).coeffs);
  }
  SUBCASE("pruned sets grow with the threshold") {
    std::vector<bool> prev = edges_below(net, batch, 0.0);
    for (double t : {0.01, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
      const auto cur = edges_below(net, batch, t);
      for (std::size_t e = 0; e < cur.size(); ++e) {
        if (prev[e]) CHECK(cur[e]);
      }
      prev = cur;
    }
  }
  SUBCASE("negative threshold") {
    CHECK_THROWS_AS(prune(net, batch, -1.0), InvalidInputError);
  }
}

}  // TEST_SUITE

TEST_SUITE("optim") {

TEST_CASE("first Adam step moves every coordinate by the learning rate") {
  AdamOptimizer adam(3, 0.05);
  std::vector<double> theta{1.0, -2.0, 0.5};
  adam.step(theta, std::vector<double>{3.0, -0.001, 40.0});
  CHECK(theta[0] == doctest::Approx(0.95).epsilon(1e-6));
  CHECK(theta[1] == doctest::Approx(-1.95).epsilon(1e-4));
  CHECK(theta[2] == doctest::Approx(0.45).epsilon(1e-6));
}

TEST_CASE("L-BFGS minimizes the Rosenbrock function") {
  const ObjectiveFn rosen = [](std::span<const double> x, std::span<double> g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  LbfgsOptimizer opt(2, {});
  std::vector<double> x{-1.2, 1.0};
  double f = 0.0;
  for (int i = 0; i < 200; ++i) f = opt.step(rosen, x, {});
  CHECK(f < 1e-12);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("L-BFGS never increases the objective and respects the mask") {
  std::mt19937 rng(2);
  const int n = 6;
  Mat A = Mat::Random(n, n);
  const Mat H = A.transpose() * A + Mat::Identity(n, n);
  const Vec b = Vec::Random(n);
  const ObjectiveFn quad = [&](std::span<const double> x, std::span<double> g) {
    const Vec xv = Eigen::Map<const Vec>(x.data(), n);
    const Vec gv = H * xv - b;
    std::copy(gv.data(), gv.data() + n, g.begin());
    return 0.5 * xv.dot(H * xv) - b.dot(xv);
  };
  LbfgsOptimizer opt(n, {});
  std::vector<double> x(n, 0.0);
  x[2] = 0.75;
  const std::vector<char> mask{1, 1, 0, 1, 1, 1};
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 30; ++i) {
    const double f = opt.step(quad, x, mask, 25);
    CHECK(f <= prev);
    prev = f;
  }
  CHECK(x[2] == 0.75);
}

}  // TEST_SUITE
