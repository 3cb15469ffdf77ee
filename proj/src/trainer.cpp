#include "kanlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "kanlab/error.hpp"
#include "kanlab/optim.hpp"

namespace kanlab {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double entropy_of(std::span<const double> magnitudes, double total) {
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double m : magnitudes) {
    const double rho = m / total;
    if (rho > 0.0) h -= rho * std::log(rho);
  }
  return h;
}

}  // namespace

std::string to_string(Optimizer opt) {
  switch (opt) {
    case Optimizer::adam:
      return "adam";
    case Optimizer::gradient_descent:
      return "gradient-descent";
    case Optimizer::lbfgs:
      return "lbfgs";
  }
  return "unknown";
}

Optimizer parse_optimizer(const std::string& name) {
  if (name == "adam") return Optimizer::adam;
  if (name == "gradient-descent" || name == "gd") return Optimizer::gradient_descent;
  if (name == "lbfgs") return Optimizer::lbfgs;
  throw InvalidInputError("unknown optimizer '" + name + "'");
}

void validate_shape(std::span<const int> shape) {
  if (shape.size() < 2) throw ShapeError("network shape needs at least two entries");
  for (int n : shape) {
    if (n < 1) throw ShapeError("network shape entries must be positive");
  }
}

void TrainingConfig::validate() const {
  if (steps == 0) throw InvalidInputError("training needs at least one step");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInputError("learning rate must be positive and finite");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda) || !(lambda_entropy >= 0.0) ||
      !std::isfinite(lambda_entropy)) {
    throw InvalidInputError("regularization weights must be nonnegative and finite");
  }
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw InvalidInputError("split fraction must lie in (0, 1)");
  }
  if (lbfgs_iterations < 1 || lbfgs_evaluations < 1) {
    throw InvalidInputError("L-BFGS budgets must be positive");
  }
  spec.validate();
  validate_shape(shape);
}

KanNetwork init_network(std::span<const int> shape, const SplineSpec& spec,
                        std::uint64_t seed) {
  validate_shape(shape);
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<KanLayer> layers;
  for (std::size_t l = 0; l + 1 < shape.size(); ++l) {
    KanLayer layer(shape[l], shape[l + 1], spec, 1.0, 1.0);
    for (auto& e : layer.edges()) {
      for (auto& c : e.coeffs) c = noise(rng);
    }
    layers.push_back(std::move(layer));
  }
  return KanNetwork(std::move(layers));
}

void fit_grid_ranges(KanNetwork& net, std::span<const Vec> inputs, double pad) {
  if (inputs.empty()) throw InvalidInputError("grid ranges need at least one sample");
  std::vector<Vec> h(inputs.begin(), inputs.end());
  for (auto& layer : net.layers()) {
    for (int p = 0; p < layer.in_dim(); ++p) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const auto& x : h) {
        if (x.size() != layer.in_dim()) throw ShapeError("sample dimension mismatch");
        lo = std::min(lo, x[p]);
        hi = std::max(hi, x[p]);
      }
      if (!std::isfinite(lo) || !std::isfinite(hi)) {
        throw InvalidInputError("non-finite sample while fitting grid ranges");
      }
      double margin = pad * (hi - lo);
      // Constant inputs get a unit half-width.
      if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(lo)))) margin = 1.0;
      layer.set_input_range(p, lo - margin, hi + margin);
    }
    for (auto& x : h) x = layer_forward(layer, x).y;
  }
}

double mse_loss(const KanNetwork& net, const Dataset& data) {
  if (data.empty()) throw InvalidInputError("loss needs a nonempty dataset");
  double total = 0.0;
  std::vector<LayerCache> caches;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vec y = net.forward(data.inputs[i], caches);
    if (y.size() != data.targets[i].size()) {
      throw ShapeError("target dimension does not match the network output");
    }
    total += (y - data.targets[i]).squaredNorm();
  }
  return total / (static_cast<double>(data.size()) * net.output_dim());
}

Regularization regularization(const KanNetwork& net, const Dataset& batch) {
  if (batch.empty()) throw InvalidInputError("regularization needs a nonempty batch");
  Regularization reg;
  reg.magnitudes.assign(net.edge_count(), 0.0);
  std::vector<LayerCache> caches;
  for (const auto& x : batch.inputs) {
    net.forward(x, caches);
    std::size_t e = 0;
    for (const auto& cache : caches) {
      for (double v : cache.edge_value) reg.magnitudes[e++] += std::abs(v);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (auto& m : reg.magnitudes) {
    m *= inv_n;
    reg.l1 += m;
  }
  reg.entropy = entropy_of(reg.magnitudes, reg.l1);
  return reg;
}

LossGradient objective(const KanNetwork& net, const Dataset& batch, double lambda,
                       double lambda_entropy) {
  if (lambda == 0.0) return backprop(net, batch);
  if (batch.empty()) throw InvalidInputError("objective needs a nonempty batch");

  const Regularization reg = regularization(net, batch);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  // d(reg)/d(m_e), where d(entropy)/d(m_j) = -(log rho_j + H) / L1.
  std::vector<double> edge_extra(net.edge_count(), lambda * inv_n);
  if (reg.l1 > 0.0 && lambda_entropy != 0.0) {
    constexpr double kTiny = 1e-300;
    for (std::size_t e = 0; e < edge_extra.size(); ++e) {
      const double rho = std::max(reg.magnitudes[e] / reg.l1, kTiny);
      const double dh = -(std::log(rho) + reg.entropy) / reg.l1;
      edge_extra[e] = lambda * (1.0 + lambda_entropy * dh) * inv_n;
    }
  }

  LossGradient out;
  out.grad.assign(net.parameter_count(), 0.0);
  const double scale = inv_n / net.output_dim();
  std::vector<LayerCache> caches;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vec y = net.forward(batch.inputs[i], caches);
    const Vec residual = y - batch.targets[i];
    out.loss += residual.squaredNorm() * scale;
    backward(net, caches, (2.0 * scale) * residual, edge_extra, out.grad);
  }
  out.loss += lambda * (reg.l1 + lambda_entropy * reg.entropy);
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidInputError("split fraction must lie in (0, 1)");
  }
  const auto n_train =
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(data.size())));
  if (n_train == 0 || n_train >= data.size()) {
    throw InvalidInputError("split leaves an empty partition");
  }
  Dataset train;
  Dataset test;
  train.inputs.assign(data.inputs.begin(), data.inputs.begin() + n_train);
  train.targets.assign(data.targets.begin(), data.targets.begin() + n_train);
  test.inputs.assign(data.inputs.begin() + n_train, data.inputs.end());
  test.targets.assign(data.targets.begin() + n_train, data.targets.end());
  return {std::move(train), std::move(test)};
}

TrainResult train(KanNetwork net, const Dataset& data, const TrainingConfig& config) {
  config.validate();
  auto [train_set, test_set] = split_dataset(data, config.split_fraction);
  fit_grid_ranges(net, train_set.inputs);

  std::vector<double> theta = net.parameters();
  const std::vector<char> mask = net.trainable_mask();
  AdamOptimizer adam(theta.size(), config.learning_rate);
  LbfgsOptimizer lbfgs(theta.size(), {.learning_rate = config.learning_rate});

  // Objective for the line search; non-finite evaluations are reported as
  // +inf so the search backs off instead of failing.
  KanNetwork probe = net;
  const ObjectiveFn f = [&](std::span<const double> x, std::span<double> grad) {
    probe.set_parameters(x);
    try {
      LossGradient g = objective(probe, train_set, config.lambda, config.lambda_entropy);
      if (!std::isfinite(g.loss) || !all_finite(g.grad)) {
        return std::numeric_limits<double>::infinity();
      }
      std::copy(g.grad.begin(), g.grad.end(), grad.begin());
      return g.loss;
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  TrainResult result;
  result.report.train_loss.reserve(config.steps);
  result.report.test_loss.reserve(config.steps);
  for (std::size_t step = 0; step < config.steps; ++step) {
    if (config.optimizer == Optimizer::lbfgs) {
      const std::size_t start = lbfgs.evaluations();
      for (int it = 0; it < config.lbfgs_iterations; ++it) {
        const auto used = static_cast<int>(lbfgs.evaluations() - start);
        if (used >= config.lbfgs_evaluations) break;
        const double value = lbfgs.step(f, theta, mask, config.lbfgs_evaluations - used);
        if (!std::isfinite(value)) {
          throw TrainingDivergedError("objective became non-finite", static_cast<long>(step + 1));
        }
      }
    } else {
      LossGradient g;
      try {
        g = objective(net, train_set, config.lambda, config.lambda_entropy);
      } catch (const DomainError&) {
        throw TrainingDivergedError("network produced a non-finite activation",
                                    static_cast<long>(step + 1));
      }
      if (!std::isfinite(g.loss) || !all_finite(g.grad)) {
        throw TrainingDivergedError("objective became non-finite", static_cast<long>(step + 1));
      }
      for (std::size_t i = 0; i < g.grad.size(); ++i) {
        if (!mask[i]) g.grad[i] = 0.0;
      }
      if (config.optimizer == Optimizer::adam) {
        adam.step(theta, g.grad);
      } else {
        for (std::size_t i = 0; i < theta.size(); ++i) {
          theta[i] -= config.learning_rate * g.grad[i];
        }
      }
    }
    if (!all_finite(theta)) {
      throw TrainingDivergedError("parameters became non-finite", static_cast<long>(step + 1));
    }
    net.set_parameters(theta);

    double train_loss = 0.0;
    double test_loss = 0.0;
    try {
      train_loss = mse_loss(net, train_set);
      test_loss = mse_loss(net, test_set);
    } catch (const DomainError&) {
      throw TrainingDivergedError("network produced a non-finite activation",
                                  static_cast<long>(step + 1));
    }
    if (!std::isfinite(train_loss) || !std::isfinite(test_loss)) {
      throw TrainingDivergedError("loss became non-finite", static_cast<long>(step + 1));
    }
    result.report.train_loss.push_back(train_loss);
    result.report.test_loss.push_back(test_loss);
  }
  result.report.parameters = std::move(theta);
  result.net = std::move(net);
  return result;
}

std::vector<bool> edges_below(const KanNetwork& net, const Dataset& batch,
                              double threshold) {
  const Regularization reg = regularization(net, batch);
  std::vector<bool> out(reg.magnitudes.size());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = reg.magnitudes[e] < threshold;
  return out;
}

KanNetwork prune(KanNetwork net, const Dataset& batch, double threshold) {
  if (!(threshold >= 0.0)) throw InvalidInputError("prune threshold must be nonnegative");
  const std::vector<bool> below = edges_below(net, batch, threshold);
  std::size_t e = 0;
  for (auto& layer : net.layers()) {
    for (auto& act : layer.edges()) {
      if (below[e++]) {
        act.zero_out();
        act.frozen = true;
      }
    }
  }
  return net;
}

}  // namespace kanlab
