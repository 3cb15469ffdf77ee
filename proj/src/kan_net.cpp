#include "kanlab/kan_net.hpp"

#include <cmath>
#include <string>

#include "kanlab/error.hpp"

namespace kanlab {

namespace {

// Evaluates a layer into preallocated storage; caches are reused across
// samples so the training loop does not allocate per sample.
void layer_forward_into(const KanLayer& layer, const Vec& x, LayerCache& cache,
                        Vec& y) {
  const int n_in = layer.in_dim();
  const int n_out = layer.out_dim();
  const std::size_t n_edges = static_cast<std::size_t>(n_in) * n_out;
  cache.input = x;
  cache.basis.resize(n_edges);
  cache.spline_sum.resize(n_edges);
  cache.edge_value.resize(n_edges);
  cache.edge_slope.resize(n_edges);
  cache.silu_value.resize(n_in);
  y.setZero(n_out);

  std::vector<double> silu_slope(n_in);
  for (int p = 0; p < n_in; ++p) {
    cache.silu_value[p] = silu(x[p]);
    silu_slope[p] = silu_derivative(x[p]);
  }
  for (int q = 0; q < n_out; ++q) {
    for (int p = 0; p < n_in; ++p) {
      const std::size_t e = static_cast<std::size_t>(q) * n_in + p;
      const SplineActivation& act = layer.edge(q, p);
      LocalBasis& local = cache.basis[e];
      evaluate_local(act.knots, act.spec.degree, x[p], local, true);
      double s = 0.0;
      double ds = 0.0;
      for (int r = 0; r <= act.spec.degree; ++r) {
        const double c = act.coeffs[local.first + r];
        s += c * local.values[r];
        ds += c * local.slopes[r];
      }
      cache.spline_sum[e] = s;
      cache.edge_value[e] = act.w_base * cache.silu_value[p] + act.w_spline * s;
      cache.edge_slope[e] = act.w_base * silu_slope[p] + act.w_spline * ds;
      y[q] += cache.edge_value[e];
    }
  }
}

}  // namespace

KanLayer::KanLayer(int in_dim, int out_dim, const SplineSpec& spec, double w_base,
                   double w_spline)
    : in_dim_(in_dim), out_dim_(out_dim) {
  if (in_dim < 1 || out_dim < 1) {
    throw ShapeError("layer dimensions must be positive");
  }
  edges_.assign(static_cast<std::size_t>(in_dim) * out_dim,
                SplineActivation(spec, w_base, w_spline));
}

void KanLayer::set_input_range(int p, double lo, double hi) {
  for (int q = 0; q < out_dim_; ++q) edge(q, p).set_range(lo, hi);
}

std::size_t KanLayer::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : edges_) n += e.parameter_count();
  return n;
}

void KanLayer::validate() const {
  if (in_dim_ < 1 || out_dim_ < 1 ||
      edges_.size() != static_cast<std::size_t>(in_dim_) * out_dim_) {
    throw ShapeError("layer edge grid does not match its dimensions");
  }
  for (const auto& e : edges_) {
    e.validate();
    if (e.spec.degree != degree()) {
      throw ShapeError("all edges of a layer must share the spline degree");
    }
  }
}

LayerOutput layer_forward(const KanLayer& layer, const Vec& x) {
  if (x.size() != layer.in_dim()) {
    throw ShapeError("layer expects " + std::to_string(layer.in_dim()) +
                     " inputs, got " + std::to_string(x.size()));
  }
  LayerOutput out;
  layer_forward_into(layer, x, out.cache, out.y);
  return out;
}

KanNetwork::KanNetwork(std::vector<KanLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  shape_.push_back(layers_.front().in_dim());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].in_dim() != shape_.back()) {
      throw ShapeError("layer " + std::to_string(l) + " expects " +
                       std::to_string(layers_[l].in_dim()) +
                       " inputs but the previous layer emits " +
                       std::to_string(shape_.back()));
    }
    shape_.push_back(layers_[l].out_dim());
  }
}

std::size_t KanNetwork::edge_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.edges().size();
  return n;
}

std::size_t KanNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.parameter_count();
  return n;
}

std::vector<double> KanNetwork::parameters() const {
  std::vector<double> theta;
  theta.reserve(parameter_count());
  for (const auto& layer : layers_) {
    for (const auto& e : layer.edges()) {
      theta.insert(theta.end(), e.coeffs.begin(), e.coeffs.end());
      theta.push_back(e.w_base);
      theta.push_back(e.w_spline);
    }
  }
  return theta;
}

void KanNetwork::set_parameters(std::span<const double> theta) {
  if (theta.size() != parameter_count()) {
    throw ShapeError("parameter vector has " + std::to_string(theta.size()) +
                     " entries, network has " + std::to_string(parameter_count()));
  }
  std::size_t k = 0;
  for (auto& layer : layers_) {
    for (auto& e : layer.edges()) {
      for (auto& c : e.coeffs) c = theta[k++];
      e.w_base = theta[k++];
      e.w_spline = theta[k++];
    }
  }
}

std::vector<char> KanNetwork::trainable_mask() const {
  std::vector<char> mask;
  mask.reserve(parameter_count());
  for (const auto& layer : layers_) {
    for (const auto& e : layer.edges()) {
      mask.insert(mask.end(), e.parameter_count(), e.frozen ? 0 : 1);
    }
  }
  return mask;
}

void KanNetwork::check_input(const Vec& x) const {
  if (shape_.empty()) throw ShapeError("network has no layers");
  if (x.size() != input_dim()) {
    throw ShapeError("network expects " + std::to_string(input_dim()) +
                     " inputs, got " + std::to_string(x.size()));
  }
}

Vec KanNetwork::forward(const Vec& x) const {
  check_input(x);
  Vec h = x;
  for (const auto& layer : layers_) {
    Vec next = Vec::Zero(layer.out_dim());
    for (int q = 0; q < layer.out_dim(); ++q) {
      for (int p = 0; p < layer.in_dim(); ++p) next[q] += layer.edge(q, p)(h[p]);
    }
    h = std::move(next);
  }
  return h;
}

Vec KanNetwork::forward(const Vec& x, std::vector<LayerCache>& caches) const {
  check_input(x);
  caches.resize(layers_.size());
  Vec h = x;
  Vec next;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layer_forward_into(layers_[l], h, caches[l], next);
    std::swap(h, next);
  }
  return h;
}

Mat KanNetwork::jacobian(const Vec& x) const {
  std::vector<LayerCache> caches;
  forward(x, caches);
  Mat j = Mat::Identity(input_dim(), input_dim());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const KanLayer& layer = layers_[l];
    Mat local(layer.out_dim(), layer.in_dim());
    for (int q = 0; q < layer.out_dim(); ++q) {
      for (int p = 0; p < layer.in_dim(); ++p) {
        local(q, p) = caches[l].edge_slope[static_cast<std::size_t>(q) * layer.in_dim() + p];
      }
    }
    j = local * j;
  }
  return j;
}

void KanNetwork::validate() const {
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].validate();
    if (layers_[l].in_dim() != shape_[l] || layers_[l].out_dim() != shape_[l + 1]) {
      throw ShapeError("layer " + std::to_string(l) + " disagrees with the shape");
    }
  }
}

Vec forward(const KanNetwork& net, const Vec& x) { return net.forward(x); }
Mat jacobian(const KanNetwork& net, const Vec& x) { return net.jacobian(x); }

std::size_t parameter_count_for(std::span<const int> shape, const SplineSpec& spec) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < shape.size(); ++l) {
    n += static_cast<std::size_t>(shape[l]) * shape[l + 1] * (spec.basis_count() + 2);
  }
  return n;
}

void backward(const KanNetwork& net, const std::vector<LayerCache>& caches,
              const Vec& output_adjoint, std::span<const double> edge_extra,
              std::span<double> grad) {
  const auto& layers = net.layers();
  if (grad.size() != net.parameter_count()) {
    throw ShapeError("gradient buffer does not match the parameter count");
  }
  if (!edge_extra.empty() && edge_extra.size() != net.edge_count()) {
    throw ShapeError("edge coefficient vector does not match the edge count");
  }

  // Offsets of each layer's first parameter and first edge.
  std::vector<std::size_t> param_offset(layers.size() + 1, 0);
  std::vector<std::size_t> edge_offset(layers.size() + 1, 0);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    param_offset[l + 1] = param_offset[l] + layers[l].parameter_count();
    edge_offset[l + 1] = edge_offset[l] + layers[l].edges().size();
  }

  Vec adjoint = output_adjoint;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const KanLayer& layer = layers[li];
    const LayerCache& cache = caches[li];
    Vec input_adjoint = Vec::Zero(layer.in_dim());
    std::size_t offset = param_offset[li];
    for (int q = 0; q < layer.out_dim(); ++q) {
      for (int p = 0; p < layer.in_dim(); ++p) {
        const std::size_t e = static_cast<std::size_t>(q) * layer.in_dim() + p;
        const SplineActivation& act = layer.edge(q, p);
        double a = adjoint[q];
        if (!edge_extra.empty()) {
          const double v = cache.edge_value[e];
          const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
          a += edge_extra[edge_offset[li] + e] * sign;
        }
        if (!act.frozen) {
          const LocalBasis& local = cache.basis[e];
          for (int r = 0; r <= act.spec.degree; ++r) {
            grad[offset + local.first + r] += a * act.w_spline * local.values[r];
          }
          const std::size_t nc = act.coeffs.size();
          grad[offset + nc] += a * cache.silu_value[p];
          grad[offset + nc + 1] += a * cache.spline_sum[e];
        }
        input_adjoint[p] += a * cache.edge_slope[e];
        offset += act.parameter_count();
      }
    }
    adjoint = std::move(input_adjoint);
  }
}

LossGradient backprop(const KanNetwork& net, const Dataset& batch) {
  if (batch.empty()) throw InvalidInputError("backprop needs a nonempty batch");
  if (batch.targets.size() != batch.inputs.size()) {
    throw ShapeError("batch inputs and targets differ in count");
  }
  LossGradient out;
  out.grad.assign(net.parameter_count(), 0.0);
  const double scale = 1.0 / (static_cast<double>(batch.size()) * net.output_dim());
  std::vector<LayerCache> caches;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vec y = net.forward(batch.inputs[i], caches);
    if (batch.targets[i].size() != y.size()) {
      throw ShapeError("target dimension does not match the network output");
    }
    const Vec residual = y - batch.targets[i];
    out.loss += residual.squaredNorm() * scale;
    backward(net, caches, (2.0 * scale) * residual, {}, out.grad);
  }
  return out;
}

}  // namespace kanlab
