#pragma once

/// @file kan_net.hpp
/// @brief Dense stacks of KAN layers: evaluation, Jacobians and gradients.
///
/// Layer l maps n_l inputs to n_{l+1} outputs with y_q = sum_p phi_{q,p}(x_p).
/// Parameters are flattened layer by layer, then by output index, then by
/// input index, and within an edge as [coeffs..., w_base, w_spline]. Model
/// files and optimizers rely on this order.

#include <span>
#include <vector>

#include "kanlab/spline.hpp"
#include "kanlab/types.hpp"

namespace kanlab {

class KanLayer {
 public:
  KanLayer() = default;
  /// Layer whose edges are zero splines on `spec` with the given weights.
  KanLayer(int in_dim, int out_dim, const SplineSpec& spec, double w_base = 0.0,
           double w_spline = 1.0);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  int degree() const { return edges_.empty() ? 0 : edges_.front().spec.degree; }

  SplineActivation& edge(int q, int p) { return edges_[q * in_dim_ + p]; }
  const SplineActivation& edge(int q, int p) const { return edges_[q * in_dim_ + p]; }
  std::vector<SplineActivation>& edges() { return edges_; }
  const std::vector<SplineActivation>& edges() const { return edges_; }

  /// Moves the grid of every edge fed by input p.
  void set_input_range(int p, double lo, double hi);

  std::size_t parameter_count() const;

  /// Throws ShapeError on inconsistent dimensions or mixed degrees and
  /// InvalidSpecError on malformed edges.
  void validate() const;

 private:
  int in_dim_ = 0;
  int out_dim_ = 0;
  std::vector<SplineActivation> edges_;  // row-major, out x in
};

/// Values kept from a layer evaluation for the backward pass.
struct LayerCache {
  Vec input;
  std::vector<LocalBasis> basis;   // per edge
  std::vector<double> spline_sum;  // sum_i c_i B_i(x_p), per edge
  std::vector<double> edge_value;  // phi_e(x_p), per edge
  std::vector<double> edge_slope;  // phi_e'(x_p), per edge
  std::vector<double> silu_value;  // silu(x_p), per input
};

struct LayerOutput {
  Vec y;
  LayerCache cache;
};

LayerOutput layer_forward(const KanLayer& layer, const Vec& x);

class KanNetwork {
 public:
  KanNetwork() = default;
  explicit KanNetwork(std::vector<KanLayer> layers);

  const std::vector<int>& shape() const { return shape_; }
  int input_dim() const { return shape_.front(); }
  int output_dim() const { return shape_.back(); }

  std::vector<KanLayer>& layers() { return layers_; }
  const std::vector<KanLayer>& layers() const { return layers_; }

  std::size_t edge_count() const;
  std::size_t parameter_count() const;

  /// Flattened parameter set in canonical order.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> theta);

  /// Per-parameter mask, false for parameters of frozen edges.
  std::vector<char> trainable_mask() const;

  Vec forward(const Vec& x) const;
  Vec forward(const Vec& x, std::vector<LayerCache>& caches) const;

  /// d forward / d x, an output_dim x input_dim matrix.
  Mat jacobian(const Vec& x) const;

  void validate() const;

 private:
  void check_input(const Vec& x) const;

  std::vector<int> shape_;
  std::vector<KanLayer> layers_;
};

Vec forward(const KanNetwork& net, const Vec& x);
Mat jacobian(const KanNetwork& net, const Vec& x);

/// Expected parameter count for a dense shape with uniform spline size.
std::size_t parameter_count_for(std::span<const int> shape, const SplineSpec& spec);

/// Reverse pass for one sample. Adds d(objective)/d(theta) to `grad`, given
/// d(objective)/dy at the network output. `edge_extra`, when nonempty, holds
/// one coefficient per edge (global order) and contributes
/// edge_extra[e] * sign(phi_e) to the adjoint of each edge output; this is
/// how magnitude-based regularizers are differentiated.
void backward(const KanNetwork& net, const std::vector<LayerCache>& caches,
              const Vec& output_adjoint, std::span<const double> edge_extra,
              std::span<double> grad);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean squared error over samples and output components, and its gradient
/// in canonical order. Throws InvalidInputError for an empty batch.
LossGradient backprop(const KanNetwork& net, const Dataset& batch);

}  // namespace kanlab
