#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "lipnet/layers.hpp"
#include "lipnet/pwa.hpp"

namespace lipnet {

/// Gradient-step layer equal to x ↦ Mx for symmetric M with spectrum in [0, 1].
///
/// With M − I = −RᵀΛ²R and V = ΛR, the layer is W = [V/√2; −V/√2], b = 0,
/// τ = 2. Throws std::invalid_argument naming the first eigenvalue outside
/// [−1e-10, 1 + 1e-10].
GradientStepLayer psd_to_gradient_step(const Matrix& m);

/// Single-row layer with −1/√2 at column i and +1/√2 at column j, τ = 2, b = 0.
/// Writes max{x_i, x_j} to position i and min{x_i, x_j} to position j.
GradientStepLayer coordinate_maxmin_layer(std::size_t i, std::size_t j, std::size_t h);

NetworkG max_of_coords_network(std::size_t d);
NetworkG min_of_coords_network(std::size_t d);

struct DepthWidthCert {
  std::size_t width = 0;
  std::size_t depth = 0;
  std::size_t depth_bound = 0;  // (k − 1) + (max l_i − 1)

  bool holds() const { return depth <= depth_bound; }
};

struct CompiledG {
  NetworkG net;
  DepthWidthCert cert;
};

/// Exact unbounded-width network for a max-min function. Width Σ l_i; one
/// lift row per plane; per-block min chains run in parallel, then the block
/// minima are folded into the first block's leading coordinate.
CompiledG compile_pwa_unbounded(const PwaMaxMin& f);

/// Exact fixed-width (h = d + 3) network for a max-min function.
///
/// Coordinates 0 and 1 hold the MaxMin pair, coordinate 2 the running maximum
/// over finished blocks, and the tail a copy of x used to reload planes.
NetworkGTilde compile_pwa_fixed_width(const PwaMaxMin& f);

/// Rescales the smaller-step layer so both share max(τ_a, τ_b). A layer with
/// τ = 0 becomes an all-zero layer at the common step.
std::pair<GradientStepLayer, GradientStepLayer> equalize_steps(const GradientStepLayer& a,
                                                               const GradientStepLayer& b);

/// Pads with identity layers (W = 0, b = 0, τ = 2) up to the given depth.
NetworkG pad_depth(const NetworkG& net, std::size_t depth);

NetworkG lattice_max(const NetworkG& f, const NetworkG& g);
NetworkG lattice_min(const NetworkG& f, const NetworkG& g);

/// Depth-0, width-1 network g with g(x) = a and g(y) = b.
/// Throws if x == y or |a − b| > ‖x − y‖₂.
NetworkG separating_affine(std::span<const double> x, std::span<const double> y, double a,
                           double b);

/// Parallel stack of scalar networks; component i equals nets[i].
NetworkGc stack_multivalued(const std::vector<NetworkG>& nets);

/// Odd-even transposition schedule of pairwise MaxMin layers sorting ℝᵏ in
/// descending order. Exactly k(k − 1)/2 layers.
std::vector<GradientStepLayer> groupsort_layers(std::size_t k);

/// The (h + 3)-wide gradient step (τ = 2) that realizes a MaxMin-plus-tail layer.
GradientStepLayer tilde_e_embed(const TildeELayer& layer);

}  // namespace lipnet
