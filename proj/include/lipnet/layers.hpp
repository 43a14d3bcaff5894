#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lipnet/linalg.hpp"
#include "lipnet/report.hpp"

namespace lipnet {

/// Nearest double to 1/√2; MaxMin rows use exactly this value.
inline constexpr double kInvSqrt2 = 0.70710678118654752440;

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
Vector relu(std::span<const double> x);

/// Residual layer x ↦ x − τ·Wᵀ·relu(W·x + b), W of shape k×h.
///
/// Canonical (feasible) form: 0 ≤ τ ≤ 2 and ‖W‖₂ ≤ 1. Any k ≥ 0 is allowed;
/// memory is O(k·h).
struct GradientStepLayer {
  Matrix w;
  Vector b;
  double tau = 2.0;

  std::size_t width() const { return w.cols(); }
  std::size_t rows() const { return w.rows(); }

  /// W = 0 (one zero row), b = 0, τ = 2.
  static GradientStepLayer identity(std::size_t width);

  /// Accepts the general nonexpansive form 0 ≤ τ ≤ 2/‖W‖₂² and rescales it to
  /// the canonical form with the homogeneity transport. Throws if τ is out of
  /// range for the given W.
  static GradientStepLayer from_general(Matrix w, Vector b, double tau);

  bool operator==(const GradientStepLayer&) const = default;
};

Vector gradient_step_forward(const GradientStepLayer& layer, std::span<const double> x);

/// (W, b, τ) ↦ (√γ·W, √γ·b, τ/γ) for γ > 0; the forward map is unchanged.
GradientStepLayer homogeneity_transport(const GradientStepLayer& layer, double gamma);

/// MaxMin on coordinates 0 and 1, pass-through on coordinate 2, and a gradient
/// step on the remaining coordinates.
struct TildeELayer {
  GradientStepLayer tail;

  std::size_t width() const { return tail.width() + 3; }
  static TildeELayer identity_tail(std::size_t tail_width);

  bool operator==(const TildeELayer&) const = default;
};

Vector tilde_e_forward(const TildeELayer& layer, std::span<const double> x);

/// Unconstrained affine map x ↦ Q̂x + q̂.
struct AffineLift {
  Matrix q;
  Vector offset;

  std::size_t in_dim() const { return q.cols(); }
  std::size_t out_dim() const { return q.rows(); }
  bool operator==(const AffineLift&) const = default;
};

Vector affine_forward(const AffineLift& lift, std::span<const double> x);

/// Row-block sizes (1, 1, 1, h − 3) used by the fixed-width architecture.
std::vector<std::size_t> tilde_blocks(std::size_t h);

/// Affine lift whose row blocks (1, 1, 1, h − 3) each have spectral norm ≤ 1.
struct BlockLift {
  Matrix q;
  Vector offset;

  std::size_t in_dim() const { return q.cols(); }
  std::size_t out_dim() const { return q.rows(); }
  bool operator==(const BlockLift&) const = default;
};

Vector affine_forward(const BlockLift& lift, std::span<const double> x);

/// Square affine map u ↦ Âu + â with block rows satisfying Σ_j ‖A_ij‖₂ ≤ 1.
struct BlockAffine {
  std::vector<std::size_t> blocks;
  Matrix a;
  Vector offset;

  std::size_t width() const { return a.rows(); }
  /// Identity matrix, zero offset.
  static BlockAffine identity(std::vector<std::size_t> blocks);
  bool operator==(const BlockAffine&) const = default;
};

Vector affine_forward(const BlockAffine& map, std::span<const double> u);

/// Spectral norms ‖A_ij‖₂ of every block, indexed [i][j]. Empty blocks give 0.
std::vector<std::vector<double>> block_norms(const Matrix& a, std::span<const std::size_t> blocks);

/// Unbounded-width network v ∘ Φ_L ∘ … ∘ Φ_1 ∘ Q with ‖v‖₂ = 1.
struct NetworkG {
  AffineLift lift;
  std::vector<GradientStepLayer> steps;
  Vector head;

  std::size_t d() const { return lift.in_dim(); }
  std::size_t h() const { return lift.out_dim(); }
  std::size_t depth() const { return steps.size(); }
  bool operator==(const NetworkG&) const = default;
};

/// Fixed-width network v ∘ Φ_L ∘ A_{L−1} ∘ … ∘ A_1 ∘ Φ_1 ∘ Q with ‖v‖₁ ≤ 1.
/// maps.size() == layers.size() − 1 (both empty for a depth-0 network).
struct NetworkGTilde {
  BlockLift lift;
  std::vector<TildeELayer> layers;
  std::vector<BlockAffine> maps;
  Vector head;

  std::size_t d() const { return lift.in_dim(); }
  std::size_t h() const { return lift.out_dim(); }
  std::size_t depth() const { return layers.size(); }
  bool operator==(const NetworkGTilde&) const = default;
};

/// Vector-valued network P ∘ Φ_L ∘ … ∘ Φ_1 ∘ Q with every row of P of norm ≤ 1.
struct NetworkGc {
  AffineLift lift;
  std::vector<GradientStepLayer> steps;
  Matrix head;

  std::size_t d() const { return lift.in_dim(); }
  std::size_t h() const { return lift.out_dim(); }
  std::size_t c() const { return head.rows(); }
  std::size_t depth() const { return steps.size(); }
  bool operator==(const NetworkGc&) const = default;
};

using AnyNetwork = std::variant<NetworkG, NetworkGTilde, NetworkGc>;

const char* architecture_name(const AnyNetwork& net);

double forward_g(const NetworkG& net, std::span<const double> x);
double forward_gtilde(const NetworkGTilde& net, std::span<const double> x);
Vector forward_gc(const NetworkGc& net, std::span<const double> x);

/// Hidden state after the lift and after every subsequent layer/map, in order.
/// For G: lift, Φ_1, …, Φ_L. For G̃: lift, Φ_1, A_1, Φ_2, …, Φ_L.
std::vector<Vector> forward_trace(const NetworkG& net, std::span<const double> x);
std::vector<Vector> forward_trace(const NetworkGTilde& net, std::span<const double> x);

/// Feasibility tolerances.
inline constexpr double kConstructedTol = 1e-9;
inline constexpr double kTrainedTol = 1e-6;

/// Audits every constraint of the architecture. The report lists each violated
/// invariant with the amount by which it is exceeded; it is empty iff all
/// constraints hold within tol.
VerificationReport validate(const NetworkG& net, double tol = kConstructedTol);
VerificationReport validate(const NetworkGTilde& net, double tol = kConstructedTol);
VerificationReport validate(const NetworkGc& net, double tol = kConstructedTol);
VerificationReport validate(const AnyNetwork& net, double tol = kConstructedTol);

/// Constraint audit of a single layer; violations are appended with the given location.
void audit_layer(const GradientStepLayer& layer, std::size_t expected_width,
                 const std::string& location, double tol,
                 std::vector<ConstraintViolation>& out);

}  // namespace lipnet
