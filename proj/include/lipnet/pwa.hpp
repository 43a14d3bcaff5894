#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lipnet/linalg.hpp"

namespace lipnet {

struct AffinePlane {
  Vector a;
  double b = 0.0;
  bool operator==(const AffinePlane&) const = default;
};

/// f(x) = max_i min_j (a_ijᵀx + b_ij), the max-of-mins form of a continuous
/// piecewise-affine function. Every ‖a_ij‖₂ ≤ 1.
struct PwaMaxMin {
  std::size_t d = 0;
  std::vector<std::vector<AffinePlane>> blocks;

  std::size_t k() const { return blocks.size(); }
  std::size_t max_block_size() const;
  std::size_t plane_count() const;

  /// Throws std::invalid_argument naming the first offending block/plane.
  void check() const;

  bool operator==(const PwaMaxMin&) const = default;
};

inline constexpr double kPlaneNormSlack = 1e-12;

double pwa_eval(const PwaMaxMin& f, std::span<const double> x);

/// Continuous piecewise-linear function on ℝ: pieces[i] is active on
/// [breakpoints[i-1], breakpoints[i]] with the two end regions unbounded.
struct Pwl1d {
  struct Piece {
    double slope = 0.0;
    double intercept = 0.0;
    double operator()(double x) const { return slope * x + intercept; }
  };
  std::vector<double> breakpoints;  // strictly increasing
  std::vector<Piece> pieces;        // breakpoints.size() + 1 entries

  double operator()(double x) const;
};

/// Lattice (max-min) form of a continuous 1-Lipschitz piecewise-linear function.
/// Block i collects every piece that dominates piece i on region i.
/// Throws if the pieces are discontinuous or a slope leaves [−1, 1].
PwaMaxMin pwl_to_maxmin_1d(const Pwl1d& f);

/// Piecewise-linear interpolant through (x, y) samples, extended linearly past
/// the end samples. Throws on duplicate x or on data violating |Δy| ≤ |Δx|.
Pwl1d interpolant_1d(std::vector<std::pair<double, double>> samples);

/// interpolant_1d followed by pwl_to_maxmin_1d.
PwaMaxMin interpolate_1d(std::vector<std::pair<double, double>> samples);

}  // namespace lipnet
