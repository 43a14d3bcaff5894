#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "lipnet/layers.hpp"
#include "lipnet/pwa.hpp"
#include "lipnet/report.hpp"

namespace lipnet {

/// Axis-aligned box [lo, hi]^d.
struct Box {
  double lo = -10.0;
  double hi = 10.0;
};

using VectorFn = std::function<Vector(std::span<const double>)>;
using ScalarFn = std::function<double(std::span<const double>)>;

/// Fraction of pairs drawn as small perturbations (offset norm kLocalOffset).
inline constexpr double kLocalPairFraction = 0.2;
inline constexpr double kLocalOffset = 1e-3;
inline constexpr double kMinPairDistance = 1e-9;

/// Deterministic pair stream: uniform pairs in the box, every fifth pair a
/// local pair y = x + kLocalOffset·u with u uniform on the sphere.
class PairSampler {
 public:
  PairSampler(std::size_t d, Box box, std::uint64_t seed);
  void next(Vector& x, Vector& y);
  /// Uniform point in the box.
  Vector point();

 private:
  std::size_t d_;
  Box box_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unif_;
  std::normal_distribution<double> normal_;
  std::size_t count_ = 0;
};

/// Callable for the network's forward map (scalar outputs become length 1).
VectorFn as_function(const AnyNetwork& net);

/// max |f(y) − f(x)|₂ / ‖y − x‖₂ over sampled pairs; close pairs are skipped.
double empirical_lipschitz(const VectorFn& f, std::size_t d, Box box, std::size_t n_pairs,
                           std::uint64_t seed);
double empirical_lipschitz(const AnyNetwork& net, Box box, std::size_t n_pairs, std::uint64_t seed);

/// ℓ2 norm of the central-difference gradient.
double grad_norm_fd(const ScalarFn& f, std::span<const double> x, double eps = 1e-6);
double grad_norm_fd(const AnyNetwork& net, std::span<const double> x, double eps = 1e-6);

/// max |net(p) − oracle(p)| over the points. Scalar networks only.
double equivalence_check(const AnyNetwork& net, const PwaMaxMin& oracle,
                         const std::vector<Vector>& points);

struct BlockQuotient {
  std::size_t stage = 0;  // index into forward_trace
  std::size_t block = 0;
  double quotient = 0.0;
};

struct BlockwiseReport {
  std::vector<BlockQuotient> entries;
  double max_quotient = 0.0;
  bool passed = true;
};

/// Empirical Lipschitz quotient of every block of every hidden state as a
/// function of the input.
BlockwiseReport blockwise_lipschitz_check(const NetworkGTilde& net, Box box, std::size_t n_pairs,
                                          std::uint64_t seed, double tol = 1e-7);

struct VerifyOptions {
  Box box;
  std::size_t pairs = 100000;
  std::uint64_t seed = 42;
  double tol = kTrainedTol;
  std::size_t oracle_points = 1000;
};

inline constexpr double kQuotientSlack = 1e-7;
inline constexpr double kOracleTol = 1e-9;

/// Constraint audit plus sampled quotient, plus oracle deviation when given.
VerificationReport verify_network(const AnyNetwork& net, const VerifyOptions& opts,
                                  const PwaMaxMin* oracle = nullptr);

/// No violations, quotient ≤ 1 + kQuotientSlack, oracle deviation ≤ kOracleTol.
bool report_passes(const VerificationReport& report);

}  // namespace lipnet
