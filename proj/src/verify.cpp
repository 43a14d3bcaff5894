#include "lipnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lipnet {

PairSampler::PairSampler(std::size_t d, Box box, std::uint64_t seed)
    : d_(d), box_(box), rng_(seed), unif_(box.lo, box.hi), normal_(0.0, 1.0) {
  if (d == 0) throw std::invalid_argument("PairSampler: dimension must be >= 1");
  if (!std::isfinite(box.lo) || !std::isfinite(box.hi) || !(box.lo < box.hi))
    throw std::invalid_argument("degenerate sampling box [" + std::to_string(box.lo) + ", " +
                                std::to_string(box.hi) + "]");
}

Vector PairSampler::point() {
  Vector x(d_);
  for (auto& v : x) v = unif_(rng_);
  return x;
}

void PairSampler::next(Vector& x, Vector& y) {
  const bool local = (count_++ % 5) == 4;
  x = point();
  if (!local) {
    y = point();
    return;
  }
  Vector u(d_);
  double n = 0.0;
  while (n == 0.0) {
    for (auto& v : u) v = normal_(rng_);
    n = norm2(u);
  }
  y = x;
  for (std::size_t i = 0; i < d_; ++i) y[i] += kLocalOffset * u[i] / n;
}

VectorFn as_function(const AnyNetwork& net) {
  return std::visit(
      [](const auto& n) -> VectorFn {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NetworkG>) {
          return [&n](std::span<const double> x) { return Vector{forward_g(n, x)}; };
        } else if constexpr (std::is_same_v<T, NetworkGTilde>) {
          return [&n](std::span<const double> x) { return Vector{forward_gtilde(n, x)}; };
        } else {
          return [&n](std::span<const double> x) { return forward_gc(n, x); };
        }
      },
      net);
}

namespace {

std::size_t input_dim(const AnyNetwork& net) {
  return std::visit([](const auto& n) { return n.d(); }, net);
}

double distance(std::span<const double> a, std::span<const double> b) {
  Vector d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm2(d);
}

}  // namespace

double empirical_lipschitz(const VectorFn& f, std::size_t d, Box box, std::size_t n_pairs,
                           std::uint64_t seed) {
  if (n_pairs == 0) throw std::invalid_argument("empirical_lipschitz: n_pairs must be >= 1");
  PairSampler sampler(d, box, seed);
  Vector x, y;
  double best = 0.0;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    sampler.next(x, y);
    const double dx = distance(x, y);
    if (dx < kMinPairDistance) continue;
    best = std::max(best, distance(f(x), f(y)) / dx);
  }
  return best;
}

double empirical_lipschitz(const AnyNetwork& net, Box box, std::size_t n_pairs, std::uint64_t seed) {
  return empirical_lipschitz(as_function(net), input_dim(net), box, n_pairs, seed);
}

double grad_norm_fd(const ScalarFn& f, std::span<const double> x, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_norm_fd: eps must be positive");
  Vector p(x.begin(), x.end());
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double xi = p[i];
    p[i] = xi + eps;
    const double fp = f(p);
    p[i] = xi - eps;
    const double fm = f(p);
    p[i] = xi;
    const double g = (fp - fm) / (2.0 * eps);
    sq += g * g;
  }
  return std::sqrt(sq);
}

double grad_norm_fd(const AnyNetwork& net, std::span<const double> x, double eps) {
  if (std::holds_alternative<NetworkGc>(net)) {
    throw std::invalid_argument("grad_norm_fd: scalar networks only");
  }
  const VectorFn f = as_function(net);
  return grad_norm_fd([&f](std::span<const double> z) { return f(z)[0]; }, x, eps);
}

double equivalence_check(const AnyNetwork& net, const PwaMaxMin& oracle,
                         const std::vector<Vector>& points) {
  if (input_dim(net) != oracle.d) {
    throw std::invalid_argument("equivalence_check: network has d = " + std::to_string(input_dim(net)) +
                                ", oracle has d = " + std::to_string(oracle.d));
  }
  const VectorFn f = as_function(net);
  double worst = 0.0;
  for (const auto& p : points) {
    const Vector y = f(p);
    if (y.size() != 1) throw std::invalid_argument("equivalence_check: network output is not scalar");
    worst = std::max(worst, std::abs(y[0] - pwa_eval(oracle, p)));
  }
  return worst;
}

BlockwiseReport blockwise_lipschitz_check(const NetworkGTilde& net, Box box, std::size_t n_pairs,
                                          std::uint64_t seed, double tol) {
  const auto blocks = tilde_blocks(net.h());
  const std::size_t stages = 1 + net.layers.size() + net.maps.size();
  std::vector<std::vector<double>> q(stages, std::vector<double>(blocks.size(), 0.0));

  PairSampler sampler(net.d(), box, seed);
  Vector x, y;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    sampler.next(x, y);
    const double dx = distance(x, y);
    if (dx < kMinPairDistance) continue;
    const auto tx = forward_trace(net, x), ty = forward_trace(net, y);
    for (std::size_t s = 0; s < stages; ++s) {
      std::size_t r0 = 0;
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::span<const double> a(tx[s].data() + r0, blocks[b]), c(ty[s].data() + r0, blocks[b]);
        q[s][b] = std::max(q[s][b], distance(a, c) / dx);
        r0 += blocks[b];
      }
    }
  }

  BlockwiseReport rep;
  for (std::size_t s = 0; s < stages; ++s) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      rep.entries.push_back({s, b, q[s][b]});
      rep.max_quotient = std::max(rep.max_quotient, q[s][b]);
    }
  }
  rep.passed = rep.max_quotient <= 1.0 + tol;
  return rep;
}

VerificationReport verify_network(const AnyNetwork& net, const VerifyOptions& opts,
                                  const PwaMaxMin* oracle) {
  VerificationReport rep = validate(net, opts.tol);
  rep.seed = opts.seed;
  rep.samples_used = opts.pairs;
  // A malformed network cannot be evaluated safely.
  const bool shape_ok = std::none_of(rep.constraint_violations.begin(), rep.constraint_violations.end(),
                                     [](const ConstraintViolation& v) {
                                       return v.kind.rfind("shape:", 0) == 0 || v.kind == "non_finite";
                                     });
  if (!shape_ok) {
    rep.samples_used = 0;
    return rep;
  }
  rep.max_lipschitz_quotient = empirical_lipschitz(net, opts.box, opts.pairs, opts.seed);
  if (oracle) {
    PairSampler sampler(input_dim(net), opts.box, opts.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<Vector> points;
    for (std::size_t i = 0; i < opts.oracle_points; ++i) points.push_back(sampler.point());
    rep.max_oracle_deviation = equivalence_check(net, *oracle, points);
  }
  return rep;
}

bool report_passes(const VerificationReport& report) {
  if (!report.constraints_ok()) return false;
  if (report.max_lipschitz_quotient > 1.0 + kQuotientSlack) return false;
  if (report.max_oracle_deviation && *report.max_oracle_deviation > kOracleTol) return false;
  return true;
}

}  // namespace lipnet
