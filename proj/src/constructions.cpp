#include "lipnet/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lipnet {

namespace {

Vector basis(std::size_t n, std::size_t i) {
  Vector e(n, 0.0);
  e.at(i) = 1.0;
  return e;
}

GradientStepLayer zero_like(const GradientStepLayer& layer, double tau) {
  return {Matrix(layer.rows(), layer.width()), Vector(layer.rows(), 0.0), tau};
}

/// Block-diagonal gradient step from one layer per network, all rescaled to a
/// common step size first.
GradientStepLayer parallel_layer(const std::vector<GradientStepLayer>& parts) {
  double tau = 0.0;
  for (const auto& p : parts) tau = std::max(tau, p.tau);
  std::vector<Matrix> ws;
  Vector b;
  for (const auto& p : parts) {
    GradientStepLayer q;
    if (p.tau == 0.0) {
      q = zero_like(p, tau);
    } else if (p.tau == tau) {
      q = p;
    } else {
      q = homogeneity_transport(p, p.tau / tau);
      q.tau = tau;
    }
    ws.push_back(q.w);
    b.insert(b.end(), q.b.begin(), q.b.end());
  }
  return {block_diag(ws), std::move(b), tau};
}

/// Stacks lifts and runs the (depth-padded) step sequences side by side.
template <typename Net>
std::pair<AffineLift, std::vector<GradientStepLayer>> parallel_body(const std::vector<Net>& nets) {
  if (nets.empty()) throw std::invalid_argument("parallel composition of zero networks");
  const std::size_t d = nets.front().d();
  std::size_t depth = 0;
  for (const auto& n : nets) {
    if (n.d() != d) {
      throw std::invalid_argument("parallel composition: input dimensions differ (" +
                                  std::to_string(d) + " vs " + std::to_string(n.d()) + ")");
    }
    depth = std::max(depth, n.depth());
  }

  std::vector<Vector> rows;
  Vector offset;
  for (const auto& n : nets) {
    for (std::size_t r = 0; r < n.h(); ++r) rows.emplace_back(n.lift.q.row(r).begin(), n.lift.q.row(r).end());
    offset.insert(offset.end(), n.lift.offset.begin(), n.lift.offset.end());
  }
  AffineLift lift{Matrix::from_rows(rows, d), std::move(offset)};

  std::vector<GradientStepLayer> steps;
  for (std::size_t l = 0; l < depth; ++l) {
    std::vector<GradientStepLayer> parts;
    for (const auto& n : nets)
      parts.push_back(l < n.depth() ? n.steps[l] : GradientStepLayer::identity(n.h()));
    steps.push_back(parallel_layer(parts));
  }
  return {std::move(lift), std::move(steps)};
}

NetworkG lattice(const NetworkG& f, const NetworkG& g, bool take_max) {
  if (f.h() != f.head.size() || g.h() != g.head.size())
    throw std::invalid_argument("lattice: head size does not match width");
  auto [lift, steps] = parallel_body(std::vector<NetworkG>{f, g});
  const std::size_t h1 = f.h(), h2 = g.h();

  // Row (−v_f, v_g)/√2 with τ = 2 moves σ(g − f) from the g block to the f block.
  Matrix w(1, h1 + h2);
  for (std::size_t i = 0; i < h1; ++i) w(0, i) = -kInvSqrt2 * f.head[i];
  for (std::size_t i = 0; i < h2; ++i) w(0, h1 + i) = kInvSqrt2 * g.head[i];
  steps.push_back({std::move(w), Vector(1, 0.0), 2.0});

  Vector head(h1 + h2, 0.0);
  if (take_max) {
    std::copy(f.head.begin(), f.head.end(), head.begin());
  } else {
    std::copy(g.head.begin(), g.head.end(), head.begin() + h1);
  }
  return {std::move(lift), std::move(steps), std::move(head)};
}

}  // namespace

GradientStepLayer psd_to_gradient_step(const Matrix& m) {
  const SymEig eig = sym_eig(m);
  const std::size_t h = m.rows();
  for (double e : eig.eigvals) {
    if (e < -1e-10 || e > 1.0 + 1e-10) {
      throw std::invalid_argument("psd_to_gradient_step: eigenvalue " + std::to_string(e) +
                                  " outside [0, 1]");
    }
  }
  Matrix w(2 * h, h);
  for (std::size_t k = 0; k < h; ++k) {
    const double lambda = std::sqrt(std::clamp(1.0 - eig.eigvals[k], 0.0, 1.0));
    for (std::size_t c = 0; c < h; ++c) {
      const double v = lambda * eig.r(k, c) * kInvSqrt2;
      w(k, c) = v;
      w(h + k, c) = -v;
    }
  }
  return {std::move(w), Vector(2 * h, 0.0), 2.0};
}

GradientStepLayer coordinate_maxmin_layer(std::size_t i, std::size_t j, std::size_t h) {
  if (i == j) throw std::invalid_argument("coordinate_maxmin_layer: i and j must differ");
  if (i >= h || j >= h) throw std::invalid_argument("coordinate_maxmin_layer: index out of range");
  Matrix w(1, h);
  w(0, i) = -kInvSqrt2;
  w(0, j) = kInvSqrt2;
  return {std::move(w), Vector(1, 0.0), 2.0};
}

namespace {

NetworkG coords_network(std::size_t d, bool take_max) {
  if (d == 0) throw std::invalid_argument("coordinate network needs d >= 1");
  NetworkG net{{Matrix::identity(d), Vector(d, 0.0)}, {}, basis(d, 0)};
  for (std::size_t j = 1; j < d; ++j)
    net.steps.push_back(take_max ? coordinate_maxmin_layer(0, j, d) : coordinate_maxmin_layer(j, 0, d));
  return net;
}

}  // namespace

NetworkG max_of_coords_network(std::size_t d) { return coords_network(d, true); }
NetworkG min_of_coords_network(std::size_t d) { return coords_network(d, false); }

CompiledG compile_pwa_unbounded(const PwaMaxMin& f) {
  f.check();
  const std::size_t k = f.k(), lmax = f.max_block_size(), h = f.plane_count();

  std::vector<Vector> rows;
  Vector offset;
  std::vector<std::size_t> start;  // first coordinate of each block
  for (const auto& blk : f.blocks) {
    start.push_back(rows.size());
    for (const auto& p : blk) {
      rows.push_back(p.a);
      offset.push_back(p.b);
    }
  }
  NetworkG net{{Matrix::from_rows(rows, f.d), std::move(offset)}, {}, basis(h, 0)};

  // Stage 1: layer t folds plane t of every block still active into the
  // block's leading coordinate (running min). Rows have disjoint supports.
  for (std::size_t t = 1; t < lmax; ++t) {
    std::vector<Vector> wrows;
    for (std::size_t i = 0; i < k; ++i) {
      if (f.blocks[i].size() <= t) continue;
      Vector row(h, 0.0);
      row[start[i] + t] = -kInvSqrt2;  // max lands here
      row[start[i]] = kInvSqrt2;       // min lands here
      wrows.push_back(std::move(row));
    }
    net.steps.push_back({Matrix::from_rows(wrows, h), Vector(wrows.size(), 0.0), 2.0});
  }
  // Stage 2: running max of the block minima in coordinate 0.
  for (std::size_t i = 1; i < k; ++i) net.steps.push_back(coordinate_maxmin_layer(0, start[i], h));

  DepthWidthCert cert{h, net.depth(), (k - 1) + (lmax - 1)};
  return {std::move(net), cert};
}

NetworkGTilde compile_pwa_fixed_width(const PwaMaxMin& f) {
  f.check();
  const std::size_t d = f.d, h = d + 3;
  const auto blocks = tilde_blocks(h);

  auto planes_of = [&](std::size_t i) {
    std::vector<AffinePlane> ps = f.blocks[i];
    if (ps.size() == 1) ps.push_back(ps.front());  // min{p, p} = p
    return ps;
  };
  // Map that keeps coordinates listed in `keep` (dst <- src) and reloads the
  // given planes from the memory tail.
  auto make_map = [&](const std::vector<std::pair<std::size_t, std::size_t>>& keep,
                      const std::vector<std::pair<std::size_t, const AffinePlane*>>& load) {
    BlockAffine map{blocks, Matrix(h, h), Vector(h, 0.0)};
    for (auto [dst, src] : keep) map.a(dst, src) = 1.0;
    for (auto [dst, plane] : load) {
      for (std::size_t c = 0; c < d; ++c) map.a(dst, 3 + c) = plane->a[c];
      map.offset[dst] = plane->b;
    }
    for (std::size_t c = 0; c < d; ++c) map.a(3 + c, 3 + c) = 1.0;
    return map;
  };

  NetworkGTilde net;
  const auto first = planes_of(0);
  net.lift.q = Matrix(h, d);
  net.lift.offset = Vector(h, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    net.lift.q(0, c) = first[0].a[c];
    net.lift.q(1, c) = first[1].a[c];
    net.lift.q(3 + c, c) = 1.0;
  }
  net.lift.offset[0] = first[0].b;
  net.lift.offset[1] = first[1].b;

  const TildeELayer maxmin = TildeELayer::identity_tail(d);
  auto push = [&](BlockAffine map) {
    net.maps.push_back(std::move(map));
    net.layers.push_back(maxmin);
  };

  for (std::size_t i = 0; i < f.k(); ++i) {
    const auto ps = planes_of(i);
    if (i == 0) {
      net.layers.push_back(maxmin);
    } else {
      if (i >= 2) {
        // Fold the previous block minimum into the running max: (f_prev, R) -> MaxMin.
        push(make_map({{0, 1}, {1, 2}}, {}));
      }
      // Load the first two planes of block i; park the newest running value in coordinate 2.
      const std::size_t carried = i == 1 ? 1 : 0;
      push(make_map({{2, carried}}, {{0, &ps[0]}, {1, &ps[1]}}));
    }
    // Min chain: the running min sits in coordinate 1 after every MaxMin.
    for (std::size_t j = 2; j < ps.size(); ++j) push(make_map({{1, 1}, {2, 2}}, {{0, &ps[j]}}));
  }

  net.head = Vector(h, 0.0);
  if (f.k() == 1) {
    net.head[1] = 1.0;
  } else {
    push(make_map({{0, 1}, {1, 2}}, {}));
    net.head[0] = 1.0;
  }
  return net;
}

std::pair<GradientStepLayer, GradientStepLayer> equalize_steps(const GradientStepLayer& a,
                                                               const GradientStepLayer& b) {
  if (a.tau == b.tau) return {a, b};
  const GradientStepLayer combined = parallel_layer({a, b});
  auto split = [&](const GradientStepLayer& src, std::size_t r0) {
    GradientStepLayer out{combined.w.sub(r0, src.rows(), r0 == 0 ? 0 : a.width(), src.width()),
                          Vector(combined.b.begin() + r0, combined.b.begin() + r0 + src.rows()),
                          combined.tau};
    return out;
  };
  return {split(a, 0), split(b, a.rows())};
}

NetworkG pad_depth(const NetworkG& net, std::size_t depth) {
  NetworkG out = net;
  while (out.steps.size() < depth) out.steps.push_back(GradientStepLayer::identity(net.h()));
  return out;
}

NetworkG lattice_max(const NetworkG& f, const NetworkG& g) { return lattice(f, g, true); }
NetworkG lattice_min(const NetworkG& f, const NetworkG& g) { return lattice(f, g, false); }

NetworkG separating_affine(std::span<const double> x, std::span<const double> y, double a,
                           double b) {
  if (x.size() != y.size()) throw std::invalid_argument("separating_affine: dimension mismatch");
  Vector diff(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - y[i];
  const double dist = norm2(diff);
  if (dist == 0.0) throw std::invalid_argument("separating_affine: x and y coincide");
  if (std::abs(a - b) > dist * (1.0 + 1e-12)) {
    throw std::invalid_argument("separating_affine: |a - b| = " + std::to_string(std::abs(a - b)) +
                                " exceeds |x - y| = " + std::to_string(dist) +
                                "; no 1-Lipschitz function separates these values");
  }
  const double lambda = std::clamp((a - b) / dist, -1.0, 1.0);
  Matrix q(1, x.size());
  for (std::size_t i = 0; i < x.size(); ++i) q(0, i) = lambda * diff[i] / dist;
  const double w = a - dot(q.row(0), x);
  return {{std::move(q), Vector{w}}, {}, Vector{1.0}};
}

NetworkGc stack_multivalued(const std::vector<NetworkG>& nets) {
  auto [lift, steps] = parallel_body(nets);
  Matrix p(nets.size(), lift.out_dim());
  std::size_t c0 = 0;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    for (std::size_t c = 0; c < nets[i].h(); ++c) p(i, c0 + c) = nets[i].head.at(c);
    c0 += nets[i].h();
  }
  return {std::move(lift), std::move(steps), std::move(p)};
}

std::vector<GradientStepLayer> groupsort_layers(std::size_t k) {
  std::vector<GradientStepLayer> layers;
  if (k < 2) return layers;
  for (std::size_t round = 0; round < k; ++round)
    for (std::size_t i = round % 2; i + 1 < k; i += 2) layers.push_back(coordinate_maxmin_layer(i, i + 1, k));
  return layers;
}

GradientStepLayer tilde_e_embed(const TildeELayer& layer) {
  const auto& tail = layer.tail;
  const std::size_t h = tail.width(), k = tail.rows();
  const double gamma = std::sqrt(std::clamp(tail.tau, 0.0, 2.0) / 2.0);
  Matrix w(k + 3, h + 3);
  Vector b(k + 3, 0.0);
  w(0, 0) = -kInvSqrt2;
  w(0, 1) = kInvSqrt2;
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < h; ++c) w(3 + r, 3 + c) = gamma * tail.w(r, c);
    b[3 + r] = gamma * tail.b[r];
  }
  return {std::move(w), std::move(b), 2.0};
}

}  // namespace lipnet
