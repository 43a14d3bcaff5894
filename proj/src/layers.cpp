#include "lipnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lipnet {

const char* to_string(Guarantee g) {
  switch (g) {
    case Guarantee::kNone: return "none";
    case Guarantee::kConstructive: return "constructive";
    case Guarantee::kEmpiricalOnly: return "empirical-only";
  }
  return "none";
}

Vector relu(std::span<const double> x) {
  Vector out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](double v) { return relu(v); });
  return out;
}

namespace {

void require_dim(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw std::invalid_argument(std::string(what) + ": expected input of dimension " +
                                std::to_string(expected) + ", got " + std::to_string(got));
  }
}

}  // namespace

GradientStepLayer GradientStepLayer::identity(std::size_t width) {
  return {Matrix(1, width), Vector(1, 0.0), 2.0};
}

GradientStepLayer GradientStepLayer::from_general(Matrix w, Vector b, double tau) {
  if (b.size() != w.rows()) throw std::invalid_argument("from_general: bias size != row count");
  const double s = w.empty() ? 0.0 : spectral_norm(w);
  if (!std::isfinite(tau) || tau < 0.0 || tau * s * s > 2.0 * (1.0 + 1e-12)) {
    throw std::invalid_argument("from_general: step size " + std::to_string(tau) +
                                " outside [0, 2/|W|^2] for |W| = " + std::to_string(s));
  }
  GradientStepLayer layer{std::move(w), std::move(b), tau};
  if (tau == 0.0 || s == 0.0) {
    // Identity map either way.
    std::fill(layer.w.data().begin(), layer.w.data().end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
    layer.tau = std::clamp(tau, 0.0, 2.0);
    return layer;
  }
  if (tau <= 2.0 && s <= 1.0) return layer;
  // Any γ in [τ/2, 1/‖W‖²] lands in the canonical set.
  const double gamma = tau > 2.0 ? tau / 2.0 : 1.0 / (s * s);
  GradientStepLayer out = homogeneity_transport(layer, gamma);
  out.tau = std::min(out.tau, 2.0);
  return out;
}

namespace {

/// Row r is (−1/√2)·e_i + (1/√2)·e_j with zero bias; returns (i, j).
bool maxmin_row(const GradientStepLayer& layer, std::size_t r, std::size_t& i, std::size_t& j) {
  if (layer.b[r] != 0.0) return false;
  std::size_t found = 0;
  for (std::size_t c = 0; c < layer.width(); ++c) {
    const double v = layer.w(r, c);
    if (v == 0.0) continue;
    if (++found > 2) return false;
    if (v == -kInvSqrt2) {
      i = c;
    } else if (v == kInvSqrt2) {
      j = c;
    } else {
      return false;
    }
  }
  return found == 2 && i != j;
}

}  // namespace

Vector gradient_step_forward(const GradientStepLayer& layer, std::span<const double> x) {
  require_dim(layer.width(), x.size(), "gradient_step_forward");
  const std::size_t k = layer.rows(), h = layer.width();
  Vector y(x.begin(), x.end());

  // With τ = 2, a MaxMin row whose columns no other row touches acts as
  // (x_i, x_j) ↦ (max, min); it is evaluated in closed form so that the result
  // is an exact permutation of the inputs.
  std::vector<char> closed(k, 0);
  if (layer.tau == 2.0) {
    std::vector<std::size_t> uses(h, 0);
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < h; ++c) uses[c] += layer.w(r, c) != 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      std::size_t i = 0, j = 0;
      if (maxmin_row(layer, r, i, j) && uses[i] == 1 && uses[j] == 1) {
        closed[r] = 1;
        y[i] = std::max(x[i], x[j]);
        y[j] = std::min(x[i], x[j]);
      }
    }
  }

  Vector g(h, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    if (closed[r]) continue;
    const auto row = layer.w.row(r);
    const double act = relu(dot(row, x) + layer.b[r]);
    if (act == 0.0) continue;
    for (std::size_t c = 0; c < h; ++c) g[c] += row[c] * act;
  }
  for (std::size_t c = 0; c < h; ++c) y[c] -= layer.tau * g[c];
  return y;
}

GradientStepLayer homogeneity_transport(const GradientStepLayer& layer, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("homogeneity_transport: gamma must be positive");
  const double root = std::sqrt(gamma);
  GradientStepLayer out{layer.w.scaled(root), layer.b, layer.tau / gamma};
  for (double& v : out.b) v *= root;
  return out;
}

TildeELayer TildeELayer::identity_tail(std::size_t tail_width) {
  return {GradientStepLayer{Matrix(tail_width, tail_width), Vector(tail_width, 0.0), 2.0}};
}

Vector tilde_e_forward(const TildeELayer& layer, std::span<const double> x) {
  require_dim(layer.width(), x.size(), "tilde_e_forward");
  Vector y(x.size());
  y[0] = std::max(x[0], x[1]);
  y[1] = std::min(x[0], x[1]);
  y[2] = x[2];
  const Vector tail = gradient_step_forward(layer.tail, x.subspan(3));
  std::copy(tail.begin(), tail.end(), y.begin() + 3);
  return y;
}

namespace {

Vector affine(const Matrix& q, const Vector& offset, std::span<const double> x) {
  Vector y = matvec(q, x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += offset[i];
  return y;
}

}  // namespace

Vector affine_forward(const AffineLift& lift, std::span<const double> x) {
  require_dim(lift.in_dim(), x.size(), "lift");
  return affine(lift.q, lift.offset, x);
}

Vector affine_forward(const BlockLift& lift, std::span<const double> x) {
  require_dim(lift.in_dim(), x.size(), "block lift");
  return affine(lift.q, lift.offset, x);
}

Vector affine_forward(const BlockAffine& map, std::span<const double> u) {
  require_dim(map.a.cols(), u.size(), "block affine");
  return affine(map.a, map.offset, u);
}

std::vector<std::size_t> tilde_blocks(std::size_t h) {
  if (h < 3) throw std::invalid_argument("fixed-width architecture needs h >= 3");
  return {1, 1, 1, h - 3};
}

BlockAffine BlockAffine::identity(std::vector<std::size_t> blocks) {
  const std::size_t n = std::accumulate(blocks.begin(), blocks.end(), std::size_t{0});
  return {std::move(blocks), Matrix::identity(n), Vector(n, 0.0)};
}

std::vector<std::vector<double>> block_norms(const Matrix& a, std::span<const std::size_t> blocks) {
  const std::size_t n = std::accumulate(blocks.begin(), blocks.end(), std::size_t{0});
  if (n != a.rows() || n != a.cols()) {
    throw std::invalid_argument("block_norms: block sizes do not match the matrix shape");
  }
  std::vector<std::vector<double>> out(blocks.size(), std::vector<double>(blocks.size(), 0.0));
  std::size_t r0 = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    std::size_t c0 = 0;
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      if (blocks[i] > 0 && blocks[j] > 0) {
        const Matrix blk = a.sub(r0, blocks[i], c0, blocks[j]);
        out[i][j] = (blocks[i] == 1 || blocks[j] == 1) ? norm2(blk.data()) : spectral_norm(blk);
      }
      c0 += blocks[j];
    }
    r0 += blocks[i];
  }
  return out;
}

const char* architecture_name(const AnyNetwork& net) {
  switch (net.index()) {
    case 0: return "G";
    case 1: return "GTilde";
    default: return "Gc";
  }
}

std::vector<Vector> forward_trace(const NetworkG& net, std::span<const double> x) {
  std::vector<Vector> states;
  states.reserve(net.steps.size() + 1);
  states.push_back(affine_forward(net.lift, x));
  for (const auto& step : net.steps) states.push_back(gradient_step_forward(step, states.back()));
  return states;
}

std::vector<Vector> forward_trace(const NetworkGTilde& net, std::span<const double> x) {
  std::vector<Vector> states;
  states.reserve(2 * net.layers.size() + 1);
  states.push_back(affine_forward(net.lift, x));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (l > 0) states.push_back(affine_forward(net.maps.at(l - 1), states.back()));
    states.push_back(tilde_e_forward(net.layers[l], states.back()));
  }
  return states;
}

double forward_g(const NetworkG& net, std::span<const double> x) {
  Vector z = affine_forward(net.lift, x);
  for (const auto& step : net.steps) z = gradient_step_forward(step, z);
  return dot(net.head, z);
}

double forward_gtilde(const NetworkGTilde& net, std::span<const double> x) {
  if (net.maps.size() + (net.layers.empty() ? 0 : 1) != net.layers.size()) {
    throw std::invalid_argument("forward_gtilde: expected one block-affine map between layers");
  }
  Vector z = affine_forward(net.lift, x);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (l > 0) z = affine_forward(net.maps[l - 1], z);
    z = tilde_e_forward(net.layers[l], z);
  }
  return dot(net.head, z);
}

Vector forward_gc(const NetworkGc& net, std::span<const double> x) {
  Vector z = affine_forward(net.lift, x);
  for (const auto& step : net.steps) z = gradient_step_forward(step, z);
  return matvec(net.head, z);
}

// ---------------------------------------------------------------------------
// Constraint audit

namespace {

void check_shape(std::size_t expected, std::size_t got, const std::string& location,
                 const std::string& what, std::vector<ConstraintViolation>& out) {
  if (expected != got) {
    out.push_back({location, "shape:" + what,
                   std::abs(static_cast<double>(expected) - static_cast<double>(got))});
  }
}

void check_finite(std::span<const double> v, const std::string& location,
                  std::vector<ConstraintViolation>& out) {
  const auto bad = std::count_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); });
  if (bad > 0) out.push_back({location, "non_finite", static_cast<double>(bad)});
}

void check_upper(double value, double bound, double tol, const std::string& location,
                 const std::string& kind, std::vector<ConstraintViolation>& out) {
  if (value > bound + tol) out.push_back({location, kind, value - bound});
}

bool finite_matrix(const Matrix& m) { return all_finite(m.data()); }

void audit_affine(const Matrix& q, const Vector& offset, std::size_t d, std::size_t h,
                  const std::string& location, std::vector<ConstraintViolation>& out) {
  check_shape(h, q.rows(), location, "rows", out);
  check_shape(d, q.cols(), location, "cols", out);
  check_shape(h, offset.size(), location, "offset", out);
  check_finite(q.data(), location, out);
  check_finite(offset, location, out);
}

bool lift_is_nonexpansive(const Matrix& q, double tol) {
  if (q.empty() || !finite_matrix(q)) return q.empty();
  return spectral_norm(q) <= 1.0 + tol;
}

}  // namespace

void audit_layer(const GradientStepLayer& layer, std::size_t expected_width,
                 const std::string& location, double tol, std::vector<ConstraintViolation>& out) {
  check_shape(expected_width, layer.width(), location, "width", out);
  check_shape(layer.rows(), layer.b.size(), location, "bias", out);
  check_finite(layer.w.data(), location, out);
  check_finite(layer.b, location, out);
  if (!std::isfinite(layer.tau)) {
    out.push_back({location, "non_finite", 1.0});
  } else if (layer.tau < -tol) {
    out.push_back({location, "tau_range", -layer.tau});
  } else {
    check_upper(layer.tau, 2.0, tol, location, "tau_range", out);
  }
  if (!layer.w.empty() && finite_matrix(layer.w)) {
    check_upper(spectral_norm(layer.w), 1.0, tol, location, "spectral_norm", out);
  }
}

VerificationReport validate(const NetworkG& net, double tol) {
  VerificationReport rep;
  rep.architecture = "G";
  auto& v = rep.constraint_violations;
  const std::size_t d = net.d(), h = net.h();
  audit_affine(net.lift.q, net.lift.offset, d, h, "lift", v);
  for (std::size_t l = 0; l < net.steps.size(); ++l)
    audit_layer(net.steps[l], h, "steps[" + std::to_string(l) + "]", tol, v);
  check_shape(h, net.head.size(), "head", "size", v);
  check_finite(net.head, "head", v);
  const double hn = norm2(net.head);
  if (std::abs(hn - 1.0) > tol) v.push_back({"head", "head_l2_norm", std::abs(hn - 1.0)});

  if (!v.empty()) {
    rep.guarantee = Guarantee::kNone;
  } else {
    rep.guarantee = lift_is_nonexpansive(net.lift.q, tol) ? Guarantee::kConstructive
                                                          : Guarantee::kEmpiricalOnly;
  }
  return rep;
}

VerificationReport validate(const NetworkGTilde& net, double tol) {
  VerificationReport rep;
  rep.architecture = "GTilde";
  auto& v = rep.constraint_violations;
  const std::size_t d = net.d(), h = net.h();
  if (h < 3) {
    v.push_back({"lift", "shape:width_below_3", static_cast<double>(3 - h)});
    return rep;
  }
  const auto blocks = tilde_blocks(h);

  audit_affine(net.lift.q, net.lift.offset, d, h, "lift", v);
  if (finite_matrix(net.lift.q) && net.lift.q.rows() == h) {
    std::size_t r0 = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (blocks[i] > 0 && d > 0) {
        const Matrix blk = net.lift.q.row_block(r0, blocks[i]);
        check_upper(spectral_norm(blk), 1.0, tol, "lift.block[" + std::to_string(i) + "]",
                    "block_spectral_norm", v);
      }
      r0 += blocks[i];
    }
  }

  const std::size_t expected_maps = net.layers.empty() ? 0 : net.layers.size() - 1;
  check_shape(expected_maps, net.maps.size(), "maps", "count", v);
  for (std::size_t l = 0; l < net.layers.size(); ++l)
    audit_layer(net.layers[l].tail, h - 3, "layers[" + std::to_string(l) + "].tail", tol, v);

  for (std::size_t l = 0; l < net.maps.size(); ++l) {
    const auto& map = net.maps[l];
    const std::string loc = "maps[" + std::to_string(l) + "]";
    if (map.blocks != blocks) {
      v.push_back({loc, "shape:block_structure", 1.0});
      continue;
    }
    audit_affine(map.a, map.offset, h, h, loc, v);
    if (map.a.rows() != h || map.a.cols() != h || !finite_matrix(map.a)) continue;
    const auto norms = block_norms(map.a, blocks);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const double row_sum = std::accumulate(norms[i].begin(), norms[i].end(), 0.0);
      check_upper(row_sum, 1.0, tol, loc + ".row_block[" + std::to_string(i) + "]",
                  "block_row_sum", v);
    }
  }

  check_shape(h, net.head.size(), "head", "size", v);
  check_finite(net.head, "head", v);
  check_upper(norm1(net.head), 1.0, tol, "head", "head_l1_norm", v);

  rep.guarantee = v.empty() ? Guarantee::kConstructive : Guarantee::kNone;
  return rep;
}

VerificationReport validate(const NetworkGc& net, double tol) {
  VerificationReport rep;
  rep.architecture = "Gc";
  auto& v = rep.constraint_violations;
  const std::size_t d = net.d(), h = net.h();
  audit_affine(net.lift.q, net.lift.offset, d, h, "lift", v);
  for (std::size_t l = 0; l < net.steps.size(); ++l)
    audit_layer(net.steps[l], h, "steps[" + std::to_string(l) + "]", tol, v);
  check_shape(h, net.head.cols(), "head", "cols", v);
  check_finite(net.head.data(), "head", v);
  for (std::size_t r = 0; r < net.head.rows(); ++r) {
    check_upper(norm2(net.head.row(r)), 1.0, tol, "head.row[" + std::to_string(r) + "]",
                "head_row_l2_norm", v);
  }
  if (!v.empty()) {
    rep.guarantee = Guarantee::kNone;
  } else {
    // Each output component is then nonexpansive; the ℓ2 output norm needs ‖P‖₂ ≤ 1 as well.
    const bool head_ok = net.head.empty() || spectral_norm(net.head) <= 1.0 + tol;
    rep.guarantee = head_ok && lift_is_nonexpansive(net.lift.q, tol) ? Guarantee::kConstructive
                                                                     : Guarantee::kEmpiricalOnly;
  }
  return rep;
}

VerificationReport validate(const AnyNetwork& net, double tol) {
  return std::visit([tol](const auto& n) { return validate(n, tol); }, net);
}

}  // namespace lipnet
