#include "lipnet/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <type_traits>

namespace lipnet {

void TrainConfig::check() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (mode == TrainMode::kPenalty && !(penalty_weight >= 0.0))
    throw std::invalid_argument("penalty weight must be non-negative");
  if (mode == TrainMode::kPenalty && penalty_samples == 0)
    throw std::invalid_argument("penalty mode needs at least one sample point");
}

void Dataset::check() const {
  if (inputs.empty()) throw std::invalid_argument("dataset is empty");
  if (inputs.size() != targets.size()) throw std::invalid_argument("inputs and targets differ in length");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].size() != input_dim() || targets[i].size() != target_dim())
      throw std::invalid_argument("dataset row " + std::to_string(i) + " has inconsistent width");
    if (!all_finite(inputs[i]) || !all_finite(targets[i]))
      throw std::invalid_argument("dataset row " + std::to_string(i) + " has non-finite entries");
  }
}

namespace {

double parse_double(std::string_view s, std::size_t line) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("line " + std::to_string(line) + ": cannot parse '" + std::string(s) +
                                "' as a finite number");
  }
  return v;
}

}  // namespace

Dataset load_dataset_csv(const std::filesystem::path& path, std::size_t input_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Dataset data;
  std::string line;
  std::size_t lineno = 0, header = 0, width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1))
      cells.push_back(rest.substr(0, pos));
    cells.push_back(rest);
    if (header == 0) {
      header = lineno;
      width = cells.size();
      if (width <= input_dim) {
        throw std::invalid_argument(path.string() + ": header has " + std::to_string(width) +
                                    " columns, need " + std::to_string(input_dim) + " inputs plus targets");
      }
      continue;
    }
    if (cells.size() != width) {
      throw std::invalid_argument(path.string() + ": line " + std::to_string(lineno) + " has " +
                                  std::to_string(cells.size()) + " columns, header has " +
                                  std::to_string(width));
    }
    Vector x, y;
    for (std::size_t c = 0; c < width; ++c) {
      const double v = parse_double(cells[c], lineno);
      (c < input_dim ? x : y).push_back(v);
    }
    data.inputs.push_back(std::move(x));
    data.targets.push_back(std::move(y));
  }
  if (header == 0) throw std::invalid_argument(path.string() + ": missing header row");
  if (data.inputs.empty()) throw std::invalid_argument(path.string() + ": no data rows");
  return data;
}

// ---------------------------------------------------------------------------
// Networks as op tapes

namespace {

enum class OpKind { kAffine, kStep, kSwap };

template <class M, class V, class S>
struct Op {
  OpKind kind;
  M* m = nullptr;
  V* o = nullptr;
  S* step = nullptr;
  std::size_t start = 0;
};

template <class Net>
constexpr bool kIsTilde = std::is_same_v<std::remove_const_t<Net>, NetworkGTilde>;

template <class Net>
auto ops_of(Net& net) {
  using M = std::remove_reference_t<decltype((net.lift.q))>;
  using V = std::remove_reference_t<decltype((net.lift.offset))>;
  using S = std::conditional_t<std::is_const_v<M>, const GradientStepLayer, GradientStepLayer>;
  std::vector<Op<M, V, S>> ops;
  ops.push_back({OpKind::kAffine, &net.lift.q, &net.lift.offset});
  if constexpr (kIsTilde<Net>) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      if (l > 0) ops.push_back({OpKind::kAffine, &net.maps[l - 1].a, &net.maps[l - 1].offset});
      ops.push_back({OpKind::kSwap});
      ops.push_back({OpKind::kStep, nullptr, nullptr, &net.layers[l].tail, 3});
    }
  } else {
    for (auto& s : net.steps) ops.push_back({OpKind::kStep, nullptr, nullptr, &s, 0});
  }
  return ops;
}

template <class Net, class Fn>
void visit_params(Net& net, Fn&& fn) {
  auto mat = [&](auto& m) { fn(std::span(m.data().data(), m.data().size())); };
  auto vec = [&](auto& v) { fn(std::span(v.data(), v.size())); };
  auto step = [&](auto& s) {
    mat(s.w);
    vec(s.b);
    fn(std::span(&s.tau, 1));
  };
  mat(net.lift.q);
  vec(net.lift.offset);
  if constexpr (kIsTilde<Net>) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      if (l > 0) {
        mat(net.maps[l - 1].a);
        vec(net.maps[l - 1].offset);
      }
      step(net.layers[l].tail);
    }
  } else {
    for (auto& s : net.steps) step(s);
  }
  if constexpr (std::is_same_v<std::remove_const_t<Net>, NetworkGc>) {
    mat(net.head);
  } else {
    vec(net.head);
  }
}

struct Tape {
  std::vector<Vector> z_in;      // state entering each op
  std::vector<char> swapped;     // kSwap ops only
  Vector z_out;
};

template <class Net>
Tape forward_tape(const Net& net, std::span<const double> x) {
  const auto ops = ops_of(net);
  Tape t;
  t.z_in.reserve(ops.size());
  t.swapped.assign(ops.size(), 0);
  Vector z(x.begin(), x.end());
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& op = ops[i];
    t.z_in.push_back(z);
    switch (op.kind) {
      case OpKind::kAffine: {
        Vector next = matvec(*op.m, z);
        for (std::size_t r = 0; r < next.size(); ++r) next[r] += (*op.o)[r];
        z = std::move(next);
        break;
      }
      case OpKind::kSwap:
        if (z[1] > z[0]) {
          std::swap(z[0], z[1]);
          t.swapped[i] = 1;
        }
        break;
      case OpKind::kStep: {
        const std::span<const double> sub(z.data() + op.start, z.size() - op.start);
        const Vector out = gradient_step_forward(*op.step, sub);
        std::copy(out.begin(), out.end(), z.begin() + op.start);
        break;
      }
    }
  }
  t.z_out = std::move(z);
  return t;
}

Vector head_output(const NetworkG& n, const Vector& z) { return {dot(n.head, z)}; }
Vector head_output(const NetworkGTilde& n, const Vector& z) { return {dot(n.head, z)}; }
Vector head_output(const NetworkGc& n, const Vector& z) { return matvec(n.head, z); }

/// Accumulates upstream-weighted head gradient; returns the adjoint of the final state.
template <class Net>
Vector head_backward(const Net& net, Net& grad, const Vector& z, std::span<const double> up) {
  if constexpr (std::is_same_v<Net, NetworkGc>) {
    for (std::size_t r = 0; r < net.head.rows(); ++r)
      for (std::size_t c = 0; c < net.head.cols(); ++c) grad.head(r, c) += up[r] * z[c];
    return matvec_t(net.head, up);
  } else {
    Vector g(net.head.size());
    for (std::size_t c = 0; c < g.size(); ++c) {
      grad.head[c] += up[0] * z[c];
      g[c] = up[0] * net.head[c];
    }
    return g;
  }
}

/// Reverse pass of the value map. Returns the input adjoint.
template <class Net>
Vector backward_tape(const Net& net, Net& grad, const Tape& t, Vector g) {
  const auto ops = ops_of(net);
  auto gops = ops_of(grad);
  for (std::size_t i = ops.size(); i-- > 0;) {
    const auto& op = ops[i];
    auto& gop = gops[i];
    const Vector& zin = t.z_in[i];
    switch (op.kind) {
      case OpKind::kAffine: {
        Matrix& dm = *gop.m;
        for (std::size_t r = 0; r < dm.rows(); ++r) {
          (*gop.o)[r] += g[r];
          for (std::size_t c = 0; c < dm.cols(); ++c) dm(r, c) += g[r] * zin[c];
        }
        g = matvec_t(*op.m, g);
        break;
      }
      case OpKind::kSwap:
        if (t.swapped[i]) std::swap(g[0], g[1]);
        break;
      case OpKind::kStep: {
        const auto& s = *op.step;
        auto& ds = *gop.step;
        const std::size_t n = s.width(), k = s.rows(), o = op.start;
        const std::span<const double> z(zin.data() + o, n);
        const std::span<double> gs(g.data() + o, n);
        Vector u = matvec(s.w, z);
        const Vector wg = matvec(s.w, gs);
        Vector delta(k, 0.0);
        for (std::size_t r = 0; r < k; ++r) {
          u[r] += s.b[r];
          const double act = relu(u[r]);
          ds.tau -= wg[r] * act;
          if (u[r] > 0.0) delta[r] = -s.tau * wg[r];
          for (std::size_t c = 0; c < n; ++c) ds.w(r, c) += -s.tau * act * gs[c] + delta[r] * z[c];
          ds.b[r] += delta[r];
        }
        const Vector back = matvec_t(s.w, delta);
        for (std::size_t c = 0; c < n; ++c) gs[c] += back[c];
        break;
      }
    }
  }
  return g;
}

/// Gradient of vᵀ·J(x)·c with respect to the parameters, holding the ReLU
/// pattern at x fixed, scaled by `weight`.
template <class Net>
void directional_grad(const Net& net, Net& grad, const Tape& t, std::span<const double> c, double weight) {
  const auto ops = ops_of(net);
  auto gops = ops_of(grad);
  // Tangent pass.
  std::vector<Vector> r_in;
  r_in.reserve(ops.size());
  Vector r(c.begin(), c.end());
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& op = ops[i];
    r_in.push_back(r);
    switch (op.kind) {
      case OpKind::kAffine:
        r = matvec(*op.m, r);
        break;
      case OpKind::kSwap:
        if (t.swapped[i]) std::swap(r[0], r[1]);
        break;
      case OpKind::kStep: {
        const auto& s = *op.step;
        const std::size_t n = s.width(), o = op.start;
        const std::span<const double> z(t.z_in[i].data() + o, n);
        const std::span<double> rs(r.data() + o, n);
        Vector u = matvec(s.w, z);
        Vector e = matvec(s.w, rs);
        for (std::size_t k = 0; k < e.size(); ++k) e[k] = u[k] + s.b[k] > 0.0 ? e[k] : 0.0;
        const Vector back = matvec_t(s.w, e);
        for (std::size_t q = 0; q < n; ++q) rs[q] -= s.tau * back[q];
        break;
      }
    }
  }

  // Adjoint of the tangent pass.
  Vector lam;
  if constexpr (std::is_same_v<Net, NetworkGc>) {
    throw std::invalid_argument("penalty gradient needs a scalar network");
  } else {
    lam.resize(net.head.size());
    for (std::size_t q = 0; q < lam.size(); ++q) {
      grad.head[q] += weight * r[q];
      lam[q] = weight * net.head[q];
    }
  }
  for (std::size_t i = ops.size(); i-- > 0;) {
    const auto& op = ops[i];
    auto& gop = gops[i];
    const Vector& rin = r_in[i];
    switch (op.kind) {
      case OpKind::kAffine: {
        Matrix& dm = *gop.m;
        for (std::size_t a = 0; a < dm.rows(); ++a)
          for (std::size_t b = 0; b < dm.cols(); ++b) dm(a, b) += lam[a] * rin[b];
        lam = matvec_t(*op.m, lam);
        break;
      }
      case OpKind::kSwap:
        if (t.swapped[i]) std::swap(lam[0], lam[1]);
        break;
      case OpKind::kStep: {
        const auto& s = *op.step;
        auto& ds = *gop.step;
        const std::size_t n = s.width(), k = s.rows(), o = op.start;
        const std::span<const double> z(t.z_in[i].data() + o, n);
        const std::span<const double> rs(rin.data() + o, n);
        const std::span<double> ls(lam.data() + o, n);
        const Vector u = matvec(s.w, z);
        Vector e = matvec(s.w, rs);
        Vector dl = matvec(s.w, ls);
        for (std::size_t a = 0; a < k; ++a) {
          if (!(u[a] + s.b[a] > 0.0)) {
            e[a] = 0.0;
            dl[a] = 0.0;
          }
          ds.tau -= dl[a] * e[a];
          for (std::size_t b = 0; b < n; ++b) ds.w(a, b) += -s.tau * (e[a] * ls[b] + dl[a] * rs[b]);
        }
        const Vector back = matvec_t(s.w, dl);
        for (std::size_t b = 0; b < n; ++b) ls[b] -= s.tau * back[b];
        break;
      }
    }
  }
}

template <class Net>
Net zeros_of(const Net& net) {
  Net z = net;
  visit_params(z, [](std::span<double> p) { std::fill(p.begin(), p.end(), 0.0); });
  return z;
}

template <class Net>
Vector scalar_input_gradient(const Net& net, std::span<const double> x) {
  const Tape t = forward_tape(net, x);
  Net scratch = zeros_of(net);
  const double one = 1.0;
  return backward_tape(net, scratch, t, head_backward(net, scratch, t.z_out, std::span(&one, 1)));
}

template <class Net>
double penalty_accumulate(const Net& net, Net* grad, const std::vector<Vector>& points) {
  double total = 0.0;
  for (const auto& x : points) {
    const Tape t = forward_tape(net, x);
    Net scratch = zeros_of(net);
    const double one = 1.0;
    const Vector g = backward_tape(net, scratch, t, head_backward(net, scratch, t.z_out, std::span(&one, 1)));
    const double n = norm2(g);
    const double excess = relu(n - 1.0);
    total += excess * excess;
    if (grad && excess > 0.0) directional_grad(net, *grad, t, g, 2.0 * excess / n);
  }
  return total;
}

GradientStepLayer project_step(GradientStepLayer s) {
  s.tau = std::clamp(s.tau, 0.0, 2.0);
  if (!s.w.empty()) s.w = project_spectral_ball(s.w);
  return s;
}

Matrix project_spectral_or_empty(const Matrix& m) { return m.empty() ? m : project_spectral_ball(m); }

template <class T>
const T& as(const AnyNetwork& n) {
  return std::get<T>(n);
}

}  // namespace

NetworkG backprop(const NetworkG& net, std::span<const double> x, double upstream) {
  const Tape t = forward_tape(net, x);
  NetworkG grad = zeros_of(net);
  backward_tape(net, grad, t, head_backward(net, grad, t.z_out, std::span(&upstream, 1)));
  return grad;
}

NetworkGTilde backprop(const NetworkGTilde& net, std::span<const double> x, double upstream) {
  const Tape t = forward_tape(net, x);
  NetworkGTilde grad = zeros_of(net);
  backward_tape(net, grad, t, head_backward(net, grad, t.z_out, std::span(&upstream, 1)));
  return grad;
}

GradResult backprop(const AnyNetwork& any, std::span<const double> x, std::span<const double> upstream) {
  return std::visit(
      [&](const auto& net) {
        using Net = std::decay_t<decltype(net)>;
        const Tape t = forward_tape(net, x);
        Net grad = zeros_of(net);
        GradResult res{grad, head_output(net, t.z_out), {}};
        if (upstream.size() != res.output.size())
          throw std::invalid_argument("backprop: upstream size does not match the output size");
        const Vector g = backward_tape(net, grad, t, head_backward(net, grad, t.z_out, upstream));
        if (res.output.size() == 1) res.input_grad = g;
        res.grad = std::move(grad);
        return res;
      },
      any);
}

Vector input_gradient(const AnyNetwork& any, std::span<const double> x) {
  return std::visit(
      [&](const auto& net) -> Vector {
        using Net = std::decay_t<decltype(net)>;
        if constexpr (std::is_same_v<Net, NetworkGc>) {
          throw std::invalid_argument("input_gradient: scalar networks only");
        } else {
          return scalar_input_gradient(net, x);
        }
      },
      any);
}

Vector flatten(const AnyNetwork& any) {
  Vector out;
  std::visit([&](const auto& net) { visit_params(net, [&](auto p) { out.insert(out.end(), p.begin(), p.end()); }); },
             any);
  return out;
}

std::size_t param_count(const AnyNetwork& any) {
  std::size_t n = 0;
  std::visit([&](const auto& net) { visit_params(net, [&](auto p) { n += p.size(); }); }, any);
  return n;
}

AnyNetwork unflatten(const AnyNetwork& shape, std::span<const double> params) {
  if (params.size() != param_count(shape))
    throw std::invalid_argument("unflatten: expected " + std::to_string(param_count(shape)) + " values");
  AnyNetwork out = shape;
  std::size_t pos = 0;
  std::visit(
      [&](auto& net) {
        visit_params(net, [&](std::span<double> p) {
          std::copy(params.begin() + pos, params.begin() + pos + p.size(), p.begin());
          pos += p.size();
        });
      },
      out);
  return out;
}

AnyNetwork zeros_like(const AnyNetwork& any) {
  return std::visit([](const auto& net) -> AnyNetwork { return zeros_of(net); }, any);
}

AnyNetwork project_params(const AnyNetwork& any, bool project_lift) {
  if (const auto* g = std::get_if<NetworkG>(&any)) {
    NetworkG n = *g;
    if (project_lift) n.lift.q = project_spectral_or_empty(n.lift.q);
    for (auto& s : n.steps) s = project_step(s);
    const double hn = norm2(n.head);
    if (hn == 0.0 || !std::isfinite(hn)) {
      std::fill(n.head.begin(), n.head.end(), 0.0);
      if (!n.head.empty()) n.head[0] = 1.0;
    } else if (std::abs(hn - 1.0) > 1e-15) {
      for (auto& v : n.head) v /= hn;
    }
    return n;
  }
  if (const auto* t = std::get_if<NetworkGTilde>(&any)) {
    NetworkGTilde n = *t;
    const auto blocks = tilde_blocks(n.h());
    if (project_lift && n.d() > 0) n.lift.q = project_block_rows(n.lift.q, blocks);
    for (auto& l : n.layers) l.tail = project_step(l.tail);
    for (auto& m : n.maps) {
      const auto norms = block_norms(m.a, blocks);
      std::size_t r0 = 0;
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        double sum = 0.0;
        for (double v : norms[i]) sum += v;
        if (sum > 1.0 + kProjectionSlack) {
          for (std::size_t r = r0; r < r0 + blocks[i]; ++r)
            for (auto& v : m.a.row(r)) v /= sum;
        }
        r0 += blocks[i];
      }
    }
    n.head = project_l1_ball(n.head);
    return n;
  }
  NetworkGc n = std::get<NetworkGc>(any);
  if (project_lift) n.lift.q = project_spectral_or_empty(n.lift.q);
  for (auto& s : n.steps) s = project_step(s);
  for (std::size_t r = 0; r < n.head.rows(); ++r) {
    const double rn = norm2(n.head.row(r));
    if (rn > 1.0) for (auto& v : n.head.row(r)) v /= rn;
  }
  return n;
}

double lipschitz_penalty(const AnyNetwork& any, const std::vector<Vector>& points) {
  if (points.empty()) throw std::invalid_argument("lipschitz_penalty: no points");
  return std::visit(
      [&](const auto& net) -> double {
        using Net = std::decay_t<decltype(net)>;
        if constexpr (std::is_same_v<Net, NetworkGc>) {
          throw std::invalid_argument("lipschitz_penalty: scalar networks only");
        } else {
          return penalty_accumulate<Net>(net, nullptr, points);
        }
      },
      any);
}

std::pair<double, AnyNetwork> lipschitz_penalty_grad(const AnyNetwork& any,
                                                     const std::vector<Vector>& points) {
  if (points.empty()) throw std::invalid_argument("lipschitz_penalty: no points");
  return std::visit(
      [&](const auto& net) -> std::pair<double, AnyNetwork> {
        using Net = std::decay_t<decltype(net)>;
        if constexpr (std::is_same_v<Net, NetworkGc>) {
          throw std::invalid_argument("lipschitz_penalty: scalar networks only");
        } else {
          Net grad = zeros_of(net);
          const double p = penalty_accumulate<Net>(net, &grad, points);
          return {p, AnyNetwork(std::move(grad))};
        }
      },
      any);
}

AnyNetwork init_network(const std::string& arch, std::size_t d, std::size_t h, std::size_t depth,
                        std::uint64_t seed, std::size_t outputs) {
  if (d == 0 || h == 0) throw std::invalid_argument("init_network: d and h must be >= 1");
  std::mt19937_64 rng(seed);
  const double r = 1.0 / std::sqrt(static_cast<double>(h));
  std::uniform_real_distribution<double> unif(-r, r);
  auto fill = [&](std::span<double> p) {
    for (auto& v : p) v = unif(rng);
  };
  auto random_matrix = [&](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    fill(m.data());
    return m;
  };
  auto random_vector = [&](std::size_t n) {
    Vector v(n);
    fill(v);
    return v;
  };
  auto random_step = [&](std::size_t width) {
    GradientStepLayer s{random_matrix(width, width), Vector(width, 0.0), 1.0};
    if (width == 0) s = GradientStepLayer::identity(0);
    return s;
  };

  AnyNetwork net;
  if (arch == "G" || arch == "Gc") {
    AffineLift lift{random_matrix(h, d), Vector(h, 0.0)};
    std::vector<GradientStepLayer> steps;
    for (std::size_t l = 0; l < depth; ++l) steps.push_back(random_step(h));
    if (arch == "G") {
      net = NetworkG{std::move(lift), std::move(steps), random_vector(h)};
    } else {
      net = NetworkGc{std::move(lift), std::move(steps), random_matrix(outputs, h)};
    }
  } else if (arch == "GTilde") {
    if (h < 3) throw std::invalid_argument("init_network: fixed-width networks need h >= 3");
    NetworkGTilde n;
    n.lift = {random_matrix(h, d), Vector(h, 0.0)};
    for (std::size_t l = 0; l < depth; ++l) {
      if (l > 0) n.maps.push_back(BlockAffine::identity(tilde_blocks(h)));
      n.layers.push_back({random_step(h - 3)});
    }
    n.head = random_vector(h);
    net = std::move(n);
  } else {
    throw std::invalid_argument("unknown architecture '" + arch + "'");
  }
  return project_params(net, true);
}

namespace {

double batch_loss_grad(const AnyNetwork& any, const Dataset& data, const std::vector<std::size_t>& idx,
                       AnyNetwork* grad_out) {
  return std::visit(
      [&](const auto& net) -> double {
        using Net = std::decay_t<decltype(net)>;
        Net grad = zeros_of(net);
        double loss = 0.0;
        const double scale = 1.0 / static_cast<double>(idx.size());
        for (std::size_t i : idx) {
          const Tape t = forward_tape(net, data.inputs[i]);
          const Vector y = head_output(net, t.z_out);
          if (y.size() != data.targets[i].size())
            throw std::invalid_argument("dataset targets do not match the network output size");
          Vector up(y.size());
          for (std::size_t c = 0; c < y.size(); ++c) {
            const double diff = y[c] - data.targets[i][c];
            loss += diff * diff * scale;
            up[c] = 2.0 * diff * scale;
          }
          if (grad_out) backward_tape(net, grad, t, head_backward(net, grad, t.z_out, up));
        }
        if (grad_out) *grad_out = std::move(grad);
        return loss;
      },
      any);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

double mse(const AnyNetwork& net, const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch_loss_grad(net, data, idx, nullptr);
}

FitResult fit(const AnyNetwork& start, const Dataset& data, const TrainConfig& cfg) {
  cfg.check();
  data.check();
  const std::size_t d = std::visit([](const auto& n) { return n.d(); }, start);
  if (d != data.input_dim()) {
    throw std::invalid_argument("network input dimension " + std::to_string(d) +
                                " does not match dataset input width " + std::to_string(data.input_dim()));
  }
  const bool penalty = cfg.mode == TrainMode::kPenalty;
  if (penalty && std::holds_alternative<NetworkGc>(start))
    throw std::invalid_argument("penalty mode supports scalar networks only");
  const bool project_lift = !penalty;

  // Penalty points are drawn from the bounding box of the inputs.
  Vector lo = data.inputs.front(), hi = data.inputs.front();
  for (const auto& x : data.inputs) {
    for (std::size_t c = 0; c < d; ++c) {
      lo[c] = std::min(lo[c], x[c]);
      hi[c] = std::max(hi[c], x[c]);
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    if (!(lo[c] < hi[c])) {
      lo[c] -= 1.0;
      hi[c] += 1.0;
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif01(0.0, 1.0);
  auto penalty_points = [&]() {
    std::vector<Vector> pts(cfg.penalty_samples, Vector(d));
    for (auto& p : pts)
      for (std::size_t c = 0; c < d; ++c) p[c] = lo[c] + (hi[c] - lo[c]) * unif01(rng);
    return pts;
  };

  AnyNetwork net = project_params(start, project_lift);
  const std::size_t n = data.size();
  const bool full = cfg.batch_size == 0 || cfg.batch_size >= n;
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  // Positions of the τ entries in the flat parameter vector.
  std::vector<char> tau_mask;
  if (cfg.freeze_tau) {
    AnyNetwork marker = zeros_like(net);
    std::visit(
        [](auto& m) {
          for (auto& op : ops_of(m))
            if (op.kind == OpKind::kStep) op.step->tau = 1.0;
        },
        marker);
    for (double v : flatten(marker)) tau_mask.push_back(v != 0.0);
  }

  FitResult res;
  Vector velocity(param_count(net), 0.0);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<std::size_t> batch;
    if (full) {
      batch = all;
    } else {
      for (std::size_t b = 0; b < cfg.batch_size; ++b) batch.push_back(pick(rng));
    }
    AnyNetwork grad;
    const double loss = batch_loss_grad(net, data, batch, &grad);
    Vector g = flatten(grad);
    double pen = 0.0;
    if (penalty) {
      auto [p, pg] = lipschitz_penalty_grad(net, penalty_points());
      pen = p;
      const Vector pf = flatten(pg);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += cfg.penalty_weight * pf[i];
    }
    if (!std::isfinite(loss) || !std::isfinite(pen) || !all_finite(g)) {
      throw NumericalFailure("iteration " + std::to_string(it) + ": loss " + format_double(loss) +
                             ", penalty " + format_double(pen) + "; non-finite value in training");
    }
    res.history.push_back({it, loss, pen});
    for (std::size_t i = 0; i < tau_mask.size(); ++i)
      if (tau_mask[i]) g[i] = 0.0;

    Vector params = flatten(net);
    for (std::size_t i = 0; i < params.size(); ++i) {
      velocity[i] = cfg.momentum * velocity[i] + g[i];
      params[i] -= cfg.learning_rate * velocity[i];
    }
    net = project_params(unflatten(net, params), project_lift);
  }

  const double final_loss = mse(net, data);
  const double final_pen = penalty ? lipschitz_penalty(net, penalty_points()) : 0.0;
  if (!std::isfinite(final_loss) || !std::isfinite(final_pen))
    throw NumericalFailure("final loss is not finite");
  res.history.push_back({cfg.iterations, final_loss, final_pen});
  res.net = std::move(net);
  return res;
}

std::string history_csv(const std::vector<LossRecord>& history) {
  std::ostringstream out;
  out << "iteration,loss,penalty\n";
  for (const auto& r : history)
    out << r.iteration << ',' << format_double(r.loss) << ',' << format_double(r.penalty) << '\n';
  return out.str();
}

}  // namespace lipnet
