// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "lipnet/constructions.hpp"

using namespace lipnet;
using namespace lipnet::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

/// The shared instance set for the compiler criteria.
const std::vector<PwaMaxMin>& instances() {
  static const std::vector<PwaMaxMin> set = [] {
    Rng rng(2024);
    std::vector<PwaMaxMin> v;
    for (int i = 0; i < 200; ++i) v.push_back(random_pwa(rng));
    return v;
  }();
  return set;
}

std::vector<Vector> box_points(Rng& rng, std::size_t d, std::size_t n) {
  std::vector<Vector> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(random_vector(rng, d, -10, 10));
  return pts;
}

Outcome compiler_unbounded() {
  const auto t0 = Clock::now();
  Rng rng(1);
  double worst = 0.0;
  for (const auto& f : instances()) {
    const NetworkG net = compile_pwa_unbounded(f).net;
    worst = std::max(worst, equivalence_check(net, f, box_points(rng, f.d, 1000)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs <= 60.0, "max deviation " + num(worst) + ", " + num(secs) + " s"};
}

Outcome compiler_fixed() {
  Rng rng(2);
  double worst_pwa = 0.0, worst_g = 0.0;
  bool widths = true;
  for (const auto& f : instances()) {
    const NetworkGTilde t = compile_pwa_fixed_width(f);
    const NetworkG g = compile_pwa_unbounded(f).net;
    widths = widths && t.h() == f.d + 3;
    for (const auto& x : box_points(rng, f.d, 1000)) {
      const double y = forward_gtilde(t, x);
      worst_pwa = std::max(worst_pwa, std::abs(y - pwa_eval(f, x)));
      worst_g = std::max(worst_g, std::abs(y - forward_g(g, x)));
    }
  }
  return {widths && worst_pwa <= 1e-9 && worst_g <= 1e-9,
          std::string(widths ? "width d+3" : "WRONG WIDTH") + ", vs oracle " + num(worst_pwa) + ", vs unbounded " +
              num(worst_g)};
}

Outcome depth_bound() {
  std::size_t bad = 0;
  for (const auto& f : instances()) {
    const CompiledG c = compile_pwa_unbounded(f);
    std::size_t max_l = 0;
    for (const auto& b : f.blocks) max_l = std::max(max_l, b.size());
    const std::size_t bound = (f.k() - 1) + (max_l - 1);
    if (c.net.depth() > bound || !c.cert.holds()) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " of 200 over the bound"};
}

Dataset abs_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = uniform(rng, -1.0, 1.0);
    d.inputs.push_back({x});
    d.targets.push_back({std::abs(x)});
  }
  return d;
}

struct Checked {
  std::string name;
  AnyNetwork net;
  double tol;
};

/// Quotient over 1e5 pairs plus a clean audit at the given tolerance.
bool lipschitz_ok(const Checked& c, double& worst_q, std::string& failed) {
  const double q = empirical_lipschitz(c.net, {}, 100000, 42);
  worst_q = std::max(worst_q, q);
  const bool ok = q <= 1.0 + 1e-7 && validate(c.net, c.tol).constraints_ok();
  if (!ok) failed += " " + c.name;
  return ok;
}

AnyNetwork& trained_abs_model() {
  static AnyNetwork net = [] {
    TrainConfig cfg;
    cfg.seed = 42;
    return fit(init_network("GTilde", 1, 4, 8, 42), abs_dataset(256, 42), cfg).net;
  }();
  return net;
}

Outcome lipschitz_property() {
  Rng rng(4);
  std::vector<Checked> nets;
  for (int i = 0; i < 5; ++i) {
    const PwaMaxMin f = random_pwa(rng);
    nets.push_back({"unbounded" + std::to_string(i), compile_pwa_unbounded(f).net, kConstructedTol});
    nets.push_back({"fixed" + std::to_string(i), compile_pwa_fixed_width(f), kConstructedTol});
  }
  const NetworkG p = compile_pwa_unbounded(random_pwa(rng, 2, 3, 3)).net;
  const NetworkG q = compile_pwa_unbounded(random_pwa(rng, 2, 2, 4)).net;
  nets.push_back({"lattice_max", lattice_max(p, q), kConstructedTol});
  nets.push_back({"lattice_min", lattice_min(p, q), kConstructedTol});
  nets.push_back({"max_of_coords", max_of_coords_network(4), kConstructedTol});
  nets.push_back({"separating", separating_affine(Vector{0, 0}, Vector{3, 4}, 1.0, 4.0), kConstructedTol});
  nets.push_back({"stack_c1", stack_multivalued({p}), kConstructedTol});
  for (const char* arch : {"G", "GTilde"}) {
    const AnyNetwork raw = random_params(init_network(arch, 2, 5, 4, 3), rng, 2.0);
    nets.push_back({std::string("projected_") + arch, project_params(raw), kTrainedTol});
  }
  TrainConfig cfg;
  cfg.iterations = 500;
  nets.push_back({"trained_G", fit(init_network("G", 1, 4, 3, 42), abs_dataset(64, 7), cfg).net, kTrainedTol});
  nets.push_back({"trained_GTilde", trained_abs_model(), kTrainedTol});

  double worst = 0.0;
  std::string failed;
  bool ok = true;
  for (const auto& c : nets) ok = lipschitz_ok(c, worst, failed) && ok;
  return {ok, std::to_string(nets.size()) + " networks, max quotient " + num(worst) +
                  (failed.empty() ? "" : ", failed:" + failed)};
}

Outcome psd_reconstruction() {
  Rng rng(5);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t h = uniform_int(rng, 1, 8);
    const Matrix m = random_symmetric(rng, h, 0.0, 1.0);
    const GradientStepLayer l = psd_to_gradient_step(m);
    for (int s = 0; s < 100; ++s) {
      const Vector x = random_vector(rng, h, -10, 10);
      const Vector y = gradient_step_forward(l, x), mx = matvec(m, x);
      double e = 0.0;
      for (std::size_t i = 0; i < h; ++i) e += (y[i] - mx[i]) * (y[i] - mx[i]);
      worst = std::max(worst, std::sqrt(e) / std::max(1.0, norm2(x)));
    }
  }
  return {worst <= 1e-8, "max relative error " + num(worst)};
}

Outcome lattice() {
  Rng rng(6);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = uniform_int(rng, 1, 4);
    const NetworkG f = compile_pwa_unbounded(random_pwa(rng, d, uniform_int(rng, 1, 4), 4)).net;
    const NetworkG g = compile_pwa_unbounded(random_pwa(rng, d, uniform_int(rng, 1, 4), 4)).net;
    const NetworkG mx = lattice_max(f, g), mn = lattice_min(f, g);
    for (const auto& x : box_points(rng, d, 1000)) {
      const double a = forward_g(f, x), b = forward_g(g, x);
      worst = std::max(worst, std::abs(forward_g(mx, x) - std::max(a, b)));
      worst = std::max(worst, std::abs(forward_g(mn, x) - std::min(a, b)));
    }
  }
  return {worst <= 1e-9, "max deviation " + num(worst)};
}

Outcome equalize_and_embed() {
  Rng rng(7);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t w = uniform_int(rng, 1, 6);
    GradientStepLayer a{project_spectral_ball(random_matrix(rng, uniform_int(rng, 1, 6), w)),
                        random_vector(rng, 0), uniform(rng, 0.0, 2.0)};
    a.b = random_vector(rng, a.w.rows());
    GradientStepLayer b{project_spectral_ball(random_matrix(rng, uniform_int(rng, 1, 6), w)),
                        random_vector(rng, 0), uniform(rng, 0.0, 2.0)};
    b.b = random_vector(rng, b.w.rows());
    if (t % 5 == 0) a.tau = 0.0;
    const auto [a2, b2] = equalize_steps(a, b);
    const TildeELayer e{{project_spectral_ball(random_matrix(rng, uniform_int(rng, 1, 5), w)),
                         Vector{}, uniform(rng, 0.0, 2.0)}};
    TildeELayer layer = e;
    layer.tail.b = random_vector(rng, layer.tail.w.rows());
    const GradientStepLayer emb = tilde_e_embed(layer);
    for (int s = 0; s < 100; ++s) {
      const Vector x = random_vector(rng, w, -5, 5);
      worst = std::max(worst, max_abs(gradient_step_forward(a, x), gradient_step_forward(a2, x)));
      worst = std::max(worst, max_abs(gradient_step_forward(b, x), gradient_step_forward(b2, x)));
      const Vector z = random_vector(rng, w + 3, -5, 5);
      worst = std::max(worst, max_abs(gradient_step_forward(emb, z), tilde_e_forward(layer, z)));
    }
  }
  return {worst <= 1e-12, "max entrywise deviation " + num(worst)};
}

Outcome groupsort() {
  Rng rng(8);
  std::size_t total = 0, bad = 0;
  for (std::size_t k = 1; k <= 6; ++k) {
    const auto layers = groupsort_layers(k);
    Vector p = random_vector(rng, k, -10, 10);
    std::sort(p.begin(), p.end());
    do {
      Vector z = p;
      for (const auto& l : layers) z = gradient_step_forward(l, z);
      Vector expect = p;
      std::sort(expect.begin(), expect.end(), std::greater<>());
      ++total;
      if (z != expect) ++bad;
    } while (std::next_permutation(p.begin(), p.end()));
  }
  return {bad == 0 && total == 873, std::to_string(total) + " permutations, " + std::to_string(bad) + " not exact"};
}

Outcome gradient_check() {
  Rng rng(9);
  int checked = 0, tries = 0;
  double worst = 0.0;
  const char* archs[] = {"G", "GTilde", "Gc"};
  while (checked < 50 && tries < 1000) {
    const char* arch = archs[tries % 3];
    ++tries;
    const std::size_t d = uniform_int(rng, 1, 3);
    const AnyNetwork net = random_params(init_network(arch, d, 5, 3, tries, 2), rng, 0.8);
    const Vector x = random_vector(rng, d, -2, 2);
    if (kink_margin(net, x) < 1e-4) continue;
    const Vector up = random_vector(rng, std::holds_alternative<NetworkGc>(net) ? 2 : 1, -1, 1);
    worst = std::max(worst, rel_err(flatten(backprop(net, x, up).grad), fd_param_grad(net, x, up)));
    ++checked;
  }
  return {checked == 50 && worst <= 1e-5, std::to_string(checked) + " pairs, max relative error " + num(worst)};
}

Outcome training_regression() {
  const Dataset data = abs_dataset(256, 42);
  TrainConfig cfg;
  cfg.seed = 42;
  const auto t0 = Clock::now();
  const FitResult r = fit(init_network("GTilde", 1, 4, 8, 42), data, cfg);
  const double secs = seconds_since(t0);
  const double loss = mse(r.net, data);
  const double q = empirical_lipschitz(r.net, {}, 100000, 42);
  const bool audit = validate(r.net, kTrainedTol).constraints_ok();
  return {loss <= 1e-3 && secs <= 30.0 && q <= 1.0 + 1e-7 && audit && r.history.size() == cfg.iterations + 1,
          "mse " + num(loss) + " after " + std::to_string(cfg.iterations) + " iterations, " + num(secs) +
              " s, quotient " + num(q) + (audit ? ", audit clean" : ", AUDIT FAILED")};
}

Outcome approximation_trend() {
  const double pi = std::numbers::pi;
  double prev = std::numeric_limits<double>::infinity();
  bool ok = true;
  std::string detail;
  for (int n : {5, 9, 17, 33, 65}) {
    std::vector<std::pair<double, double>> s;
    for (int i = 0; i < n; ++i) {
      const double x = pi * i / (n - 1);
      s.push_back({x, std::sin(x)});
    }
    const PwaMaxMin f = interpolate_1d(s);
    double sup = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double x = pi * i / 9999.0;
      sup = std::max(sup, std::abs(pwa_eval(f, Vector{x}) - std::sin(x)));
    }
    ok = ok && sup <= pi / (n - 1) && sup < prev;
    prev = sup;
    detail += (detail.empty() ? "" : ", ") + std::string("n=") + std::to_string(n) + ": " + num(sup);
  }
  return {ok, detail};
}

Outcome separation() {
  Rng rng(12);
  double worst_hit = 0.0, worst_norm = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = uniform_int(rng, 1, 5);
    const Vector x = random_vector(rng, d, -10, 10), y = random_vector(rng, d, -10, 10);
    double dist = 0.0;
    for (std::size_t i = 0; i < d; ++i) dist += (x[i] - y[i]) * (x[i] - y[i]);
    dist = std::sqrt(dist);
    const double a = uniform(rng, -10, 10);
    const double b = a + uniform(rng, -1.0, 1.0) * dist;
    const NetworkG g = separating_affine(x, y, a, b);
    worst_hit = std::max({worst_hit, std::abs(forward_g(g, x) - a), std::abs(forward_g(g, y) - b)});
    worst_norm = std::max(worst_norm, spectral_norm(g.lift.q));
  }
  return {worst_hit <= 1e-12 && worst_norm <= 1.0 + 1e-12,
          "max target error " + num(worst_hit) + ", max lift norm " + num(worst_norm)};
}

Outcome stacking() {
  Rng rng(13);
  double worst = 0.0, worst_p = 0.0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = uniform_int(rng, 1, 4), c = uniform_int(rng, 1, 4);
    std::vector<NetworkG> parts;
    for (std::size_t i = 0; i < c; ++i) parts.push_back(compile_pwa_unbounded(random_pwa(rng, d, 3, 3)).net);
    const NetworkGc s = stack_multivalued(parts);
    for (std::size_t r = 0; r < s.head.rows(); ++r) worst_p = std::max(worst_p, norm2(s.head.row(r)));
    for (const auto& x : box_points(rng, d, 100)) {
      const Vector y = forward_gc(s, x);
      for (std::size_t i = 0; i < c; ++i) worst = std::max(worst, std::abs(y[i] - forward_g(parts[i], x)));
    }
  }
  return {worst <= 1e-12 && worst_p <= 1.0 + 1e-12,
          "max component deviation " + num(worst) + ", max head row norm " + num(worst_p)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"compiler soundness, unbounded width", compiler_unbounded},
      {"compiler soundness, fixed width", compiler_fixed},
      {"depth bound", depth_bound},
      {"Lipschitz property", lipschitz_property},
      {"PSD reconstruction", psd_reconstruction},
      {"lattice combinators", lattice},
      {"step equalization and embedding", equalize_and_embed},
      {"GroupSort", groupsort},
      {"gradient check", gradient_check},
      {"training regression", training_regression},
      {"1-D approximation trend", approximation_trend},
      {"separation", separation},
      {"multivalued stacking", stacking},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] criterion %zu: %s (%s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
