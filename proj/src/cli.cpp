#include "lipnet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lipnet/constructions.hpp"
#include "lipnet/serialize.hpp"
#include "lipnet/train.hpp"
#include "lipnet/verify.hpp"

namespace lipnet::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("LIPNET_SEED")) {
    std::uint64_t s = 0;
    const std::string_view v(env);
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
    if (ec != std::errc() || ptr != v.data() + v.size())
      throw UsageError("LIPNET_SEED must be a non-negative integer, got '" + std::string(v) + "'");
    return s;
  }
  return 42;
}

bool parse_row(std::string_view row, char sep, Vector& out) {
  out.clear();
  while (true) {
    const auto pos = row.find(sep);
    std::string_view cell = row.substr(0, pos);
    while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.front()))) cell.remove_prefix(1);
    while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.remove_suffix(1);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) return false;
    out.push_back(v);
    if (pos == std::string_view::npos) return true;
    row.remove_prefix(pos + 1);
  }
}

/// A CSV file (optional header) or an inline list "x1,x2;y1,y2".
std::vector<Vector> read_points(const std::string& spec) {
  std::vector<Vector> pts;
  Vector row;
  if (std::filesystem::exists(spec)) {
    std::ifstream in(spec);
    if (!in) throw UsageError("cannot open " + spec);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      if (!parse_row(line, ',', row)) {
        if (pts.empty() && lineno == 1) continue;  // header
        throw UsageError(spec + ": line " + std::to_string(lineno) + " is not a row of numbers");
      }
      pts.push_back(row);
    }
    if (pts.empty()) throw UsageError(spec + ": no points");
    return pts;
  }
  std::string_view rest(spec);
  while (!rest.empty()) {
    const auto pos = rest.find(';');
    const std::string_view item = rest.substr(0, pos);
    if (!parse_row(item, ',', row))
      throw UsageError("'" + spec + "' is neither an existing file nor an inline point list like 1,2;3,4");
    pts.push_back(row);
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  if (pts.empty()) throw UsageError("no points given");
  return pts;
}

std::size_t input_dim(const AnyNetwork& net) {
  return std::visit([](const auto& n) { return n.d(); }, net);
}

void print_audit(std::ostream& out, const VerificationReport& rep) {
  out << "guarantee: " << to_string(rep.guarantee) << "\n";
  out << "constraint violations: " << rep.constraint_violations.size() << "\n";
  for (const auto& v : rep.constraint_violations)
    out << "  " << v.location << " " << v.kind << " exceeds by " << fmt(v.magnitude) << "\n";
}

std::vector<Vector> sample_points(std::size_t d, Box box, std::uint64_t seed, std::size_t n) {
  PairSampler s(d, box, seed);
  std::vector<Vector> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(s.point());
  return pts;
}

struct Context {
  std::ostream& out;
  std::ostream& err;
};

int cmd_compile(Context& ctx, const std::string& spec_path, const std::string& arch, const std::string& out_path) {
  const PwaMaxMin f = load_pwa(spec_path);
  AnyNetwork net;
  std::size_t bound = 0;
  bool has_bound = false;
  if (arch == "unbounded") {
    auto compiled = compile_pwa_unbounded(f);
    bound = compiled.cert.depth_bound;
    has_bound = true;
    net = std::move(compiled.net);
  } else {
    net = compile_pwa_fixed_width(f);
  }
  save_network(out_path, net);
  const VerificationReport rep = validate(net, kConstructedTol);
  ctx.out << "architecture: " << architecture_name(net) << "\n";
  ctx.out << "width: " << std::visit([](const auto& n) { return n.h(); }, net) << "\n";
  ctx.out << "depth: " << std::visit([](const auto& n) { return n.depth(); }, net) << "\n";
  if (has_bound) ctx.out << "depth bound: " << bound << "\n";
  print_audit(ctx.out, rep);
  ctx.out << "wrote " << out_path << "\n";
  return rep.constraints_ok() ? kOk : kVerificationFailure;
}

int cmd_eval(Context& ctx, const std::string& net_path, const std::string& points) {
  const AnyNetwork net = load_network(net_path);
  const VerificationReport rep = validate(net, kTrainedTol);
  if (!rep.constraints_ok()) {
    print_audit(ctx.err, rep);
    ctx.err << "error: network fails its constraint audit\n";
    return kVerificationFailure;
  }
  const auto pts = read_points(points);
  const std::size_t d = input_dim(net);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].size() != d) {
      throw UsageError("point " + std::to_string(i) + " has dimension " + std::to_string(pts[i].size()) +
                       ", network expects " + std::to_string(d));
    }
  }
  const VectorFn f = as_function(net);
  std::ostringstream buf;
  for (const auto& p : pts) {
    const Vector y = f(p);
    for (std::size_t c = 0; c < y.size(); ++c) buf << (c ? "," : "") << fmt(y[c]);
    buf << "\n";
  }
  ctx.out << buf.str();
  return kOk;
}

int cmd_verify(Context& ctx, const std::string& net_path, const std::string& oracle_path,
               const VerifyOptions& opts, const std::string& report_path) {
  const AnyNetwork net = load_network(net_path);
  std::optional<PwaMaxMin> oracle;
  if (!oracle_path.empty()) oracle = load_pwa(oracle_path);
  const VerificationReport rep = verify_network(net, opts, oracle ? &*oracle : nullptr);
  const std::string text = dump(to_json(rep));
  if (!report_path.empty()) write_text_file(report_path, text);
  ctx.out << text;
  return report_passes(rep) ? kOk : kVerificationFailure;
}

struct TrainArgs {
  std::string data, arch = "GTilde", mode = "projected", out, history;
  std::size_t width = 4, depth = 8, targets = 1, batch = 0, penalty_samples = 64;
  std::size_t iters = 5000;
  double lr = 0.1, momentum = 0.9, penalty_weight = 0.1;
  std::uint64_t seed = 42;
  bool freeze_tau = false;
};

std::string normalize_arch(const std::string& a) {
  if (a == "G" || a == "unbounded") return "G";
  if (a == "GTilde" || a == "fixed") return "GTilde";
  if (a == "Gc" || a == "multivalued") return "Gc";
  throw UsageError("unknown architecture '" + a + "'");
}

int cmd_train(Context& ctx, const TrainArgs& a) {
  std::size_t columns = 0;
  {
    std::ifstream in(a.data);
    if (!in) throw UsageError("cannot open " + a.data);
    std::string header;
    if (!std::getline(in, header)) throw UsageError(a.data + ": missing header row");
    columns = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  }
  if (columns <= a.targets) throw UsageError(a.data + ": need at least one input column");
  const Dataset data = load_dataset_csv(a.data, columns - a.targets);
  const std::string arch = normalize_arch(a.arch);
  if (arch != "Gc" && a.targets != 1) throw UsageError("scalar architectures need exactly one target column");

  TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.momentum = a.momentum;
  cfg.iterations = a.iters;
  cfg.batch_size = a.batch;
  cfg.seed = a.seed;
  cfg.mode = a.mode == "penalty" ? TrainMode::kPenalty : TrainMode::kProjected;
  cfg.penalty_weight = a.penalty_weight;
  cfg.penalty_samples = a.penalty_samples;
  cfg.freeze_tau = a.freeze_tau;

  const AnyNetwork init = init_network(arch, data.input_dim(), a.width, a.depth, a.seed, a.targets);
  FitResult res;
  try {
    res = fit(init, data, cfg);
  } catch (const NumericalFailure& e) {
    ctx.err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }
  save_network(a.out, res.net);
  const std::string history = a.history.empty() ? a.out + ".loss.csv" : a.history;
  write_text_file(history, history_csv(res.history));

  const VerificationReport rep = validate(res.net, cfg.projection_tolerance);
  ctx.out << "final mse: " << fmt(res.history.back().loss) << "\n";
  if (cfg.mode == TrainMode::kPenalty) ctx.out << "final penalty: " << fmt(res.history.back().penalty) << "\n";
  print_audit(ctx.out, rep);
  ctx.out << "wrote " << a.out << " and " << history << "\n";
  // Penalty mode leaves the lift unconstrained, so only projected runs must pass the audit.
  return rep.constraints_ok() || cfg.mode == TrainMode::kPenalty ? kOk : kVerificationFailure;
}

int cmd_lattice(Context& ctx, const std::string& a_path, const std::string& b_path, const std::string& op,
                const std::string& out_path, std::uint64_t seed) {
  const AnyNetwork a = load_network(a_path), b = load_network(b_path);
  const auto* f = std::get_if<NetworkG>(&a);
  const auto* g = std::get_if<NetworkG>(&b);
  if (!f || !g) {
    throw UsageError(std::string("lattice needs two G networks, got ") + architecture_name(a) + " and " +
                     architecture_name(b));
  }
  if (f->d() != g->d())
    throw UsageError("input dimensions differ: " + std::to_string(f->d()) + " vs " + std::to_string(g->d()));
  const bool is_max = op == "max";
  const NetworkG h = is_max ? lattice_max(*f, *g) : lattice_min(*f, *g);
  save_network(out_path, h);

  double worst = 0.0;
  const auto pts = sample_points(h.d(), Box{}, seed, 1000);
  for (const auto& p : pts) {
    const double fa = forward_g(*f, p), fb = forward_g(*g, p);
    worst = std::max(worst, std::abs(forward_g(h, p) - (is_max ? std::max(fa, fb) : std::min(fa, fb))));
  }
  ctx.out << "width: " << h.h() << "\ndepth: " << h.depth() << "\n";
  ctx.out << "spot check: " << pts.size() << " points, max deviation " << fmt(worst) << "\n";
  ctx.out << "wrote " << out_path << "\n";
  return worst <= kOracleTol ? kOk : kVerificationFailure;
}

int cmd_sort(Context& ctx, std::size_t k, const std::string& out_path, std::uint64_t seed) {
  if (k == 0) throw UsageError("--k must be >= 1");
  const LayerStack stack{k, groupsort_layers(k)};
  write_text_file(out_path, dump(to_json(stack)));

  std::vector<Vector> inputs;
  if (k <= 6) {
    Vector p(k);
    std::iota(p.begin(), p.end(), 1.0);
    do inputs.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
  } else {
    inputs = sample_points(k, Box{}, seed, 100);
  }
  std::size_t failures = 0;
  for (const auto& x : inputs) {
    Vector z = x;
    for (const auto& layer : stack.layers) z = gradient_step_forward(layer, z);
    Vector expect = x;
    std::sort(expect.begin(), expect.end(), std::greater<>());
    if (z != expect) ++failures;
  }
  ctx.out << "layers: " << stack.layers.size() << "\n";
  ctx.out << "checked " << inputs.size() << " inputs, " << failures << " not sorted descending\n";
  ctx.out << "wrote " << out_path << "\n";
  return failures == 0 ? kOk : kVerificationFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err};
  CLI::App app{"Construct, compile, verify and train 1-Lipschitz gradient-step networks", "lipnet"};
  app.require_subcommand(1);

  std::string spec_path, arch = "unbounded", out_path;
  auto* compile = app.add_subcommand("compile", "Compile a max-min PWA spec into a network");
  compile->add_option("spec", spec_path, "PwaMaxMin JSON file")->required();
  compile->add_option("--arch", arch, "unbounded (G) or fixed (GTilde, width d+3)")
      ->check(CLI::IsMember({"unbounded", "fixed"}));
  compile->add_option("--out", out_path, "Output network JSON")->required();

  std::string net_path, points;
  auto* eval = app.add_subcommand("eval", "Evaluate a network at points");
  eval->add_option("net", net_path, "Network JSON")->required();
  eval->add_option("--points", points, "CSV file or inline list like 1,2;3,4")->required();

  std::string oracle_path, report_path;
  VerifyOptions vopts;
  std::optional<std::uint64_t> seed_opt;
  std::vector<double> box;
  auto* verify = app.add_subcommand("verify", "Audit constraints and sample Lipschitz quotients");
  verify->add_option("net", net_path, "Network JSON")->required();
  verify->add_option("--oracle", oracle_path, "PwaMaxMin spec to compare against");
  verify->add_option("--pairs", vopts.pairs, "Number of sampled pairs")->check(CLI::PositiveNumber);
  verify->add_option("--seed", seed_opt, "Sampling seed (default LIPNET_SEED or 42)");
  verify->add_option("--box", box, "Sampling box bounds: lo hi")->expected(2);
  verify->add_option("--tol", vopts.tol, "Constraint tolerance");
  verify->add_option("--out", report_path, "Also write the report here");

  TrainArgs targs;
  auto* train = app.add_subcommand("train", "Fit a network to a CSV dataset");
  train->add_option("data", targs.data, "CSV with header, inputs then targets")->required();
  train->add_option("--arch", targs.arch, "G, GTilde or Gc (aliases unbounded, fixed)");
  train->add_option("--width", targs.width, "Hidden width h");
  train->add_option("--depth", targs.depth, "Number of residual layers");
  train->add_option("--targets", targs.targets, "Number of target columns");
  train->add_option("--mode", targs.mode, "projected or penalty")->check(CLI::IsMember({"projected", "penalty"}));
  train->add_option("--iters", targs.iters, "Iterations");
  train->add_option("--lr", targs.lr, "Learning rate");
  train->add_option("--momentum", targs.momentum, "Momentum");
  train->add_option("--batch", targs.batch, "Batch size (0 = full batch)");
  train->add_option("--penalty-weight", targs.penalty_weight, "Penalty weight");
  train->add_option("--penalty-samples", targs.penalty_samples, "Penalty points per iteration");
  train->add_flag("--freeze-tau", targs.freeze_tau, "Keep step sizes fixed");
  train->add_option("--seed", seed_opt, "Seed (default LIPNET_SEED or 42)");
  train->add_option("--out", targs.out, "Output network JSON")->required();
  train->add_option("--history", targs.history, "Loss history CSV (default <out>.loss.csv)");

  std::string a_path, b_path, op = "max";
  auto* lattice = app.add_subcommand("lattice", "Pointwise max or min of two G networks");
  lattice->add_option("a", a_path, "First network")->required();
  lattice->add_option("b", b_path, "Second network")->required();
  lattice->add_option("--op", op, "max or min")->check(CLI::IsMember({"max", "min"}));
  lattice->add_option("--out", out_path, "Output network JSON")->required();
  lattice->add_option("--seed", seed_opt, "Spot-check seed");

  std::size_t k = 1;
  auto* sort = app.add_subcommand("sort", "Emit the GroupSort layer stack");
  sort->add_option("--k", k, "Group size")->required();
  sort->add_option("--out", out_path, "Output fragment JSON")->required();
  sort->add_option("--seed", seed_opt, "Seed for random checks when k > 6");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    const std::uint64_t seed = seed_opt ? *seed_opt : default_seed();
    if (*compile) return cmd_compile(ctx, spec_path, arch, out_path);
    if (*eval) return cmd_eval(ctx, net_path, points);
    if (*verify) {
      vopts.seed = seed;
      if (!box.empty()) {
        if (!(box[0] < box[1])) throw UsageError("--box needs lo < hi");
        vopts.box = {box[0], box[1]};
      }
      return cmd_verify(ctx, net_path, oracle_path, vopts, report_path);
    }
    if (*train) {
      targs.seed = seed;
      return cmd_train(ctx, targs);
    }
    if (*lattice) return cmd_lattice(ctx, a_path, b_path, op, out_path, seed);
    if (*sort) return cmd_sort(ctx, k, out_path, seed);
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace lipnet::cli
