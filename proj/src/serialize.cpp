#include "lipnet/serialize.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lipnet {

namespace {

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(Vector(m.row(r).begin(), m.row(r).end()));
  return rows;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::invalid_argument(where + ": " + what);
}

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

std::size_t count(const Json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(where, "expected a non-negative integer");
  return j.get<std::size_t>();
}

Vector vector_from(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  Vector v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return v;
}

Matrix matrix_from(const Json& j, std::size_t cols_if_empty, const std::string& where) {
  if (!j.is_array()) fail(where, "expected nested row arrays");
  std::vector<Vector> rows;
  for (std::size_t r = 0; r < j.size(); ++r) {
    rows.push_back(vector_from(j[r], where + "[" + std::to_string(r) + "]"));
    if (rows.back().size() != rows.front().size()) fail(where, "ragged rows");
  }
  if (!rows.empty() && rows.front().size() != cols_if_empty)
    fail(where, "expected " + std::to_string(cols_if_empty) + " columns, got " + std::to_string(rows.front().size()));
  return Matrix::from_rows(rows, cols_if_empty);
}

std::vector<std::size_t> sizes_from(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of block sizes");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(count(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

Json step_json(const GradientStepLayer& s, const char* kind) {
  Json j;
  j["kind"] = kind;
  j["W"] = matrix_json(s.w);
  j["b"] = s.b;
  j["tau"] = s.tau;
  return j;
}

Json affine_json(const char* kind, const Matrix& q, const Vector& offset,
                 const std::vector<std::size_t>* blocks = nullptr) {
  Json j;
  j["kind"] = kind;
  if (blocks) j["blocks"] = *blocks;
  j["W"] = matrix_json(q);
  j["b"] = offset;
  return j;
}

GradientStepLayer step_from(const Json& j, std::size_t h, const std::string& where) {
  GradientStepLayer s;
  s.w = matrix_from(field(j, "W", where), h, where + ".W");
  s.b = vector_from(field(j, "b", where), where + ".b");
  s.tau = number(field(j, "tau", where), where + ".tau");
  if (s.b.size() != s.w.rows()) fail(where, "bias length does not match the number of rows of W");
  return s;
}

std::string kind_of(const Json& j, const std::string& where) {
  const Json& k = field(j, "kind", where);
  if (!k.is_string()) fail(where, "kind must be a string");
  return k.get<std::string>();
}

void expect_kind(const Json& j, const std::string& kind, const std::string& where) {
  const std::string got = kind_of(j, where);
  if (got != kind) fail(where, "expected kind '" + kind + "', got '" + got + "'");
}

}  // namespace

Json to_json(const AnyNetwork& any) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["architecture"] = architecture_name(any);
  std::visit(
      [&j](const auto& net) {
        using T = std::decay_t<decltype(net)>;
        j["d"] = net.d();
        j["h"] = net.h();
        Json layers = Json::array();
        if constexpr (std::is_same_v<T, NetworkGTilde>) {
          const auto blocks = tilde_blocks(net.h());
          layers.push_back(affine_json("block_lift", net.lift.q, net.lift.offset, &blocks));
          for (std::size_t l = 0; l < net.layers.size(); ++l) {
            if (l > 0) {
              const auto& m = net.maps[l - 1];
              layers.push_back(affine_json("block_affine", m.a, m.offset, &m.blocks));
            }
            layers.push_back(step_json(net.layers[l].tail, "tilde_e"));
          }
          j["layers"] = std::move(layers);
          j["head"] = net.head;
        } else {
          layers.push_back(affine_json("lift", net.lift.q, net.lift.offset));
          for (const auto& s : net.steps) layers.push_back(step_json(s, "gradient_step"));
          j["layers"] = std::move(layers);
          if constexpr (std::is_same_v<T, NetworkGc>) {
            j["head"] = matrix_json(net.head);
          } else {
            j["head"] = net.head;
          }
        }
      },
      any);
  return j;
}

AnyNetwork network_from_json(const Json& j) {
  const std::string root = "network";
  const std::size_t version = count(field(j, "format_version", root), "format_version");
  if (version != static_cast<std::size_t>(kFormatVersion))
    fail("format_version", "unsupported version " + std::to_string(version));
  const Json& arch_j = field(j, "architecture", root);
  if (!arch_j.is_string()) fail("architecture", "expected a string");
  const std::string arch = arch_j.get<std::string>();
  const std::size_t d = count(field(j, "d", root), "d");
  const std::size_t h = count(field(j, "h", root), "h");
  const Json& layers = field(j, "layers", root);
  if (!layers.is_array() || layers.empty()) fail("layers", "expected a non-empty array starting with the lift");
  auto at = [](std::size_t i) { return "layers[" + std::to_string(i) + "]"; };

  auto read_affine = [&](const Json& lj, std::size_t rows, std::size_t cols, const std::string& where,
                         Matrix& q, Vector& offset) {
    q = matrix_from(field(lj, "W", where), cols, where + ".W");
    offset = vector_from(field(lj, "b", where), where + ".b");
    if (q.rows() != rows) fail(where, "expected " + std::to_string(rows) + " rows");
    if (offset.size() != rows) fail(where, "offset length must be " + std::to_string(rows));
  };

  if (arch == "G" || arch == "Gc") {
    expect_kind(layers[0], "lift", at(0));
    AffineLift lift;
    read_affine(layers[0], h, d, at(0), lift.q, lift.offset);
    std::vector<GradientStepLayer> steps;
    for (std::size_t i = 1; i < layers.size(); ++i) {
      expect_kind(layers[i], "gradient_step", at(i));
      steps.push_back(step_from(layers[i], h, at(i)));
    }
    if (arch == "G") {
      Vector head = vector_from(field(j, "head", root), "head");
      if (head.size() != h) fail("head", "expected " + std::to_string(h) + " entries");
      return NetworkG{std::move(lift), std::move(steps), std::move(head)};
    }
    Matrix head = matrix_from(field(j, "head", root), h, "head");
    return NetworkGc{std::move(lift), std::move(steps), std::move(head)};
  }

  if (arch == "GTilde") {
    if (h < 3) fail("h", "fixed-width networks need h >= 3");
    const auto blocks = tilde_blocks(h);
    expect_kind(layers[0], "block_lift", at(0));
    NetworkGTilde net;
    read_affine(layers[0], h, d, at(0), net.lift.q, net.lift.offset);
    if (sizes_from(field(layers[0], "blocks", at(0)), at(0) + ".blocks") != blocks)
      fail(at(0), "blocks must be (1, 1, 1, h - 3)");
    for (std::size_t i = 1; i < layers.size(); ++i) {
      const bool want_step = (i % 2) == 1;
      const std::string where = at(i);
      if (want_step) {
        expect_kind(layers[i], "tilde_e", where);
        net.layers.push_back({step_from(layers[i], h - 3, where)});
      } else {
        expect_kind(layers[i], "block_affine", where);
        BlockAffine m;
        m.blocks = sizes_from(field(layers[i], "blocks", where), where + ".blocks");
        if (m.blocks != blocks) fail(where, "blocks must be (1, 1, 1, h - 3)");
        read_affine(layers[i], h, h, where, m.a, m.offset);
        net.maps.push_back(std::move(m));
      }
    }
    if (!net.layers.empty() && net.maps.size() + 1 != net.layers.size())
      fail("layers", "a fixed-width network must end with a tilde_e layer");
    net.head = vector_from(field(j, "head", root), "head");
    if (net.head.size() != h) fail("head", "expected " + std::to_string(h) + " entries");
    return net;
  }
  fail("architecture", "unknown architecture '" + arch + "' (expected G, GTilde or Gc)");
}

Json to_json(const PwaMaxMin& f) {
  Json j;
  j["d"] = f.d;
  Json blocks = Json::array();
  for (const auto& blk : f.blocks) {
    Json planes = Json::array();
    for (const auto& p : blk) {
      Json pj;
      pj["a"] = p.a;
      pj["b"] = p.b;
      planes.push_back(std::move(pj));
    }
    blocks.push_back(std::move(planes));
  }
  j["blocks"] = std::move(blocks);
  return j;
}

PwaMaxMin pwa_from_json(const Json& j) {
  PwaMaxMin f;
  f.d = count(field(j, "d", "spec"), "d");
  const Json& blocks = field(j, "blocks", "spec");
  if (!blocks.is_array()) fail("blocks", "expected an array of blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string bw = "blocks[" + std::to_string(i) + "]";
    if (!blocks[i].is_array()) fail(bw, "expected an array of planes");
    std::vector<AffinePlane> planes;
    for (std::size_t k = 0; k < blocks[i].size(); ++k) {
      const std::string pw = bw + "[" + std::to_string(k) + "]";
      planes.push_back({vector_from(field(blocks[i][k], "a", pw), pw + ".a"),
                        number(field(blocks[i][k], "b", pw), pw + ".b")});
    }
    f.blocks.push_back(std::move(planes));
  }
  return f;
}

Json to_json(const LayerStack& stack) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["architecture"] = "LayerStack";
  j["h"] = stack.width;
  Json layers = Json::array();
  for (const auto& s : stack.layers) layers.push_back(step_json(s, "gradient_step"));
  j["layers"] = std::move(layers);
  return j;
}

LayerStack layer_stack_from_json(const Json& j) {
  const Json& arch = field(j, "architecture", "fragment");
  if (arch != "LayerStack") fail("architecture", "expected 'LayerStack'");
  LayerStack stack;
  stack.width = count(field(j, "h", "fragment"), "h");
  const Json& layers = field(j, "layers", "fragment");
  if (!layers.is_array()) fail("layers", "expected an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = "layers[" + std::to_string(i) + "]";
    expect_kind(layers[i], "gradient_step", where);
    stack.layers.push_back(step_from(layers[i], stack.width, where));
  }
  return stack;
}

Json to_json(const VerificationReport& r) {
  Json j;
  j["architecture"] = r.architecture;
  j["guarantee"] = to_string(r.guarantee);
  Json vs = Json::array();
  for (const auto& v : r.constraint_violations) {
    Json vj;
    vj["location"] = v.location;
    vj["kind"] = v.kind;
    vj["magnitude"] = v.magnitude;
    vs.push_back(std::move(vj));
  }
  j["constraint_violations"] = std::move(vs);
  j["max_lipschitz_quotient"] = r.max_lipschitz_quotient;
  if (r.max_oracle_deviation) {
    j["max_oracle_deviation"] = *r.max_oracle_deviation;
  } else {
    j["max_oracle_deviation"] = nullptr;
  }
  j["samples_used"] = r.samples_used;
  j["seed"] = r.seed;
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

AnyNetwork load_network(const std::filesystem::path& path) {
  return network_from_json(read_json_file(path));
}

void save_network(const std::filesystem::path& path, const AnyNetwork& net) {
  write_text_file(path, dump(to_json(net)));
}

PwaMaxMin load_pwa(const std::filesystem::path& path) {
  PwaMaxMin f = pwa_from_json(read_json_file(path));
  f.check();
  return f;
}

}  // namespace lipnet
