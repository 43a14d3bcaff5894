#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lipnet/constructions.hpp"
#include "lipnet/serialize.hpp"
#include "lipnet/train.hpp"
#include "support.hpp"

using namespace lipnet;
using namespace lipnet::testing;

namespace {

AnyNetwork round_trip(const AnyNetwork& net) {
  return network_from_json(Json::parse(dump(to_json(net))));
}

std::string error_of(const std::string& text) {
  try {
    network_from_json(Json::parse(text));
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("networks round-trip bit-exactly") {
  Rng rng(41);
  const PwaMaxMin f = random_pwa(rng, 3, 3, 3);
  const AnyNetwork g = compile_pwa_unbounded(f).net;
  const AnyNetwork t = compile_pwa_fixed_width(f);
  const AnyNetwork c = stack_multivalued({std::get<NetworkG>(g), std::get<NetworkG>(g)});
  for (const AnyNetwork& net : {g, t, c}) CHECK(round_trip(net) == net);

  // Random values with full mantissas.
  for (const char* arch : {"G", "GTilde", "Gc"}) {
    const AnyNetwork net = init_network(arch, 2, 5, 3, 7, 2);
    CHECK(round_trip(net) == net);
  }
  const AnyNetwork empty = compile_pwa_unbounded(PwaMaxMin{1, {{{{0.5}, 0.1}}}}).net;
  CHECK(round_trip(empty) == empty);
}

TEST_CASE("network document layout") {
  const Json j = to_json(AnyNetwork(max_of_coords_network(2)));
  CHECK(j["format_version"] == 1);
  CHECK(j["architecture"] == "G");
  CHECK(j["d"] == 2);
  CHECK(j["h"] == 2);
  CHECK(j["layers"][0]["kind"] == "lift");
  CHECK(j["layers"][1]["kind"] == "gradient_step");
  CHECK(j["layers"][1]["tau"] == 2.0);
  const std::string text = dump(j);
  CHECK(text.back() == '\n');
  CHECK(text.find("\n  \"architecture\"") != std::string::npos);

  const Json tj = to_json(AnyNetwork(compile_pwa_fixed_width(PwaMaxMin{1, {{{{1.0}, 0.0}}, {{{-1.0}, 0.0}}}})));
  CHECK(tj["layers"][0]["kind"] == "block_lift");
  CHECK(tj["layers"][0]["blocks"] == Json::array({1, 1, 1, 1}));
  CHECK(tj["layers"][1]["kind"] == "tilde_e");
}

TEST_CASE("malformed networks are rejected with a location") {
  Json j = to_json(AnyNetwork(max_of_coords_network(2)));
  Json bad = j;
  bad["layers"][1].erase("tau");
  CHECK(error_of(bad.dump()).find("layers[1]") != std::string::npos);
  CHECK(error_of(bad.dump()).find("tau") != std::string::npos);

  bad = j;
  bad["format_version"] = 2;
  CHECK(error_of(bad.dump()).find("format_version") != std::string::npos);

  bad = j;
  bad["architecture"] = "H";
  CHECK(error_of(bad.dump()).find("unknown architecture") != std::string::npos);

  bad = j;
  bad["layers"][1]["W"] = Json::array({Json::array({1.0})});
  CHECK(error_of(bad.dump()).find("layers[1].W") != std::string::npos);

  bad = j;
  bad["head"] = Json::array({1.0});
  CHECK(error_of(bad.dump()).find("head") != std::string::npos);

  bad = j;
  bad["layers"][1]["kind"] = "lift";
  CHECK(error_of(bad.dump()).find("expected kind 'gradient_step'") != std::string::npos);
}

TEST_CASE("infeasible values still parse") {
  NetworkG net = max_of_coords_network(2);
  net.steps[0].tau = 3.0;
  const AnyNetwork back = round_trip(net);
  CHECK(std::get<NetworkG>(back).steps[0].tau == 3.0);
  CHECK_FALSE(validate(back).constraints_ok());
}

TEST_CASE("pwa specs and layer stacks") {
  Rng rng(42);
  const PwaMaxMin f = random_pwa(rng, 4, 3, 4);
  const PwaMaxMin back = pwa_from_json(Json::parse(dump(to_json(f))));
  CHECK(back.d == f.d);
  REQUIRE(back.blocks.size() == f.blocks.size());
  for (std::size_t i = 0; i < f.blocks.size(); ++i) {
    REQUIRE(back.blocks[i].size() == f.blocks[i].size());
    for (std::size_t k = 0; k < f.blocks[i].size(); ++k) {
      CHECK(back.blocks[i][k].a == f.blocks[i][k].a);
      CHECK(back.blocks[i][k].b == f.blocks[i][k].b);
    }
  }
  CHECK_THROWS_WITH_AS(pwa_from_json(Json::parse(R"({"d":1,"blocks":[[{"a":[1]}]]})")),
                       doctest::Contains("blocks[0][0]"), std::invalid_argument);

  const LayerStack s{4, groupsort_layers(4)};
  const LayerStack s2 = layer_stack_from_json(Json::parse(dump(to_json(s))));
  CHECK(s2.width == 4);
  CHECK(s2.layers == s.layers);
  const LayerStack none = layer_stack_from_json(to_json(LayerStack{1, {}}));
  CHECK(none.layers.empty());
}

TEST_CASE("report key order") {
  VerificationReport r;
  r.architecture = "G";
  r.guarantee = Guarantee::kConstructive;
  r.constraint_violations.push_back({"steps[0]", "tau_range", 1.0});
  r.samples_used = 10;
  r.seed = 3;
  const Json j = to_json(r);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"architecture", "guarantee", "constraint_violations",
                                         "max_lipschitz_quotient", "max_oracle_deviation",
                                         "samples_used", "seed"});
  CHECK(j["max_oracle_deviation"].is_null());
  r.max_oracle_deviation = 0.0;
  CHECK(to_json(r)["max_oracle_deviation"] == 0.0);
}

TEST_CASE("file helpers") {
  const auto dir = std::filesystem::temp_directory_path() / "lipnet_test_serialize";
  std::filesystem::create_directories(dir);
  const AnyNetwork net = max_of_coords_network(3);
  save_network(dir / "n.json", net);
  CHECK(load_network(dir / "n.json") == net);

  write_text_file(dir / "bad.json", "{\n  \"d\": 1,\n  oops\n}\n");
  CHECK_THROWS_WITH_AS(read_json_file(dir / "bad.json"), doctest::Contains("line 3"), std::invalid_argument);
  CHECK_THROWS(read_json_file(dir / "missing.json"));

  write_text_file(dir / "spec.json", R"({"d":1,"blocks":[[{"a":[1.2],"b":0}]]})");
  CHECK_THROWS_WITH_AS(load_pwa(dir / "spec.json"), doctest::Contains("block 0, plane 0"), std::invalid_argument);
  std::filesystem::remove_all(dir);
}
