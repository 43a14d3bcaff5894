#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipnet/layers.hpp"
#include "lipnet/pwa.hpp"
#include "lipnet/report.hpp"

namespace lipnet {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

/// Bare sequence of gradient steps on ℝʰ (used for GroupSort fragments).
struct LayerStack {
  std::size_t width = 0;
  std::vector<GradientStepLayer> layers;
};

Json to_json(const AnyNetwork& net);
Json to_json(const PwaMaxMin& f);
Json to_json(const LayerStack& stack);
Json to_json(const VerificationReport& report);

/// Parse errors throw std::invalid_argument with a path-like location.
AnyNetwork network_from_json(const Json& j);
PwaMaxMin pwa_from_json(const Json& j);
LayerStack layer_stack_from_json(const Json& j);

/// Two-space indented dump with a trailing newline.
std::string dump(const Json& j);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

AnyNetwork load_network(const std::filesystem::path& path);
void save_network(const std::filesystem::path& path, const AnyNetwork& net);
/// Parses and checks the plane-norm invariant.
PwaMaxMin load_pwa(const std::filesystem::path& path);

}  // namespace lipnet
