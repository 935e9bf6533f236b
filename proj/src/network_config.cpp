#include "hashlab/network_config.hpp"

#include <sstream>

#include "hashlab/ini.hpp"

namespace hashlab {

namespace {

Index resolve_extent(const IniSection& section, const std::string& key, Index slice_width,
                     std::optional<Index> bits, Index fallback) {
  const auto raw = section.find(key);
  if (!raw) return fallback;
  if (*raw == "hash") {
    if (!bits) throw ConfigError(section.name + "." + key + ": 'hash' needs a bit count");
    return slice_width * *bits;
  }
  return static_cast<Index>(section.get_int(key, fallback));
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

NetworkSpec parse_network_spec(const std::string& text, std::optional<Index> bits) {
  const IniDocument doc = parse_ini(text);
  const IniSection* header = doc.section("network");
  if (!header) throw ConfigError("network config needs a [network] section");
  const auto input = header->find("input");
  if (!input) throw ConfigError("network.input is required");

  NetworkSpec spec;
  spec.input_shape = parse_shape(*input, "network.input");
  const Index slice_width = static_cast<Index>(header->get_int("slice_width", 50));
  if (slice_width < 1) throw ConfigError("network.slice_width must be >= 1");
  if (header->find("output")) {
    spec.output_length = resolve_extent(*header, "output", slice_width, bits, 0);
  }

  for (const auto& section : doc.sections) {
    if (section.name == "network") continue;
    const auto kind = section.find("kind");
    if (!kind) throw ConfigError(section.name + ".kind is required");
    LayerSpec layer;
    layer.kind = parse_layer_kind(*kind);
    layer.kernel = static_cast<Index>(section.get_int("kernel", 1));
    layer.stride = static_cast<Index>(section.get_int("stride", 1));
    layer.pad = static_cast<Index>(section.get_int("pad", 0));
    layer.channels = resolve_extent(section, "channels", slice_width, bits, 0);
    layer.rounding = parse_rounding(section.get("rounding", "floor"));
    layer.beta = section.get_double("beta", 1.0);
    layer.epsilon = section.get_double("epsilon", 0.5);
    if (layer.kernel < 1 || layer.stride < 1 || layer.pad < 0) {
      throw ConfigError(section.name + ": kernel and stride must be >= 1 and pad >= 0");
    }
    if (has_params(layer.kind) && layer.channels < 1) {
      throw ConfigError(section.name + ".channels must be >= 1");
    }
    if (layer.kind == LayerKind::sigmoid && !(layer.beta > 0)) {
      throw ConfigError(section.name + ".beta must be positive");
    }
    if (layer.kind == LayerKind::piecewise_threshold && !(layer.epsilon > 0 && layer.epsilon <= 0.5)) {
      throw ConfigError(section.name + ".epsilon must lie in (0, 0.5]");
    }
    spec.layers.push_back(layer);
  }
  return spec;
}

NetworkSpec load_network_spec(const std::filesystem::path& path, std::optional<Index> bits) {
  const IniDocument doc = read_ini(path);
  return parse_network_spec(format_ini(doc), bits);
}

std::string format_network_spec(const NetworkSpec& spec) {
  IniDocument doc;
  auto& header = doc.section_or_add("network");
  header.set("input", format_int_list({spec.input_shape.begin(), spec.input_shape.end()}));
  if (spec.output_length) header.set("output", std::to_string(*spec.output_length));
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    auto& s = doc.section_or_add("layer" + std::to_string(i + 1));
    s.set("kind", std::string(to_string(l.kind)));
    s.set("kernel", std::to_string(l.kernel));
    s.set("stride", std::to_string(l.stride));
    s.set("pad", std::to_string(l.pad));
    s.set("channels", std::to_string(l.channels));
    s.set("rounding", std::string(to_string(l.rounding)));
    s.set("beta", format_double(l.beta));
    s.set("epsilon", format_double(l.epsilon));
  }
  return format_ini(doc);
}

}  // namespace hashlab
