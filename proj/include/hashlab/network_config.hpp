#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "hashlab/network.hpp"

namespace hashlab {

/// Text form of a NetworkSpec:
///
///   [network]
///   input = 3,224,224
///   slice_width = 50
///   output = hash
///
///   [conv1]
///   kind = conv
///   kernel = 11
///   stride = 4
///   pad = 0
///   channels = 96
///   rounding = floor
///
/// Every section other than [network] is one layer, in file order. `channels`
/// and `output` accept "hash", meaning slice_width * bits. Inline comments are
/// not supported.
/// Element-wise layers take `beta` (sigmoid) or `epsilon` (threshold).
/// `bits` resolves the "hash" placeholder; it is required only when the text uses it.
NetworkSpec parse_network_spec(const std::string& text, std::optional<Index> bits = std::nullopt);
NetworkSpec load_network_spec(const std::filesystem::path& path,
                              std::optional<Index> bits = std::nullopt);

/// Fully resolved text; parse_network_spec(format_network_spec(s)) == s.
std::string format_network_spec(const NetworkSpec& spec);

}  // namespace hashlab
