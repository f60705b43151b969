#pragma once

#include "mfnet/network.hpp"

#include <json.hpp>

#include <filesystem>

namespace mfnet {

/// Network description:
///   {"nodes":   [{"name": "A", "colors": ["BA", "A"]}, ...],   // priority order
///    "gamma":   {"A.BA": 2.0, ...},
///    "routing": {"A.BA": {"O.O": 1.0}, ...}}
/// Rows missing from "routing" are all-zero (validate_network reports them).
ElementaryNetwork network_from_json(const nlohmann::json& doc);
nlohmann::json network_to_json(const ElementaryNetwork& net);

/// Throws ParseError naming the path (and line/column for syntax errors).
ElementaryNetwork load_network(const std::filesystem::path& path);

} // namespace mfnet
