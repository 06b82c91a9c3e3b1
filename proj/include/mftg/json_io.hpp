#pragma once

#include <json.hpp>

#include <string>

namespace mftg {

// 17 significant digits: enough to reproduce the double exactly on parse.
// Non-finite values have no JSON number form and come out as quoted strings.
std::string format_double17(double v);

// Deterministic serializer. nlohmann's own dump prints floats in
// shortest-round-trip form; experiment outputs use the fixed 17-digit form
// everywhere so reruns diff byte for byte. Insertion order is preserved,
// scalar-only arrays stay on one line.
std::string dump_json17(const nlohmann::ordered_json& j, int indent = 2);

}  // namespace mftg
