#pragma once

#include <json.hpp>

namespace navforge {

// Insertion-ordered JSON: manifests emit keys in a fixed, documented order.
using Json = nlohmann::ordered_json;

}  // namespace navforge
