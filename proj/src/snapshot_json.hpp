#pragma once

#include <json.hpp>

#include "labelforge/report.hpp"

namespace labelforge::detail {

using Json = nlohmann::ordered_json;

Json to_json(const ScanSnapshot& snapshot);
/// Throws Error on structural problems; does not run consistency checks.
ScanSnapshot snapshot_from_json(const Json& object);

}  // namespace labelforge::detail
