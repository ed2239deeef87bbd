#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace labelforge::detail {

/// Splits one CSV record. Handles double-quoted fields with "" escapes;
/// embedded newlines are not supported.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field only when it needs quoting.
std::string csv_field(std::string_view value);

std::string trim(std::string_view text);

}  // namespace labelforge::detail
