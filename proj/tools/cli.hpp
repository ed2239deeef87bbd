#pragma once

#include <iosfwd>

namespace labelforge {

/// Runs one CLI invocation. Returns 0 on success, 1 on a domain error and
/// 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace labelforge
