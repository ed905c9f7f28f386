#pragma once

#include <iosfwd>

namespace kinplan::cli {

/// Runs one subcommand. Returns 0 on success, 1 for configuration and usage
/// errors, 2 for runtime failures; messages go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kinplan::cli
