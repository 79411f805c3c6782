#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xlg {

/// Entry point of the `xlg` tool. Returns the process exit code; diagnostics
/// go to `err`, human-readable results to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xlg
