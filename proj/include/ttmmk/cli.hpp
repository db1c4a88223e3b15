#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ttmmk {

/// Runs the `ttmmk` command line. Returns the process exit code; failures
/// print one `error: code=<name> message=<text>` line to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Percent with four significant digits, e.g. 0.95 -> "95.00".
std::string format_percent(double fraction);

}  // namespace ttmmk
