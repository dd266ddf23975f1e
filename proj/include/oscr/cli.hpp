#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oscr {

/// Exit codes of the `oscr` tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInput = 2;

/// Runs the command line (args[0] is the program name). Errors are reported
/// as one line "error: <Code>: <message>" on `err`.
int cli_main(std::vector<std::string> const& args, std::ostream& out, std::ostream& err);

/// Applies OSCR_LOG (error, warn, info, debug) to the process logger.
void configure_logging();

}  // namespace oscr
