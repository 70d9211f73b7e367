#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nlb::cli {

/// Exit code for any reported error.
inline constexpr int kErrorExit = 2;

/// Runs the `nlb` command line (args exclude the program name). The JSON
/// report goes to `out`; usage text and CLI parse errors go to `err`.
/// Returns 0 on success and kErrorExit after emitting an error record.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nlb::cli
