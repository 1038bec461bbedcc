#pragma once

#include <iosfwd>

namespace dropspread::cli {

/// Entry point of the `dropspread` tool. Returns the process exit status:
/// 0 on success, 1 on a runtime error, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dropspread::cli
