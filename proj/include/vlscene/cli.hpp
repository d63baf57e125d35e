#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vlscene {

// Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to err
// as a single line.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Convenience for tests: args exclude the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vlscene
