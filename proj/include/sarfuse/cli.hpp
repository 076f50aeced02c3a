#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sarfuse {

inline constexpr const char* kVersion = "1.0.0";

/// Entry point of the command-line tool. Returns 0 on success, 2 on validation
/// failures (bad arguments, malformed inputs), 3 on runtime failures.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sarfuse
