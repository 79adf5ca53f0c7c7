#pragma once

#include <string>
#include <vector>

namespace switchcot::cli {

struct Result {
    int exit_code = 0;
    std::string run_dir; // empty for commands that write no run directory
    std::string output; // what the command printed
};

// Executes one CLI invocation in-process; main() forwards argv here.
// Exit codes: 0 success, 1 data or method failure, 2 usage or config error.
Result run(const std::vector<std::string>& args);

} // namespace switchcot::cli
