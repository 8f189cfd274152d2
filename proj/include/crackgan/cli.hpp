#pragma once

#include <string>
#include <vector>

namespace crackgan {

// Command-line entry point. Exit codes: 0 success, 1 configuration error,
// 2 runtime or numeric failure.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace crackgan
