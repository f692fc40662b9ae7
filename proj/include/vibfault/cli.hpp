#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vibfault::cli {

// Runs one CLI invocation. Returns the process exit code: 0 success,
// 1 validation error, 2 IO error. Streams default to std::cout/std::cerr.
int run(const std::vector<std::string>& args);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

} // namespace vibfault::cli
