#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace minispn {

// Entry point of the `spn` tool; args exclude the program name.
// Exit codes: 0 ok, 1 I/O, schema or learning failure, 2 bad usage.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace minispn
