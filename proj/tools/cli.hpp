#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cnmt::cli {

/// Runs one command line (without the program name). Returns 0 on success,
/// 1 on I/O, parse or model errors and 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cnmt::cli
