#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deepsom::cli {

/// Entry point of the `deepsom` tool. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deepsom::cli
