#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace concord {

/// Entry point of the `concord` tool. Returns 0 on success, 1 on invalid
/// input (bad flags, files or options) and 2 on numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace concord
