#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dualnlu/config.hpp"

namespace dualnlu::runner {

struct Invocation {
  std::string subcommand;  // prepare | train | eval | generate | significance
  std::string config_path;
  std::vector<std::string> overrides;  // key=value, applied after the file
};

// Runs one subcommand end to end; human-readable progress goes to `out`.
// Exit codes: 0 success, 1 invalid configuration, 2 bad or missing data,
// 3 any other failure.
int execute(const Invocation& inv, std::ostream& out);

}  // namespace dualnlu::runner
