#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sip {

/// Runs one CLI invocation; args excludes the program name. Errors are
/// reported on `err` as a single "E_CODE: message" line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sip
