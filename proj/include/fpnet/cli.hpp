#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fpnet {

/// Parses `args` (without the program name) and dispatches one subcommand:
/// run, sweep, preset, validate-params, certify, fixpoint. Errors print a
/// single `error <code>: <message>` line on `err`. Returns the exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "3", "1,4,9" or "1-20".
std::vector<unsigned long long> parse_seed_list(const std::string& spec);

}  // namespace fpnet
