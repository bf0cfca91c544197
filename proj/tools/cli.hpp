#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace regionvad::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one subcommand. `args` excludes the program name. The JSON summary
/// goes to `out`, log lines to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Names of every configuration key, each also accepted as `--key value`.
std::vector<std::string> config_keys();

}  // namespace regionvad::cli
