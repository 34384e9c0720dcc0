#pragma once

/// \file cli.hpp
/// Command-line front end: generate | train | evaluate | study.

#include <iosfwd>
#include <string>
#include <vector>

namespace tsr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 2;
inline constexpr int kExitNumerical = 3;

/// Runs one command; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsr::cli
