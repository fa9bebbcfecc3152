#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tutoreval::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Parses and runs one command. `args` excludes the program name. Errors are
/// reported on `err` as "error: category=<Category> message=<text>".
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tutoreval::cli
