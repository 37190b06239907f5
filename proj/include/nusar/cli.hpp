#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nusar {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitAcceptance = 2;

/// args[0] is the program name. Returns 0 on pass, 2 on an acceptance
/// failure and 1 on usage or config errors.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace nusar
