#ifndef CDK_CLI_HPP
#define CDK_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace cdk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (args excludes the program name). Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cdk::cli

#endif  // CDK_CLI_HPP
