#ifndef VEDGE_CLI_HPP_
#define VEDGE_CLI_HPP_

namespace vedge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// Subcommands: gen, train, eval, compare.
int run(int argc, char** argv);

}  // namespace vedge::cli

#endif  // VEDGE_CLI_HPP_
