#ifndef QMDPNET_CLI_HPP
#define QMDPNET_CLI_HPP

namespace qmdpnet {

// Entry point for the command-line tool. Subcommands:
// gen | train | eval | solve | transfer | viz | gradcheck.
// Returns 0 on success, 1 on runtime errors, 2 on configuration errors.
int run_cli(int argc, const char* const* argv);

}  // namespace qmdpnet

#endif
