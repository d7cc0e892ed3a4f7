#pragma once

namespace jointqa::cli {

/// Parses subcommands and executes them. Returns a process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace jointqa::cli
