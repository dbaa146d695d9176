#pragma once

namespace advrl {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_runtime = 2, exit_failed_pretrain = 3 };

/// Entry point of the `advrl` tool; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace advrl
