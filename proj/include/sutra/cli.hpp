#pragma once

namespace sutra::cli {

// Entry point for the command line tool. Returns a process exit code:
// 0 success, 1 runtime/validation failure, 2 usage error.
int run(int argc, char** argv);

}  // namespace sutra::cli
