#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace failpass {

struct ProcessOptions {
  std::filesystem::path cwd;                  // empty: inherit
  std::map<std::string, std::string> env;     // added to / overriding the parent env
  bool clear_env = false;                     // start from an empty environment
  std::optional<std::chrono::milliseconds> timeout;
  std::string stdin_data;
  bool interactive = false;  // inherit the caller's stdin/stdout/stderr
};

inline constexpr int kKilledExitStatus = 137;  // 128 + SIGKILL

struct ProcessResult {
  int exit_code = 0;   // 128+signal when terminated by a signal
  bool timed_out = false;
  std::string output;  // stdout and stderr, interleaved
  double wall_seconds = 0;

  bool ok() const noexcept { return exit_code == 0 && !timed_out; }
};

// Runs argv[0] (PATH lookup) in its own process group. On timeout the whole
// group is SIGKILLed and exit_code is kKilledExitStatus. Leftover members of
// the group are killed once the leader exits. Throws Error(io) if the
// process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const ProcessOptions& options = {});

// Whether an executable named `name` is reachable through PATH.
bool has_executable(const std::string& name);

}  // namespace failpass
