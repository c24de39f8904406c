#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fwsec {

struct InjectedInput {
  std::string bytes;            // written verbatim, then a trailing '\n'
  std::uint32_t pace_before_ms = 0;
};

struct ExecSpec {
  std::vector<std::string> argv;  // direct exec; when empty, shell_command runs via /bin/sh -c
  std::string shell_command;
  std::string cwd;
  std::uint32_t run_timeout_ms = 10000;
  std::uint32_t startup_grace_ms = 50;
  std::uint32_t freeze_silence_ms = 5000;
  std::vector<InjectedInput> inputs;
  std::size_t log_cap_bytes = 16 * 1024 * 1024;
};

struct ExecResult {
  enum class Termination {
    exited,         // normal exit, see exit_code
    signaled,       // killed by a signal not sent by the watchdog
    timeout_kill,   // watchdog: run_timeout_ms elapsed
    freeze_kill,    // watchdog: output silent for freeze_silence_ms
    launch_failure, // command could not be started
  };
  Termination termination = Termination::exited;
  int exit_code = 0;
  int term_signal = 0;
  std::string stdout_log;
  std::string stderr_log;
  bool stdout_truncated = false;
  bool stderr_truncated = false;
  std::int64_t duration_ms = 0;  // volatile: never part of digests
  std::vector<std::string> injected;  // inputs fully written before termination
  std::string error;  // populated for launch_failure
};

/// Runs one target process under the output-silence watchdog.
///
/// The child gets its own process group; the watchdog sends SIGTERM to the
/// group at the freeze or timeout deadline and escalates to SIGKILL after
/// 500 ms, so even a signal-ignoring target is reaped well inside the
/// documented 2 s margin. Input injection starts after startup_grace_ms and
/// honors each input's pace_before_ms; stdin is closed after the last one.
/// The silence clock starts at startup_grace_ms, so a freeze kill never
/// happens before startup_grace_ms + freeze_silence_ms.
ExecResult run_process(const ExecSpec& spec);

}  // namespace fwsec
