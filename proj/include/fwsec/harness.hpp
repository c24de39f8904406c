#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fwsec/digest.hpp"
#include "fwsec/process.hpp"

namespace fwsec {

enum class TargetKind { external_command, stub_target };

/// How to build and execute one candidate firmware image.
///
/// `external-command` wraps any emulator invocation (a QEMU image, a
/// container, a local binary) through shell commands executed inside the
/// materialized source tree. `stub-target` runs the bundled deterministic
/// stub against a scenario script inside the tree, which makes the whole
/// pipeline testable offline.
struct TargetConfig {
  TargetKind kind = TargetKind::stub_target;
  std::string build_command;               // external-command: shell command
  std::string run_command = "scenario.stub";  // external: shell; stub: scenario path in tree
  std::string stub_binary;                 // stub-target: path to the fwsec-stub executable
  std::uint32_t startup_grace_ms = 50;
  std::uint32_t run_timeout_ms = 5000;
  std::uint32_t freeze_silence_ms = 1000;
  std::uint32_t build_timeout_ms = 60000;
  std::uint32_t input_pacing_ms = 20;
  bool stdin_injectable = true;
  std::size_t log_cap_bytes = 16 * 1024 * 1024;

  /// Enforces run_timeout_ms > startup_grace_ms and
  /// freeze_silence_ms < run_timeout_ms. Throws std::invalid_argument.
  void validate() const;
};

enum class ExitStatus { clean_exit, timeout_kill, freeze_kill, crash };

std::string to_string(ExitStatus s);
ExitStatus exit_status_from_string(std::string_view s);

struct RunResult {
  ExitStatus exit_status = ExitStatus::clean_exit;
  int crash_code = 0;    // nonzero process exit
  int crash_signal = 0;  // fatal signal, when not exited
  std::string stdout_log;
  std::string stderr_log;
  std::int64_t duration_ms = 0;  // volatile: excluded from digests
  std::uint32_t freeze_silence_ms = 0;  // watchdog setting in effect
  std::vector<std::string> injected_inputs;
};

enum class BuildFailureClass { missing_context, logical_inconsistency, unclassified };

std::string to_string(BuildFailureClass c);

struct BuildResult {
  bool success = false;
  std::string compiler_log;
  std::optional<BuildFailureClass> failure_class;  // set iff !success
};

/// A built (or validated) firmware image rooted in a scratch directory.
struct BuildArtifact {
  std::filesystem::path dir;
  std::string tree_ref;
};

/// Rejects absolute paths and any path with a "..", "." or empty component.
/// Throws std::runtime_error on escape.
void validate_tree_path(const std::string& path);

/// Writes the tree under `dir`; every path is validated first.
void materialize_tree(const SourceTree& tree, const std::filesystem::path& dir);

struct FailurePattern {
  BuildFailureClass cls;
  std::string regex;
};
using FailurePatternTable = std::vector<FailurePattern>;

FailurePatternTable load_failure_patterns(const std::string& path);
/// Table bundled under data/build_failure_patterns.default.
const FailurePatternTable& default_failure_patterns();

/// Scans the table top to bottom; first matching pattern decides.
BuildFailureClass classify_build_failure(const std::string& compiler_log,
                                         const FailurePatternTable& table);
BuildFailureClass classify_build_failure(const std::string& compiler_log);

/// Materializes the tree into `scratch` and builds it. For stub targets the
/// "build" validates the scenario script named by run_command. A shell-level
/// command-not-found (exit 127) is an environment error and throws.
BuildResult build_target(const SourceTree& tree, const TargetConfig& config,
                         const std::filesystem::path& scratch, BuildArtifact* artifact);

/// Executes the artifact with the given inputs under the watchdog.
/// Throws std::invalid_argument when inputs are supplied but the target is
/// not stdin-injectable, and std::runtime_error on launch failure.
RunResult run_target(const BuildArtifact& artifact, const TargetConfig& config,
                     const std::vector<InjectedInput>& inputs);

}  // namespace fwsec
