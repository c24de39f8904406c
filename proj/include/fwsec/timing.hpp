#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fwsec {

/// One execution-time observation for one task, parsed from target logs.
///
/// Instrumented firmware emits lines in the grammar documented in
/// docs/timing-format.md:
///
///   TICK task=<name> exec_ms=<real> deadline_ms=<real>
///   MISSED DEADLINE task=<name> [exec_ms=<real>] [deadline_ms=<real>]
///
/// A MISSED DEADLINE line without an exec value yields a sample imputed at
/// the deadline (a conservative lower bound) and flagged `imputed`.
struct TimingSample {
  std::string task;
  std::uint64_t tick = 0;  // per-task sequence number, in log order
  double exec_ms = 0.0;
  double deadline_ms = 1.0;
  bool missed = false;
  bool imputed = false;
};

struct TaskTiming {
  std::string task;
  std::uint64_t sample_count = 0;
  double wcet_ms = 0.0;      // max exec_ms over the task's samples
  double mean_exec_ms = 0.0;
  double jitter_us = 0.0;    // population standard deviation of exec times
  std::uint64_t deadline_miss_count = 0;
};

/// Per-task aggregation of timing samples. Tasks sorted by name.
struct TimingReport {
  std::vector<TaskTiming> tasks;
  std::uint64_t total_samples = 0;

  const TaskTiming* find(std::string_view task) const;
  std::uint64_t total_deadline_misses() const;
  /// Worst per-task WCET / jitter across the report (0 when empty).
  double max_wcet_ms() const;
  double max_jitter_us() const;
};

struct TimingParse {
  std::vector<TimingSample> samples;
  std::uint64_t warnings = 0;  // lines that looked like timing but had bad fields
};

/// Tolerant scan of a target log for timing lines. Non-matching lines are
/// ignored; malformed numeric fields skip the line and count a warning.
TimingParse parse_timing_log(std::string_view log);

/// Aggregates samples per task. Tasks with zero samples are omitted; a
/// single-sample task has jitter 0. Uses Welford accumulation (the test
/// suite checks it against a direct two-pass computation).
TimingReport compute_report(const std::vector<TimingSample>& samples);

}  // namespace fwsec
