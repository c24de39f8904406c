#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fwsec {

/// Parsed stub-target scenario script. One directive per line; the format
/// is documented bit-exact in docs/stub-target.md.
///
///   echo
///   print <text>
///   tick <task> <exec_ms> [deadline_ms]
///   hang-after <n>
///   crash <code>
///   crash-if-longer <n> <code>
///   overflow-if-longer <n>
///   ignore-signals
///   sleep <ms>
struct ScenarioDirective {
  enum class Kind {
    echo,
    print,
    tick,
    hang_after,
    crash,
    crash_if_longer,
    overflow_if_longer,
    ignore_signals,
    sleep_ms,
  };
  Kind kind;
  std::string text;          // print
  std::string task;          // tick
  double exec_ms = 0.0;      // tick
  double deadline_ms = 10.0; // tick
  std::int64_t arg0 = 0;     // hang-after n / crash code / *-if-longer n / sleep ms
  std::int64_t arg1 = 0;     // crash-if-longer code
};

struct Scenario {
  std::vector<ScenarioDirective> directives;
};

/// Throws std::runtime_error naming the offending line on malformed input.
Scenario parse_scenario(const std::string& text);

}  // namespace fwsec
