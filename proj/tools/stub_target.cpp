// fwsec-stub: deterministic scriptable stand-in for emulated firmware.
// Interprets a scenario file (docs/stub-target.md) so pipeline behavior is
// reproducible without an RTOS image: it can echo input, emit timing lines,
// print canned diagnostics, crash, or hang on demand.

#include <signal.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fwsec/scenario.hpp"

namespace {

using fwsec::Scenario;
using fwsec::ScenarioDirective;
using Kind = fwsec::ScenarioDirective::Kind;

[[noreturn]] void hang_forever() {
  while (true) pause();
}

[[noreturn]] void crash_now(long long code) {
  if (code < 0) {
    raise(int(-code));
    _exit(125);  // unreachable unless the signal is ignored
  }
  _exit(int(code));
}

struct InputBehavior {
  bool echo = false;
  long long hang_after = -1;          // -1: never
  long long overflow_longer_than = -1;
  long long crash_longer_than = -1;
  long long crash_code = 0;
};

void handle_line(const std::string& line, long long line_no, const InputBehavior& b) {
  if (b.overflow_longer_than >= 0 && (long long)line.size() > b.overflow_longer_than) {
    std::printf("OVERFLOW: input length %zu exceeds %lld\n", line.size(),
                b.overflow_longer_than);
    std::fflush(stdout);
  }
  if (b.crash_longer_than >= 0 && (long long)line.size() > b.crash_longer_than)
    crash_now(b.crash_code);
  if (b.echo) {
    std::fwrite(line.data(), 1, line.size(), stdout);
    std::fputc('\n', stdout);
    std::fflush(stdout);
  }
  if (b.hang_after >= 0 && line_no >= b.hang_after) hang_forever();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: fwsec-stub <scenario-file>\n");
    return 64;
  }
  std::ifstream in(argv[1], std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "fwsec-stub: cannot open %s\n", argv[1]);
    return 66;
  }
  std::stringstream buf;
  buf << in.rdbuf();

  Scenario scenario;
  try {
    scenario = fwsec::parse_scenario(buf.str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fwsec-stub: %s\n", e.what());
    return 65;
  }

  InputBehavior behavior;
  bool hang_at_startup = false;

  // Startup phase: emit output and register input-phase behavior.
  for (const auto& d : scenario.directives) {
    switch (d.kind) {
      case Kind::ignore_signals:
        signal(SIGTERM, SIG_IGN);
        signal(SIGINT, SIG_IGN);
        break;
      case Kind::print:
        std::printf("%s\n", d.text.c_str());
        std::fflush(stdout);
        break;
      case Kind::tick:
        std::printf("TICK task=%s exec_ms=%g deadline_ms=%g\n", d.task.c_str(),
                    d.exec_ms, d.deadline_ms);
        std::fflush(stdout);
        break;
      case Kind::sleep_ms:
        usleep(useconds_t(d.arg0) * 1000);
        break;
      case Kind::crash:
        crash_now(d.arg0);
      case Kind::echo:
        behavior.echo = true;
        break;
      case Kind::hang_after:
        if (d.arg0 == 0)
          hang_at_startup = true;
        else
          behavior.hang_after = d.arg0;
        break;
      case Kind::overflow_if_longer:
        behavior.overflow_longer_than = d.arg0;
        break;
      case Kind::crash_if_longer:
        behavior.crash_longer_than = d.arg0;
        behavior.crash_code = d.arg1;
        break;
    }
  }
  if (hang_at_startup) hang_forever();

  // Input phase: byte-exact line reader ('\n' delimited, NUL-safe).
  std::string line;
  long long line_no = 0;
  char c;
  while (std::fread(&c, 1, 1, stdin) == 1) {
    if (c == '\n') {
      ++line_no;
      handle_line(line, line_no, behavior);
      line.clear();
    } else {
      line.push_back(c);
    }
  }
  if (!line.empty()) {
    ++line_no;
    handle_line(line, line_no, behavior);
  }
  return 0;
}
