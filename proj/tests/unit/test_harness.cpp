#include <chrono>

#include "doctest.h"
#include "fwsec/harness.hpp"
#include "fwsec/scenario.hpp"
#include "support.hpp"

using namespace fwsec;
using fwsec_test::TempDir;

namespace {

TargetConfig stub_config() {
  TargetConfig config;
  config.kind = TargetKind::stub_target;
  config.stub_binary = fwsec_test::stub_binary();
  config.run_command = "scenario.stub";
  config.startup_grace_ms = 20;
  config.run_timeout_ms = 2500;
  config.freeze_silence_ms = 300;
  config.input_pacing_ms = 2;
  return config;
}

BuildArtifact build_stub(const TempDir& tmp, const std::string& scenario,
                         const TargetConfig& config) {
  SourceTree tree{{"scenario.stub", scenario}};
  BuildArtifact artifact;
  BuildResult result = build_target(tree, config, tmp.path() / "scratch", &artifact);
  REQUIRE(result.success);
  return artifact;
}

std::vector<InjectedInput> lines(std::initializer_list<std::string> inputs,
                                 std::uint32_t pace = 2) {
  std::vector<InjectedInput> out;
  for (const auto& s : inputs) out.push_back({s, pace});
  return out;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config invariants") {
  TargetConfig config = stub_config();
  CHECK_NOTHROW(config.validate());
  config.freeze_silence_ms = config.run_timeout_ms;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = stub_config();
  config.run_timeout_ms = config.startup_grace_ms;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("scenario parser accepts the documented directives") {
  Scenario s = parse_scenario(
      "# startup\nprint hello\ntick Net 2.5 10\nsleep 5\necho\nhang-after 3\n"
      "crash-if-longer 32 9\noverflow-if-longer 16\nignore-signals\n");
  CHECK(s.directives.size() == 8);
  CHECK_THROWS_AS(parse_scenario("warp 9\n"), std::runtime_error);
  CHECK_THROWS_AS(parse_scenario("tick Net\n"), std::runtime_error);
  CHECK_THROWS_AS(parse_scenario("hang-after minus\n"), std::runtime_error);
}

TEST_CASE("materialize rejects escaping paths") {
  TempDir tmp;
  CHECK_THROWS_AS(materialize_tree({{"../evil", "x"}}, tmp.path() / "t"),
                  std::runtime_error);
  CHECK_THROWS_AS(materialize_tree({{"/abs", "x"}}, tmp.path() / "t"), std::runtime_error);
  CHECK_THROWS_AS(materialize_tree({{"a/./b", "x"}}, tmp.path() / "t"), std::runtime_error);
  CHECK_NOTHROW(materialize_tree({{"sub/dir/file.c", "x"}}, tmp.path() / "t"));
}

TEST_CASE("echo stub echoes inputs and exits cleanly") {
  TempDir tmp;
  TargetConfig config = stub_config();
  BuildArtifact artifact = build_stub(tmp, "echo\n", config);
  RunResult run = run_target(artifact, config, lines({"abc"}));
  CHECK(run.exit_status == ExitStatus::clean_exit);
  CHECK(run.stdout_log.find("abc") != std::string::npos);
  CHECK(run.injected_inputs.size() == 1);
}

TEST_CASE("scripted deadline line is captured verbatim") {
  TempDir tmp;
  TargetConfig config = stub_config();
  BuildArtifact artifact = build_stub(tmp, "print MISSED DEADLINE task=Net\n", config);
  RunResult run = run_target(artifact, config, {});
  CHECK(run.stdout_log.find("MISSED DEADLINE task=Net") != std::string::npos);
  CHECK(run.exit_status == ExitStatus::clean_exit);
}

TEST_CASE("print-then-hang is freeze-killed after grace plus silence") {
  TempDir tmp;
  TargetConfig config = stub_config();
  BuildArtifact artifact = build_stub(tmp, "print booted\nhang-after 0\n", config);
  RunResult run = run_target(artifact, config, {});
  CHECK(run.exit_status == ExitStatus::freeze_kill);
  CHECK(run.stdout_log.find("booted") != std::string::npos);
  CHECK(run.duration_ms >= config.startup_grace_ms + config.freeze_silence_ms);
}

TEST_CASE("freeze kill implies observed silence at least freeze_silence_ms") {
  TempDir tmp;
  TargetConfig config = stub_config();
  // Emits output, then goes quiet while still consuming input slowly.
  BuildArtifact artifact = build_stub(tmp, "print alive\nhang-after 1\n", config);
  RunResult run = run_target(artifact, config, lines({"one", "two", "three"}));
  CHECK(run.exit_status == ExitStatus::freeze_kill);
}

TEST_CASE("crash directive maps to crash status with the exit code") {
  TempDir tmp;
  TargetConfig config = stub_config();
  BuildArtifact artifact = build_stub(tmp, "crash 7\n", config);
  RunResult run = run_target(artifact, config, {});
  CHECK(run.exit_status == ExitStatus::crash);
  CHECK(run.crash_code == 7);
}

TEST_CASE("negative crash code raises the signal") {
  TempDir tmp;
  TargetConfig config = stub_config();
  BuildArtifact artifact = build_stub(tmp, "crash -6\n", config);  // SIGABRT
  RunResult run = run_target(artifact, config, {});
  CHECK(run.exit_status == ExitStatus::crash);
  CHECK(run.crash_signal == 6);
}

TEST_CASE("crash-if-longer reacts to oversized input only") {
  TempDir tmp;
  TargetConfig config = stub_config();
  BuildArtifact artifact = build_stub(tmp, "echo\ncrash-if-longer 8 11\n", config);
  RunResult ok = run_target(artifact, config, lines({"short"}));
  CHECK(ok.exit_status == ExitStatus::clean_exit);
  RunResult crashed = run_target(artifact, config, lines({"a-very-long-line"}));
  CHECK(crashed.exit_status == ExitStatus::crash);
  CHECK(crashed.crash_code == 11);
}

TEST_CASE("ignore-signals hang is reaped within the timeout margin") {
  TempDir tmp;
  TargetConfig config = stub_config();
  config.run_timeout_ms = 250;
  config.freeze_silence_ms = 150;
  BuildArtifact artifact = build_stub(tmp, "ignore-signals\nprint up\nhang-after 0\n",
                                      config);
  for (int rep = 0; rep < 3; ++rep) {
    auto started = std::chrono::steady_clock::now();
    RunResult run = run_target(artifact, config, {});
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    CHECK(run.exit_status == ExitStatus::freeze_kill);
    CHECK(elapsed <= config.run_timeout_ms + 2000);
  }
}

TEST_CASE("inputs rejected when target is not stdin-injectable") {
  TempDir tmp;
  TargetConfig config = stub_config();
  config.stdin_injectable = false;
  BuildArtifact artifact = build_stub(tmp, "echo\n", config);
  CHECK_THROWS_AS(run_target(artifact, config, lines({"x"})), std::invalid_argument);
  CHECK_NOTHROW(run_target(artifact, config, {}));
}

TEST_CASE("log cap truncates with a marker but keeps running") {
  TempDir tmp;
  TargetConfig config = stub_config();
  config.log_cap_bytes = 256;
  std::string scenario;
  for (int i = 0; i < 64; ++i) scenario += "print 0123456789abcdef-" + std::to_string(i) + "\n";
  BuildArtifact artifact = build_stub(tmp, scenario, config);
  RunResult run = run_target(artifact, config, {});
  CHECK(run.exit_status == ExitStatus::clean_exit);
  CHECK(run.stdout_log.find("[fwsec: log truncated at cap]") != std::string::npos);
  CHECK(run.stdout_log.size() < 512);
}

TEST_CASE("classification table: canned diagnostics") {
  CHECK(classify_build_failure("undefined reference to `xSemaphoreCreateMutex'") ==
        BuildFailureClass::missing_context);
  CHECK(classify_build_failure("main.c:4:5: error: conflicting types for 'parse_msg'") ==
        BuildFailureClass::logical_inconsistency);
  CHECK(classify_build_failure("main.c:9:1: error: unknown type name 'QueueHandle_t'") ==
        BuildFailureClass::missing_context);
  CHECK(classify_build_failure("something inscrutable happened") ==
        BuildFailureClass::unclassified);
  CHECK_THROWS_AS(classify_build_failure(""), std::invalid_argument);
}

TEST_CASE("real compiler: missing declaration classifies as missing-context") {
  TempDir tmp;
  SourceTree tree{{"main.c",
                   "int main(void) {\n  frobnicate(42);\n  return 0;\n}\n"}};
  TargetConfig config;
  config.kind = TargetKind::external_command;
  config.build_command = "cc -Werror=implicit-function-declaration -c main.c -o main.o";
  config.run_command = "./main";
  config.startup_grace_ms = 10;
  config.run_timeout_ms = 1000;
  config.freeze_silence_ms = 500;
  BuildResult result = build_target(tree, config, tmp.path() / "b", nullptr);
  CHECK_FALSE(result.success);
  REQUIRE(result.failure_class.has_value());
  CHECK(*result.failure_class == BuildFailureClass::missing_context);
}

TEST_CASE("real compiler: conflicting types classify as logical-inconsistency") {
  TempDir tmp;
  SourceTree tree{{"main.c",
                   "int parse_msg(int x);\n"
                   "double parse_msg(double x) { return x; }\n"
                   "int main(void) { return 0; }\n"}};
  TargetConfig config;
  config.kind = TargetKind::external_command;
  config.build_command = "cc -c main.c -o main.o";
  config.run_command = "./main";
  config.startup_grace_ms = 10;
  config.run_timeout_ms = 1000;
  config.freeze_silence_ms = 500;
  BuildResult result = build_target(tree, config, tmp.path() / "b", nullptr);
  CHECK_FALSE(result.success);
  REQUIRE(result.failure_class.has_value());
  CHECK(*result.failure_class == BuildFailureClass::logical_inconsistency);
}

TEST_CASE("external-command target: compile, run, inject, capture") {
  TempDir tmp;
  SourceTree tree{{"main.c",
                   "#include <stdio.h>\n"
                   "#include <string.h>\n"
                   "int main(void) {\n"
                   "  printf(\"TICK task=Main exec_ms=2 deadline_ms=10\\n\");\n"
                   "  fflush(stdout);\n"
                   "  char buf[256];\n"
                   "  while (fgets(buf, sizeof buf, stdin)) {\n"
                   "    unsigned long len = (unsigned long)strcspn(buf, \"\\n\");\n"
                   "    fwrite(buf, 1, len, stdout);\n"
                   "    fputc('\\n', stdout);\n"
                   "    fflush(stdout);\n"
                   "  }\n"
                   "  return 0;\n"
                   "}\n"}};
  TargetConfig config;
  config.kind = TargetKind::external_command;
  config.build_command = "cc -O1 -o fw main.c";
  config.run_command = "./fw";
  config.startup_grace_ms = 20;
  config.run_timeout_ms = 3000;
  config.freeze_silence_ms = 800;
  config.input_pacing_ms = 2;

  BuildArtifact artifact;
  BuildResult build = build_target(tree, config, tmp.path() / "b", &artifact);
  REQUIRE(build.success);

  RunResult run = run_target(artifact, config, lines({"frame-one", "frame-two"}));
  CHECK(run.exit_status == ExitStatus::clean_exit);
  CHECK(run.stdout_log.find("TICK task=Main") != std::string::npos);
  CHECK(run.stdout_log.find("frame-one") != std::string::npos);
  CHECK(run.stdout_log.find("frame-two") != std::string::npos);
}

TEST_CASE("command-not-found is an environment error, not a compile failure") {
  TempDir tmp;
  SourceTree tree{{"main.c", "int main(void){return 0;}\n"}};
  TargetConfig config;
  config.kind = TargetKind::external_command;
  config.build_command = "definitely-not-a-real-compiler main.c";
  config.run_command = "./a.out";
  config.startup_grace_ms = 10;
  config.run_timeout_ms = 1000;
  config.freeze_silence_ms = 500;
  CHECK_THROWS_WITH_AS(build_target(tree, config, tmp.path() / "b", nullptr),
                       doctest::Contains("not found"), std::runtime_error);
}

TEST_CASE("stub build validates the scenario script") {
  TempDir tmp;
  TargetConfig config = stub_config();
  SourceTree bad{{"scenario.stub", "warp 9\n"}};
  BuildResult result = build_target(bad, config, tmp.path() / "b", nullptr);
  CHECK_FALSE(result.success);
  REQUIRE(result.failure_class.has_value());

  SourceTree missing{{"main.c", "// no scenario\n"}};
  BuildResult no_scenario = build_target(missing, config, tmp.path() / "b2", nullptr);
  CHECK_FALSE(no_scenario.success);
  CHECK(*no_scenario.failure_class == BuildFailureClass::missing_context);
}

}  // TEST_SUITE
