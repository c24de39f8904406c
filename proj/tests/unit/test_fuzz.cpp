#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "fwsec/fuzz.hpp"
#include "support.hpp"

using namespace fwsec;
using fwsec_test::TempDir;
using fwsec_test::write_text;

namespace {

FuzzPlan base_plan() {
  FuzzPlan plan;
  plan.seed = 42;
  plan.trials = 10;
  plan.inputs_per_trial = 5;
  plan.max_input_len = 64;
  plan.generators = {Generator::random_bytes};
  return plan;
}

ThreatModel bundled_model() {
  return load_threat_model(std::string(FWSEC_DEFAULT_DATA_DIR) + "/threat_model.default");
}

RunResult clean_run(std::string stdout_log) {
  RunResult run;
  run.exit_status = ExitStatus::clean_exit;
  run.stdout_log = std::move(stdout_log);
  run.freeze_silence_ms = 500;
  return run;
}

std::multiset<std::string> id_multiset(const std::vector<Finding>& findings) {
  std::multiset<std::string> out;
  for (const auto& f : findings) out.insert(f.id);
  return out;
}

}  // namespace

TEST_SUITE("fuzz") {

TEST_CASE("seeded generation is deterministic per trial") {
  FuzzPlan plan = base_plan();
  auto a = generate_inputs(plan, 3);
  auto b = generate_inputs(plan, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].bytes == b[i].bytes);

  auto other_trial = generate_inputs(plan, 4);
  bool all_same = a.size() == other_trial.size();
  if (all_same)
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].bytes != other_trial[i].bytes) all_same = false;
  CHECK_FALSE(all_same);
}

TEST_CASE("different seeds give different streams") {
  FuzzPlan a = base_plan(), b = base_plan();
  b.seed = 43;
  CHECK(generate_inputs(a, 0)[0].bytes != generate_inputs(b, 0)[0].bytes);
}

TEST_CASE("boundary-lengths covers {0,1,max-1,max}") {
  FuzzPlan plan = base_plan();
  plan.generators = {Generator::boundary_lengths};
  plan.inputs_per_trial = 5;
  auto inputs = generate_inputs(plan, 0);
  std::set<std::size_t> lengths;
  for (const auto& in : inputs) lengths.insert(in.bytes.size());
  CHECK(lengths.count(0) == 1);
  CHECK(lengths.count(1) == 1);
  CHECK(lengths.count(63) == 1);
  CHECK(lengths.count(64) == 1);
  // The max+1 case truncates to max with a 0xFF marker byte.
  int with_marker = 0;
  for (const auto& in : inputs)
    if (in.bytes.size() == 64 && !in.bytes.empty() && (unsigned char)in.bytes.back() == 0xFF)
      ++with_marker;
  CHECK(with_marker == 1);
}

TEST_CASE("malformed-mqtt emits valid packet-type nibbles") {
  FuzzPlan plan = base_plan();
  plan.generators = {Generator::malformed_mqtt};
  plan.inputs_per_trial = 10;
  plan.trials = 100;
  int total = 0;
  for (std::uint32_t trial = 0; trial < plan.trials; ++trial) {
    for (const auto& in : generate_inputs(plan, trial)) {
      REQUIRE(!in.bytes.empty());
      int nibble = (static_cast<unsigned char>(in.bytes[0]) >> 4) & 0xF;
      CHECK(nibble >= 1);
      CHECK(nibble <= 14);
      CHECK(in.bytes.size() <= plan.max_input_len);
      ++total;
    }
  }
  CHECK(total == 1000);
}

TEST_CASE("every input stays within max_input_len") {
  FuzzPlan plan = base_plan();
  plan.generators = {Generator::random_bytes, Generator::ascii_garbage,
                     Generator::boundary_lengths, Generator::malformed_mqtt,
                     Generator::flood};
  plan.inputs_per_trial = 20;
  for (std::uint32_t trial = 0; trial < 5; ++trial)
    for (const auto& in : generate_inputs(plan, trial))
      CHECK(in.bytes.size() <= plan.max_input_len);
}

TEST_CASE("flood slots expand by the rate multiplier with zero pacing") {
  FuzzPlan plan = base_plan();
  plan.generators = {Generator::flood};
  plan.inputs_per_trial = 2;
  plan.flood_rate_multiplier = 5.0;
  auto inputs = generate_inputs(plan, 0);
  CHECK(inputs.size() == 10);  // 2 slots x 5
  for (const auto& in : inputs) CHECK(in.flood_burst);
}

TEST_CASE("plan validation rejects degenerate plans") {
  FuzzPlan plan = base_plan();
  plan.generators.clear();
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  plan = base_plan();
  plan.trials = 0;
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  plan = base_plan();
  CHECK_THROWS_AS(generate_inputs(plan, plan.trials), std::invalid_argument);
}

TEST_CASE("scan_logs: overflow text yields one CWE-120 finding") {
  ThreatModel model = bundled_model();
  auto findings = scan_logs(clean_run("HEAP OVERFLOW at 0x2000\n"), model);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].cwe.id == 120);
  CHECK(findings[0].source == FindingSource::fuzz);
  CHECK(findings[0].evidence == "HEAP OVERFLOW at 0x2000");
}

TEST_CASE("scan_logs: clean logs yield nothing") {
  ThreatModel model = bundled_model();
  CHECK(scan_logs(clean_run("sensor=23 ok\n"), model).empty());
}

TEST_CASE("scan_logs: freeze-kill maps to CWE-400 with silence evidence") {
  ThreatModel model = bundled_model();
  RunResult run = clean_run("");
  run.exit_status = ExitStatus::freeze_kill;
  run.freeze_silence_ms = 700;
  auto findings = scan_logs(run, model);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].cwe.id == 400);
  CHECK(findings[0].evidence.find("700 ms silence") != std::string::npos);
  CHECK(findings[0].severity == Severity::high);
}

TEST_CASE("scan_logs: crash maps to CWE-120") {
  ThreatModel model = bundled_model();
  RunResult run = clean_run("");
  run.exit_status = ExitStatus::crash;
  run.crash_code = 139;
  auto findings = scan_logs(run, model);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].cwe.id == 120);
  CHECK(findings[0].evidence.find("139") != std::string::npos);
}

TEST_CASE("scan_logs: duplicate lines collapse by finding id") {
  ThreatModel model = bundled_model();
  auto findings = scan_logs(clean_run("OVERFLOW x\nOVERFLOW x\nOVERFLOW y\n"), model);
  CHECK(findings.size() == 2);  // x collapses, y distinct
}

TEST_CASE("scan_logs is invariant under log-line reordering") {
  ThreatModel model = bundled_model();
  std::vector<std::string> lines{"OVERFLOW a", "MISSED DEADLINE task=Net", "boot ok",
                                 "race condition on flag", "OVERFLOW b"};
  auto joined = [](const std::vector<std::string>& ls) {
    std::string out;
    for (const auto& l : ls) out += l + "\n";
    return out;
  };
  auto base = id_multiset(scan_logs(clean_run(joined(lines)), model));
  std::mt19937 gen(3);
  for (int round = 0; round < 5; ++round) {
    std::shuffle(lines.begin(), lines.end(), gen);
    CHECK(id_multiset(scan_logs(clean_run(joined(lines)), model)) == base);
  }
}

TEST_CASE("campaign against the echo stub: benign, deterministic, monotone coverage") {
  ThreatModel model = bundled_model();
  TempDir tmp;
  SourceTree tree{{"scenario.stub", "echo\n"}};
  TargetConfig config;
  config.kind = TargetKind::stub_target;
  config.stub_binary = fwsec_test::stub_binary();
  config.run_command = "scenario.stub";
  config.startup_grace_ms = 10;
  config.run_timeout_ms = 2000;
  config.freeze_silence_ms = 800;
  config.input_pacing_ms = 1;

  BuildArtifact artifact;
  BuildResult build = build_target(tree, config, tmp.path() / "b", &artifact);
  REQUIRE(build.success);

  FuzzPlan plan = base_plan();
  plan.generators = {Generator::ascii_garbage, Generator::boundary_lengths};
  plan.trials = 6;
  plan.inputs_per_trial = 4;

  auto result = run_fuzz_campaign(plan, artifact, config, model, 0);
  CHECK(result.findings.empty());
  REQUIRE(result.outcomes.size() == 6);
  for (const auto& outcome : result.outcomes)
    CHECK(outcome.run.exit_status == ExitStatus::clean_exit);

  auto rerun = run_fuzz_campaign(plan, artifact, config, model, 0);
  for (std::size_t t = 0; t < result.outcomes.size(); ++t) {
    CHECK(result.outcomes[t].run.stdout_log == rerun.outcomes[t].run.stdout_log);
    CHECK(id_multiset(result.outcomes[t].findings) ==
          id_multiset(rerun.outcomes[t].findings));
  }

  // Coverage is monotone over trial prefixes for a fixed seed.
  double prev = 0.0;
  for (std::uint32_t trials = 1; trials <= 6; ++trials) {
    FuzzPlan prefix = plan;
    prefix.trials = trials;
    auto r = run_fuzz_campaign(prefix, artifact, config, model, 0);
    CHECK(r.coverage >= prev - 1e-12);
    prev = r.coverage;
  }
}

TEST_CASE("scripted overflow stub produces a CWE-120 finding") {
  ThreatModel model = bundled_model();
  TempDir tmp;
  SourceTree tree{{"scenario.stub", "overflow-if-longer 32\n"}};
  TargetConfig config;
  config.kind = TargetKind::stub_target;
  config.stub_binary = fwsec_test::stub_binary();
  config.startup_grace_ms = 10;
  config.run_timeout_ms = 2000;
  config.freeze_silence_ms = 800;
  config.input_pacing_ms = 1;

  BuildArtifact artifact;
  REQUIRE(build_target(tree, config, tmp.path() / "b", &artifact).success);

  FuzzPlan plan = base_plan();
  plan.generators = {Generator::boundary_lengths};
  plan.trials = 2;
  plan.inputs_per_trial = 5;  // includes lengths 63 and 64, both > 32

  auto result = run_fuzz_campaign(plan, artifact, config, model, 0);
  bool has_120 = false;
  for (const auto& f : result.findings)
    if (f.cwe.id == 120) has_120 = true;
  CHECK(has_120);
}

}  // TEST_SUITE
