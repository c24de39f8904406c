// Acceptance suite: one checker per shipping criterion, each printing a
// single PASS/FAIL line. Run with no arguments for the full battery or with
// a criterion name to run one (the ctest entries do the latter).

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include "../support/flagship_fixture.hpp"
#include "fwsec/agents.hpp"
#include "fwsec/analyzers.hpp"
#include "fwsec/campaign.hpp"
#include "fwsec/fuzz.hpp"
#include "fwsec/monitor.hpp"
#include "fwsec/serialize.hpp"

namespace fs = std::filesystem;
using namespace fwsec;

namespace {

struct TempRoot {
  fs::path path;
  TempRoot() {
    std::string tmpl = (fs::temp_directory_path() / "fwsec-acc-XXXXXX").string();
    std::string buf = tmpl;
    if (mkdtemp(buf.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path = buf;
  }
  ~TempRoot() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out.write(content.data(), std::streamsize(content.size()));
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ThreatModel bundled_model() {
  return load_threat_model(std::string(FWSEC_DEFAULT_DATA_DIR) + "/threat_model.default");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error(what);
}

void require_close(double actual, double expected, double rel_tol, const std::string& what) {
  double scale = std::max(std::abs(expected), 1e-30);
  if (std::abs(actual - expected) / scale > rel_tol)
    throw std::runtime_error(what + ": got " + std::to_string(actual) + ", expected " +
                             std::to_string(expected));
}

// ------------------------------------------------------------------
// 1. Metric-formula oracle equivalence, 1e4 randomized operand sets each,
//    relative tolerance 1e-9, total runtime under 10 s.
// ------------------------------------------------------------------
void check_metric_oracles() {
  auto start = std::chrono::steady_clock::now();
  constexpr int kSets = 10000;
  constexpr double kTol = 1e-9;
  SplitMix64 rng(0xACCE97ED);

  for (int i = 0; i < kSets; ++i) {
    // vrr
    std::uint64_t total = rng.bounded(1000);
    std::uint64_t fixed = total == 0 ? 0 : rng.bounded(total + 1);
    long double vrr_oracle = total == 0 ? 100.0L : 100.0L * (long double)fixed / total;
    require_close(vrr_percent(fixed, total), double(vrr_oracle), kTol, "vrr");

    // sci
    CoverageVector v;
    v.c_fuzz = double(rng.bounded(1000001)) / 1e6;
    v.c_static = double(rng.bounded(1000001)) / 1e6;
    v.c_dynamic = double(rng.bounded(1000001)) / 1e6;
    v.w1 = double(1 + rng.bounded(1000)) / 10.0;
    v.w2 = double(1 + rng.bounded(1000)) / 10.0;
    v.w3 = double(1 + rng.bounded(1000)) / 10.0;
    long double sci_oracle =
        ((long double)v.w1 * v.c_fuzz + (long double)v.w2 * v.c_static +
         (long double)v.w3 * v.c_dynamic) /
        ((long double)v.w1 + v.w2 + v.w3);
    require_close(sci(v), double(sci_oracle), kTol, "sci");

    // tmcs
    std::uint64_t threats = 1 + rng.bounded(50);
    std::uint64_t mitigated = rng.bounded(threats + 1);
    require_close(tmcs_percent(mitigated, threats),
                  double(100.0L * (long double)mitigated / threats), kTol, "tmcs");

    // wcet + jitter over a random sample vector
    std::size_t n = 1 + rng.bounded(64);
    std::vector<TimingSample> samples;
    long double sum = 0.0L, maxv = 0.0L;
    for (std::size_t k = 0; k < n; ++k) {
      TimingSample s;
      s.task = "T";
      s.exec_ms = double(rng.bounded(1000000)) / 1000.0;
      s.deadline_ms = 1e9;
      samples.push_back(s);
      sum += s.exec_ms;
      maxv = std::max<long double>(maxv, s.exec_ms);
    }
    long double mean = sum / n;
    long double sq = 0.0L;
    for (const auto& s : samples) sq += ((long double)s.exec_ms - mean) *
                                        ((long double)s.exec_ms - mean);
    long double jitter_us = std::sqrt(sq / n) * 1000.0L;
    TimingReport report = compute_report(samples);
    require_close(report.tasks[0].wcet_ms, double(maxv), kTol, "wcet");
    if (jitter_us > 1e-9)
      require_close(report.tasks[0].jitter_us, double(jitter_us), kTol, "jitter");

    // ada
    std::uint64_t tp = rng.bounded(100), tn = rng.bounded(100), fp = rng.bounded(100),
                  fn = rng.bounded(100);
    if (tp + tn + fp + fn == 0) tp = 1;
    require_close(detection_accuracy(tp, tn, fp, fn),
                  double((long double)(tp + tn) / (tp + tn + fp + fn)), kTol, "ada");

    // iei
    IterationDelta delta;
    delta.delta_security = double(rng.bounded(2001)) / 1000.0 - 1.0;
    delta.delta_performance = double(rng.bounded(2001)) / 1000.0 - 1.0;
    delta.resources = double(1 + rng.bounded(100000)) / 1000.0;
    require_close(iei(delta),
                  double(((long double)delta.delta_security + delta.delta_performance) /
                         delta.resources),
                  kTol, "iei");
  }
  double took = elapsed_s(start);
  require(took < 10.0, "oracle battery exceeded 10 s: " + std::to_string(took));
}

// ------------------------------------------------------------------
// 2. Reference-ratio checks: vrr(12,13) and ada(11,0,1,0) within
//    0.1 percentage point of the reference ratios.
// ------------------------------------------------------------------
void check_reference_ratios() {
  double vrr = vrr_percent(12, 13);
  require(std::abs(vrr - 92.31) <= 0.1,
          "vrr(12,13) = " + std::to_string(vrr) + ", expected 92.31 +/- 0.1");
  double ada = detection_accuracy(11, 0, 1, 0) * 100.0;
  require(std::abs(ada - 91.67) <= 0.1,
          "ada(11,0,1,0) = " + std::to_string(ada) + ", expected 91.67 +/- 0.1");
}

// ------------------------------------------------------------------
// 3. Flagship end-to-end: converges in exactly 2 iterations, final
//    VRR = TMCS = 100%, zero deadline misses, < 30 s, and a rerun digests
//    byte-identically.
// ------------------------------------------------------------------
void check_flagship() {
  TempRoot root;
  auto start = std::chrono::steady_clock::now();
  fwsec_test::write_flagship_mock(root.path);
  CampaignConfig config = fwsec_test::flagship_config(root.path, FWSEC_STUB_BINARY);

  RunOptions options;
  options.campaign_dir = root.path / "run-a";
  CampaignState state = run_campaign(config, options);
  require(state.status == CampaignStatus::converged,
          "status " + to_string(state.status) + ", expected converged");
  require(state.iterations.size() == 2,
          "converged in " + std::to_string(state.iterations.size()) +
              " iterations, expected exactly 2");
  const MetricsSnapshot& metrics = state.iterations.back().metrics.value();
  require_close(metrics.vrr.value_or(0), 100.0, 1e-12, "final VRR");
  require_close(metrics.tmcs.value_or(0), 100.0, 1e-12, "final TMCS");
  require(metrics.raw.deadline_misses == 0, "final iteration has deadline misses");
  require(!state.iterations.front().open_findings().empty(),
          "v1 produced no findings");

  RunOptions rerun;
  rerun.campaign_dir = root.path / "run-b";
  CampaignState again = run_campaign(config, rerun);
  require(campaign_state_digest(state) == campaign_state_digest(again),
          "rerun digest mismatch");
  double took = elapsed_s(start);
  require(took < 30.0, "flagship took " + std::to_string(took) + " s, budget 30 s");
}

// ------------------------------------------------------------------
// 4. Fuzz determinism: two campaigns, identical seed/plan/stub =>
//    identical ordered finding-id multisets and identical corpus bytes;
//    a 1000-trial plan completes in under 60 s.
// ------------------------------------------------------------------
void check_fuzz_determinism() {
  TempRoot root;
  ThreatModel model = bundled_model();
  SourceTree tree{{"scenario.stub", "echo\noverflow-if-longer 48\n"}};
  TargetConfig config;
  config.kind = TargetKind::stub_target;
  config.stub_binary = FWSEC_STUB_BINARY;
  config.run_command = "scenario.stub";
  config.startup_grace_ms = 5;
  config.run_timeout_ms = 2000;
  config.freeze_silence_ms = 1000;
  config.input_pacing_ms = 0;

  BuildArtifact artifact;
  require(build_target(tree, config, root.path / "b", &artifact).success, "stub build");

  FuzzPlan plan;
  plan.seed = 20250808;
  plan.trials = 1000;
  plan.inputs_per_trial = 3;
  plan.max_input_len = 64;
  plan.generators = {Generator::random_bytes, Generator::boundary_lengths,
                     Generator::malformed_mqtt};

  auto start = std::chrono::steady_clock::now();
  FuzzCampaignResult first = run_fuzz_campaign(plan, artifact, config, model);
  double took = elapsed_s(start);
  require(took < 60.0, "1000-trial campaign took " + std::to_string(took) + " s");

  FuzzCampaignResult second = run_fuzz_campaign(plan, artifact, config, model);

  auto ordered_ids = [](const FuzzCampaignResult& r) {
    std::vector<std::string> ids;
    for (const auto& outcome : r.outcomes)
      for (const auto& f : outcome.findings) ids.push_back(f.id);
    return ids;
  };
  require(ordered_ids(first) == ordered_ids(second), "finding-id multisets differ");
  require(first.coverage == second.coverage, "coverage differs");

  // Corpus bytes: persist both and compare files, then the in-memory bytes.
  for (int which = 0; which < 2; ++which) {
    const FuzzCampaignResult& r = which == 0 ? first : second;
    fs::path corpus = root.path / ("corpus-" + std::to_string(which));
    for (const auto& outcome : r.outcomes) {
      fs::path dir = corpus / std::to_string(outcome.trial_index);
      for (std::size_t i = 0; i < outcome.inputs.size(); ++i)
        spit(dir / (std::to_string(i) + ".bin"), outcome.inputs[i].bytes);
    }
  }
  for (const auto& entry :
       fs::recursive_directory_iterator(root.path / "corpus-0")) {
    if (!entry.is_regular_file()) continue;
    fs::path other = root.path / "corpus-1" /
                     fs::relative(entry.path(), root.path / "corpus-0");
    require(fs::exists(other), "corpus file missing in rerun: " + other.string());
    require(slurp(entry.path()) == slurp(other),
            "corpus bytes differ: " + entry.path().string());
  }
  require(!ordered_ids(first).empty(), "fixture produced no findings at all");
}

// ------------------------------------------------------------------
// 5. Timing oracle on a 1e4-line synthetic log, plus the {3,5,4} fixture.
// ------------------------------------------------------------------
void check_timing_oracle() {
  SplitMix64 rng(424242);
  const char* tasks[] = {"Sensor", "Net", "Control"};
  std::ostringstream log;
  std::map<std::string, std::vector<double>> oracle_inputs;
  for (int i = 0; i < 10000; ++i) {
    const char* task = tasks[rng.bounded(3)];
    char value[32];
    std::snprintf(value, sizeof(value), "%llu.%03llu",
                  (unsigned long long)rng.bounded(1000),
                  (unsigned long long)rng.bounded(1000));
    log << "TICK task=" << task << " exec_ms=" << value << " deadline_ms=2000\n";
    oracle_inputs[task].push_back(std::strtod(value, nullptr));
  }

  TimingParse parsed = parse_timing_log(log.str());
  require(parsed.samples.size() == 10000, "expected 1e4 samples");
  require(parsed.warnings == 0, "unexpected parse warnings");
  TimingReport report = compute_report(parsed.samples);

  for (const auto& [task, values] : oracle_inputs) {
    long double sum = 0.0L, maxv = 0.0L;
    for (double v : values) {
      sum += v;
      maxv = std::max<long double>(maxv, v);
    }
    long double mean = sum / values.size();
    long double sq = 0.0L;
    for (double v : values) sq += (v - mean) * (v - mean);
    long double jitter_us = std::sqrt(sq / values.size()) * 1000.0L;

    const TaskTiming* t = report.find(task);
    require(t != nullptr, "missing task " + task);
    require_close(t->wcet_ms, double(maxv), 1e-9, task + std::string(" wcet"));
    require_close(t->mean_exec_ms, double(mean), 1e-9, task + std::string(" mean"));
    require_close(t->jitter_us, double(jitter_us), 1e-9, task + std::string(" jitter"));
  }

  TimingParse fixture = parse_timing_log(
      "TICK task=S exec_ms=3 deadline_ms=100\n"
      "TICK task=S exec_ms=5 deadline_ms=100\n"
      "TICK task=S exec_ms=4 deadline_ms=100\n");
  TimingReport small = compute_report(fixture.samples);
  require(std::abs(small.tasks[0].jitter_us - 816.5) <= 0.1,
          "{3,5,4} jitter = " + std::to_string(small.tasks[0].jitter_us) +
              " us, expected 816.5 +/- 0.1");
}

// ------------------------------------------------------------------
// 6. Analyzer-adapter golden tests over the committed fixtures.
// ------------------------------------------------------------------
nlohmann::json analyzer_actual(const std::string& fixture_name, AnalyzerFormat format,
                               std::size_t total_files) {
  ThreatModel model = bundled_model();
  auto records = replay_analyzer_report(
      fs::path(FWSEC_TEST_FIXTURES) / fixture_name, format);
  MapResult mapped = map_to_findings(records, model, default_checkmap(), total_files);
  require(mapped.findings.size() + mapped.uncategorized.size() == records.size(),
          fixture_name + ": |findings| + |uncategorized| != |records|");
  nlohmann::json doc;
  doc["source"] = fixture_name;
  doc["records"] = records.size();
  doc["findings"] = findings_file_json(mapped.findings)["findings"];
  nlohmann::json uncategorized = nlohmann::json::array();
  for (const auto& rec : mapped.uncategorized)
    uncategorized.push_back({{"check_id", rec.check_id},
                             {"file", rec.file},
                             {"line", rec.line},
                             {"message", rec.message}});
  doc["uncategorized"] = uncategorized;
  doc["static_coverage"] = mapped.static_coverage;
  return doc;
}

struct GoldenCase {
  const char* fixture;
  AnalyzerFormat format;
  std::size_t total_files;
  const char* golden;
};

const GoldenCase kGoldenCases[] = {
    {"cppcheck_report.xml", AnalyzerFormat::cppcheck_xml, 3,
     "golden_cppcheck_findings.json"},
    {"clang_report.sarif", AnalyzerFormat::clang_sarif, 4, "golden_sarif_findings.json"},
    {"gcc_report.txt", AnalyzerFormat::generic_gcc_text, 3, "golden_gcc_findings.json"},
};

void check_analyzer_goldens() {
  for (const auto& c : kGoldenCases) {
    nlohmann::json actual = analyzer_actual(c.fixture, c.format, c.total_files);
    fs::path golden_path = fs::path(FWSEC_TEST_FIXTURES) / c.golden;
    require(fs::exists(golden_path), std::string("missing golden: ") + c.golden);
    std::string expected = slurp(golden_path);
    require(canonical_dump(actual) == expected,
            std::string(c.fixture) + ": output differs from " + c.golden);
  }
}

void write_analyzer_goldens() {
  for (const auto& c : kGoldenCases) {
    nlohmann::json actual = analyzer_actual(c.fixture, c.format, c.total_files);
    spit(fs::path(FWSEC_TEST_FIXTURES) / c.golden, canonical_dump(actual));
    std::cout << "wrote " << c.golden << "\n";
  }
}

// ------------------------------------------------------------------
// 7. Harness watchdog: the signal-ignoring hang stub is reaped within
//    run-timeout + 2 s in 100/100 repetitions, always as freeze-kill with
//    at least grace+silence of observed runtime.
// ------------------------------------------------------------------
void check_harness_watchdog() {
  TempRoot root;
  TargetConfig config;
  config.kind = TargetKind::stub_target;
  config.stub_binary = FWSEC_STUB_BINARY;
  config.run_command = "scenario.stub";
  config.startup_grace_ms = 10;
  config.run_timeout_ms = 200;
  config.freeze_silence_ms = 100;

  SourceTree tree{{"scenario.stub", "ignore-signals\nprint up\nhang-after 0\n"}};
  BuildArtifact artifact;
  require(build_target(tree, config, root.path / "b", &artifact).success, "stub build");

  constexpr int kReps = 100;
  std::atomic<int> next{0};
  std::atomic<int> failures{0};
  std::string first_failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      int rep = next.fetch_add(1);
      if (rep >= kReps) break;
      auto start = std::chrono::steady_clock::now();
      RunResult run = run_target(artifact, config, {});
      double ms = elapsed_s(start) * 1000.0;
      std::string problem;
      if (ms > double(config.run_timeout_ms) + 2000.0)
        problem = "rep " + std::to_string(rep) + " took " + std::to_string(ms) + " ms";
      else if (run.exit_status != ExitStatus::freeze_kill)
        problem = "rep " + std::to_string(rep) + " status " + to_string(run.exit_status);
      else if (run.duration_ms <
               std::int64_t(config.startup_grace_ms + config.freeze_silence_ms))
        problem = "rep " + std::to_string(rep) + " froze too early";
      if (!problem.empty()) {
        ++failures;
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (first_failure.empty()) first_failure = problem;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < 4; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  require(failures.load() == 0,
          std::to_string(failures.load()) + "/100 repetitions failed: " + first_failure);
}

// ------------------------------------------------------------------
// 8. Agent comparison on the flagship fixture: all-agents VRR >= LLM-only
//    VRR, identical seeds recorded in the comparison manifest. Keyed mock
//    responses let the two variants receive different patches.
// ------------------------------------------------------------------
std::vector<std::string> log_keys(const fs::path& requests_log) {
  std::vector<std::string> keys;
  std::istringstream in(slurp(requests_log));
  std::string line;
  while (std::getline(in, line)) {
    std::size_t tab = line.find('\t');
    if (tab != std::string::npos) keys.push_back(line.substr(0, tab));
  }
  return keys;
}

void check_agent_comparison() {
  TempRoot root;
  fwsec_test::write_flagship_mock(root.path);
  CampaignConfig base = fwsec_test::flagship_config(root.path, FWSEC_STUB_BINARY, 4, 2);
  CampaignConfig llm_only = base;
  llm_only.agents_enabled.clear();

  // Capture phase: playback-only run to learn the two patch prompt keys.
  compare_configurations({llm_only, base}, root.path / "capture");
  auto llm_keys = log_keys(root.path / "capture" / "llm-only" / "llm" / "requests.log");
  auto agent_keys = log_keys(root.path / "capture" / "all-agents" / "llm" / "requests.log");
  require(llm_keys.size() == 2 && agent_keys.size() == 2,
          "expected generate+patch requests in both campaigns");
  require(llm_keys[0] == agent_keys[0], "generation prompts should be identical");
  require(llm_keys[1] != agent_keys[1],
          "patch prompts should differ (advisories are agent output)");

  // Keyed phase: the LLM-only prompt gets a partial patch, the agent-informed
  // prompt the full one.
  spit(root.path / "mock" / "by-key" / (llm_keys[1] + ".txt"),
       fwsec_test::patch_response(fwsec_test::flagship_partial_scenario()));
  spit(root.path / "mock" / "by-key" / (agent_keys[1] + ".txt"),
       fwsec_test::patch_response(fwsec_test::flagship_v2_scenario()));

  ComparisonOutcome outcome =
      compare_configurations({llm_only, base}, root.path / "scored");
  double llm_vrr = -1, agents_vrr = -1;
  for (const auto& [name, state] : outcome.states) {
    const MetricsSnapshot& m = state.iterations.back().metrics.value();
    if (name == "LLM Only") llm_vrr = m.vrr.value_or(0);
    if (name == "All Agents") agents_vrr = m.vrr.value_or(0);
  }
  require(llm_vrr >= 0 && agents_vrr >= 0, "missing VRR values");
  require(agents_vrr >= llm_vrr, "all-agents VRR " + std::to_string(agents_vrr) +
                                     " < LLM-only VRR " + std::to_string(llm_vrr));
  require(agents_vrr > llm_vrr, "fixture should separate the variants strictly");

  nlohmann::json manifest = nlohmann::json::parse(outcome.manifest_json);
  require(manifest["configurations"]["LLM Only"]["seed"] ==
              manifest["configurations"]["All Agents"]["seed"],
          "seeds differ between manifest entries");
}

// ------------------------------------------------------------------
// 9. Crash-resume equivalence: pausing after iteration 1 and resuming
//    digests identically to an uninterrupted run.
// ------------------------------------------------------------------
void check_crash_resume() {
  TempRoot root;
  fwsec_test::write_flagship_mock(root.path);
  CampaignConfig config = fwsec_test::flagship_config(root.path, FWSEC_STUB_BINARY);

  RunOptions full;
  full.campaign_dir = root.path / "full";
  std::string full_digest = campaign_state_digest(run_campaign(config, full));

  RunOptions paused;
  paused.campaign_dir = root.path / "paused";
  paused.stop_after_iterations = 1;
  CampaignState midway = run_campaign(config, paused);
  require(midway.status == CampaignStatus::running, "paused campaign should stay running");
  require(midway.iterations.size() == 1, "expected exactly one persisted iteration");

  CampaignState resumed = resume_campaign(paused.campaign_dir);
  require(resumed.status == CampaignStatus::converged, "resumed campaign did not converge");
  require(campaign_state_digest(resumed) == full_digest,
          "resumed digest differs from the uninterrupted run");
}

// ------------------------------------------------------------------
// 10. Dataset export determinism and schema validity.
// ------------------------------------------------------------------
void check_export_determinism() {
  TempRoot root;
  fwsec_test::write_flagship_mock(root.path);
  CampaignConfig config = fwsec_test::flagship_config(root.path, FWSEC_STUB_BINARY);
  RunOptions options;
  options.campaign_dir = root.path / "campaign";
  CampaignState state = run_campaign(config, options);
  require(state.status == CampaignStatus::converged, "fixture campaign failed");

  DatasetManifest a = export_dataset(options.campaign_dir, root.path / "out-a");
  DatasetManifest b = export_dataset(options.campaign_dir, root.path / "out-b");
  require(a.manifest_json == b.manifest_json, "manifests differ between exports");
  require(a.digest == b.digest, "manifest digests differ");
  require(slurp(root.path / "out-a" / "manifest.json") ==
              slurp(root.path / "out-b" / "manifest.json"),
          "manifest files differ on disk");

  for (std::size_t k = 0; k < state.iterations.size(); ++k) {
    fs::path findings =
        root.path / "out-a" / "iterations" / std::to_string(k) / "findings.json";
    require(fs::exists(findings), "missing exported findings for iteration " +
                                      std::to_string(k));
    validate_findings_json(nlohmann::json::parse(slurp(findings)));
  }
  require(fs::exists(root.path / "out-a" / "corpus" / "0" / "0" / "0.bin"),
          "corpus bytes missing from the export");
}

struct Criterion {
  const char* name;
  std::function<void()> check;
};

const Criterion kCriteria[] = {
    {"metric-oracles", check_metric_oracles},
    {"reference-ratios", check_reference_ratios},
    {"flagship-e2e", check_flagship},
    {"fuzz-determinism", check_fuzz_determinism},
    {"timing-oracle", check_timing_oracle},
    {"analyzer-goldens", check_analyzer_goldens},
    {"harness-watchdog", check_harness_watchdog},
    {"agent-comparison", check_agent_comparison},
    {"crash-resume", check_crash_resume},
    {"export-determinism", check_export_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::string only = argc > 1 ? argv[1] : "";
  if (only == "write-goldens") {
    write_analyzer_goldens();
    return 0;
  }

  int failures = 0;
  int ran = 0;
  for (const auto& criterion : kCriteria) {
    if (!only.empty() && only != criterion.name) continue;
    ++ran;
    try {
      criterion.check();
      std::cout << "PASS — " << criterion.name << "\n";
    } catch (const std::exception& e) {
      std::cout << "FAIL — " << criterion.name << ": " << e.what() << "\n";
      ++failures;
    }
  }
  if (ran == 0) {
    std::cerr << "unknown criterion: " << only << "\n";
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
