#include "fwsec/fuzz.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <regex>
#include <set>
#include <stdexcept>
#include <thread>

namespace fwsec {

std::uint64_t trial_stream_seed(std::uint64_t seed, std::uint32_t trial_index) {
  SplitMix64 mixer(seed ^ (0x9e3779b97f4a7c15ULL * (std::uint64_t(trial_index) + 1)));
  return mixer.next();
}

std::string to_string(Generator g) {
  switch (g) {
    case Generator::random_bytes: return "random-bytes";
    case Generator::ascii_garbage: return "ascii-garbage";
    case Generator::boundary_lengths: return "boundary-lengths";
    case Generator::malformed_mqtt: return "malformed-mqtt";
    case Generator::flood: return "flood";
  }
  return "random-bytes";
}

Generator generator_from_string(std::string_view s) {
  if (s == "random-bytes") return Generator::random_bytes;
  if (s == "ascii-garbage") return Generator::ascii_garbage;
  if (s == "boundary-lengths") return Generator::boundary_lengths;
  if (s == "malformed-mqtt") return Generator::malformed_mqtt;
  if (s == "flood") return Generator::flood;
  throw std::runtime_error("unknown generator: '" + std::string(s) + "'");
}

void FuzzPlan::validate() const {
  if (trials < 1) throw std::invalid_argument("fuzz plan: trials must be >= 1");
  if (inputs_per_trial < 1)
    throw std::invalid_argument("fuzz plan: inputs_per_trial must be >= 1");
  if (max_input_len < 1)
    throw std::invalid_argument("fuzz plan: max_input_len must be >= 1");
  if (generators.empty())
    throw std::invalid_argument("fuzz plan: generators must be non-empty");
  if (!(flood_rate_multiplier > 0.0))
    throw std::invalid_argument("fuzz plan: flood_rate_multiplier must be > 0");
}

namespace {

// Printable ASCII, no newline, so garbage stays one injected line.
char ascii_char(SplitMix64& rng) { return char(0x20 + rng.bounded(0x5f)); }

std::string random_bytes(SplitMix64& rng, std::size_t len) {
  std::string out;
  out.reserve(len);
  for (std::size_t i = 0; i < len; ++i) out.push_back(char(rng.bounded(256)));
  return out;
}

std::string ascii_garbage(SplitMix64& rng, std::size_t len) {
  std::string out;
  out.reserve(len);
  for (std::size_t i = 0; i < len; ++i) out.push_back(ascii_char(rng));
  return out;
}

// Lengths {0, 1, max-1, max, max+1}; the over-long case is truncated to max
// with a 0xFF marker in the final byte.
std::string boundary_input(SplitMix64& rng, std::uint32_t max_len, std::uint64_t sub) {
  const std::uint64_t kinds[5] = {0, 1, std::uint64_t(max_len) - 1, max_len,
                                  std::uint64_t(max_len) + 1};
  std::uint64_t want = kinds[sub % 5];
  bool truncated = want > max_len;
  std::size_t len = std::size_t(std::min<std::uint64_t>(want, max_len));
  std::string out = ascii_garbage(rng, len);
  if (truncated && !out.empty()) out.back() = char(0xFF);
  return out;
}

// Structurally plausible MQTT fixed header (valid packet-type nibble 1..14)
// followed by a corrupted remaining-length varint and a truncated payload.
std::string malformed_mqtt(SplitMix64& rng, std::uint32_t max_len) {
  std::string out;
  std::uint8_t type = std::uint8_t(1 + rng.bounded(14));
  std::uint8_t flags = std::uint8_t(rng.bounded(16));
  out.push_back(char((type << 4) | flags));
  // Remaining length: 1-3 varint bytes, continuation bit deliberately left
  // set on the last byte so the declared length never terminates.
  std::uint64_t varint_len = 1 + rng.bounded(3);
  for (std::uint64_t i = 0; i < varint_len; ++i)
    out.push_back(char(0x80 | rng.bounded(0x80)));
  std::uint64_t payload = rng.bounded(std::max<std::uint32_t>(max_len / 2, 1));
  for (std::uint64_t i = 0; i < payload && out.size() < max_len; ++i)
    out.push_back(char(rng.bounded(256)));
  if (out.size() > max_len) out.resize(max_len);
  return out;
}

std::string flood_packet(SplitMix64& rng, std::uint32_t max_len) {
  std::size_t len = 1 + rng.bounded(std::min<std::uint32_t>(16, max_len));
  return ascii_garbage(rng, len);
}

}  // namespace

std::vector<GeneratedInput> generate_inputs(const FuzzPlan& plan,
                                            std::uint32_t trial_index) {
  plan.validate();
  if (trial_index >= plan.trials)
    throw std::invalid_argument("generate_inputs: trial_index out of range");

  SplitMix64 rng(trial_stream_seed(plan.seed, trial_index));
  std::vector<GeneratedInput> out;
  std::uint64_t boundary_sub = 0;
  for (std::uint32_t slot = 0; slot < plan.inputs_per_trial; ++slot) {
    Generator g = plan.generators[slot % plan.generators.size()];
    switch (g) {
      case Generator::random_bytes:
        out.push_back({random_bytes(rng, 1 + rng.bounded(plan.max_input_len)), g, false});
        break;
      case Generator::ascii_garbage:
        out.push_back({ascii_garbage(rng, 1 + rng.bounded(plan.max_input_len)), g, false});
        break;
      case Generator::boundary_lengths:
        out.push_back({boundary_input(rng, plan.max_input_len, boundary_sub++), g, false});
        break;
      case Generator::malformed_mqtt:
        out.push_back({malformed_mqtt(rng, plan.max_input_len), g, false});
        break;
      case Generator::flood: {
        auto burst = std::uint64_t(std::llround(plan.flood_rate_multiplier));
        if (burst < 1) burst = 1;
        for (std::uint64_t i = 0; i < burst; ++i)
          out.push_back({flood_packet(rng, plan.max_input_len), g, true});
        break;
      }
    }
  }
  return out;
}

namespace {

std::vector<std::string> log_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
    start = nl + 1;
  }
  return lines;
}

std::regex rule_regex(const SecurityRule& rule) {
  std::string pat = rule.pattern;
  auto flags = std::regex::ECMAScript | std::regex::optimize;
  if (pat.rfind("(?i)", 0) == 0) {
    pat = pat.substr(4);
    flags |= std::regex::icase;
  }
  return std::regex(pat, flags);
}

void push_unique(std::vector<Finding>& findings, std::set<std::string>& seen, Finding f) {
  if (seen.insert(f.id).second) findings.push_back(std::move(f));
}

}  // namespace

std::vector<Finding> scan_logs(const RunResult& run, const ThreatModel& model,
                               std::uint32_t iteration) {
  std::vector<Finding> findings;
  std::set<std::string> seen;

  std::vector<std::string> lines = log_lines(run.stdout_log);
  for (auto& l : log_lines(run.stderr_log)) lines.push_back(l);

  for (const auto& rule : model.rules) {
    if (!rule.enabled || rule.detector != DetectorKind::log_pattern) continue;
    std::regex re = rule_regex(rule);
    for (const auto& line : lines) {
      if (std::regex_search(line, re))
        push_unique(findings, seen, make_finding(rule, model, line, FindingSource::fuzz,
                                                 iteration));
    }
  }

  if (run.exit_status == ExitStatus::crash && model.has_cwe(120)) {
    SecurityRule pseudo;
    pseudo.id = "exit-crash";
    pseudo.cwe = 120;
    pseudo.severity = default_severity(120);
    std::string evidence =
        run.crash_signal != 0
            ? "target crashed: signal " + std::to_string(run.crash_signal)
            : "target crashed: exit code " + std::to_string(run.crash_code);
    push_unique(findings, seen,
                make_finding(pseudo, model, evidence, FindingSource::fuzz, iteration));
  }
  if (run.exit_status == ExitStatus::freeze_kill && model.has_cwe(400)) {
    const SecurityRule* declared = nullptr;
    for (const auto& rule : model.rules)
      if (rule.enabled && rule.detector == DetectorKind::freeze) {
        declared = &rule;
        break;
      }
    SecurityRule pseudo;
    pseudo.id = "exit-freeze";
    pseudo.cwe = 400;
    pseudo.severity = default_severity(400);
    const SecurityRule& rule = declared != nullptr ? *declared : pseudo;
    std::string evidence = "freeze: no output for " +
                           std::to_string(run.freeze_silence_ms) + " ms silence";
    push_unique(findings, seen,
                make_finding(rule, model, evidence, FindingSource::fuzz, iteration));
  }
  return findings;
}

FuzzCampaignResult run_fuzz_campaign(const FuzzPlan& plan, const BuildArtifact& artifact,
                                     const TargetConfig& config, const ThreatModel& model,
                                     std::uint32_t iteration, const FuzzOptions& options) {
  plan.validate();
  config.validate();

  FuzzCampaignResult result;
  result.outcomes.resize(plan.trials);

  unsigned workers = options.workers != 0 ? options.workers
                                          : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, plan.trials);

  std::atomic<std::uint32_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure_message;
  std::mutex failure_mutex;

  auto worker = [&]() {
    while (true) {
      std::uint32_t trial = next.fetch_add(1);
      if (trial >= plan.trials || failed.load()) break;
      try {
        TrialOutcome outcome;
        outcome.trial_index = trial;
        outcome.inputs = generate_inputs(plan, trial);
        std::vector<InjectedInput> injected;
        injected.reserve(outcome.inputs.size());
        for (const auto& in : outcome.inputs)
          injected.push_back({in.bytes, in.flood_burst ? 0 : config.input_pacing_ms});
        outcome.run = run_target(artifact, config, injected);
        outcome.findings = scan_logs(outcome.run, model, iteration);
        result.outcomes[trial] = std::move(outcome);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failed.store(true);
        if (failure_message.empty()) failure_message = e.what();
      }
    }
  };

  std::vector<std::thread> pool;
  for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed.load())
    throw std::runtime_error("fuzz campaign aborted: " + failure_message);

  // Campaign-level dedup and behavioral-cell coverage.
  std::set<std::string> seen;
  std::set<Generator> plan_generators(plan.generators.begin(), plan.generators.end());
  std::set<std::pair<Generator, ExitStatus>> cells;
  for (const auto& outcome : result.outcomes) {
    for (const auto& f : outcome.findings)
      if (seen.insert(f.id).second) result.findings.push_back(f);
    std::set<Generator> used;
    for (const auto& in : outcome.inputs) used.insert(in.generator);
    for (Generator g : used) cells.insert({g, outcome.run.exit_status});
  }
  result.coverage =
      double(cells.size()) / (double(plan_generators.size()) * 4.0);

  // Log-pattern rules ran over every trial log; freeze rules were armed by
  // the watchdog for every run.
  for (const auto& rule : model.rules)
    if (rule.enabled && (rule.detector == DetectorKind::log_pattern ||
                         rule.detector == DetectorKind::freeze))
      result.executed_rules.push_back(rule.id);
  return result;
}

}  // namespace fwsec
