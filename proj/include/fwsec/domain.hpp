#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fwsec/metrics.hpp"
#include "fwsec/timing.hpp"

namespace fwsec {

enum class CweCategory { memory, concurrency, availability, other };

/// A weakness class from the rules file. The three stock threats are
/// CWE-120 (buffer overflow, memory), CWE-362 (race condition, concurrency)
/// and CWE-400 (resource exhaustion, availability).
struct CweClass {
  int id = 0;  // positive CWE number
  std::string name;
  CweCategory category = CweCategory::other;
};

enum class Severity { low, medium, high, critical };

/// Stock severity for a CWE when a rule says "default".
Severity default_severity(int cwe_id);

enum class DetectorKind { log_pattern, analyzer_message, timing_threshold, freeze };

enum class TimingMetric { wcet_ms, jitter_us, deadline_misses };

/// Parsed form of a timing-threshold rule pattern, "metric<=value".
struct TimingThreshold {
  TimingMetric metric;
  double value;
};

struct SecurityRule {
  std::string id;
  int cwe = 0;
  DetectorKind detector = DetectorKind::log_pattern;
  Severity severity = Severity::high;
  bool enabled = true;
  std::string pattern;  // regex for pattern detectors, "metric<=value" for thresholds

  /// Valid only for timing_threshold rules; parsed from `pattern`.
  TimingThreshold timing_threshold() const;
};

enum class FindingSource { fuzz, static_analysis, runtime_monitor, agent };
enum class FindingStatus { open, fixed, regressed, accepted_risk };

struct SourceLocation {
  std::string file;
  int line = 1;
};

/// One classified defect. The id is a deterministic function of the rule
/// and the evidence, so the same defect keeps the same identity across
/// iterations and reruns.
struct Finding {
  std::string id;
  CweClass cwe;
  Severity severity = Severity::high;
  FindingSource source = FindingSource::fuzz;
  std::string evidence;  // log excerpt or analyzer record, capped at 4 KiB
  std::optional<SourceLocation> location;
  std::uint32_t first_seen_iteration = 0;
  FindingStatus status = FindingStatus::open;
};

struct Threat {
  CweClass cwe;
  std::string description;
  std::string mitigation;  // requirement text embedded into generation prompts
};

/// The threat catalog plus its detection rules, loaded once per campaign
/// and read-only afterwards.
struct ThreatModel {
  std::vector<Threat> threats;
  std::vector<SecurityRule> rules;

  bool has_cwe(int id) const;
  const Threat* find_threat(int id) const;
  const SecurityRule* find_rule(std::string_view rule_id) const;
};

/// Loads and validates a rules file (see docs/rules-file.md). Throws
/// std::runtime_error naming the offending entry on parse or validation
/// failure; an empty threat model is rejected.
ThreatModel load_threat_model(const std::string& path);

/// Whitespace-collapsed, trimmed prefix of the evidence used for identity:
/// the first 512 bytes after normalization.
std::string normalize_evidence(std::string_view evidence);

/// Deterministic finding id: 128-bit hex digest of rule-id ++ 0x1f ++
/// normalized evidence.
std::string finding_id(std::string_view rule_id, std::string_view evidence);

/// Builds a Finding from a matched rule. Evidence is capped at 4 KiB.
Finding make_finding(const SecurityRule& rule, const ThreatModel& model,
                     std::string_view evidence, FindingSource source,
                     std::uint32_t iteration = 0);

/// First-match-wins classification of one evidence string against the
/// enabled rules in declared order. Log-pattern rules always apply;
/// analyzer-message rules additionally apply to static-analysis evidence.
/// Returns nullopt when nothing matches.
std::optional<Finding> classify_finding(std::string_view evidence,
                                        FindingSource source,
                                        const ThreatModel& model);

struct FindingDiff {
  std::vector<Finding> fixed;       // in previous, not in current
  std::vector<Finding> added;       // in current, not in previous
  std::vector<Finding> persisting;  // in both (current instances)
};

/// Partition by finding id. |fixed| + |persisting| == |previous|.
FindingDiff diff_findings(const std::vector<Finding>& previous,
                          const std::vector<Finding>& current);

/// Lifecycle guard. Allowed: open->fixed, fixed->regressed,
/// regressed->fixed, open->accepted_risk. Everything else is rejected.
bool status_transition_allowed(FindingStatus from, FindingStatus to);

/// Applies a transition, throwing std::logic_error when it is not allowed.
void transition_status(Finding& finding, FindingStatus to);

/// True while the finding still demands attention (open or regressed).
bool finding_is_open(const Finding& f);

/// Reference to a patch applied during an iteration; the proposal body is
/// persisted separately in the campaign directory.
struct PatchRef {
  std::string target_file;
  std::string content_digest;
  std::string proposed_by;  // llm | threat-agent | performance-agent | compliance-agent
  std::vector<std::string> addresses;  // finding ids the patch claims to fix
};

/// One pass of the generate -> test -> analyze -> refine cycle.
struct IterationRecord {
  std::uint32_t index = 0;
  std::string firmware_ref;  // source tree content digest
  std::vector<Finding> findings;  // full ledger state as of this iteration
  CoverageVector coverage;        // channel coverages measured this iteration
  std::optional<TimingReport> timing;
  std::optional<MetricsSnapshot> metrics;
  std::vector<PatchRef> patches;  // patches applied to produce this iteration
  double wall_clock_seconds = 0.0;
  std::uint64_t token_cost = 0;
  std::vector<std::string> executed_rules;  // rule ids whose detector ran
  bool build_ok = true;
  std::string build_failure_class;  // empty when the build succeeded

  std::vector<Finding> open_findings() const;
};

// enum <-> string names used in files and reports
std::string to_string(CweCategory c);
std::string to_string(Severity s);
std::string to_string(DetectorKind d);
std::string to_string(FindingSource s);
std::string to_string(FindingStatus s);
CweCategory cwe_category_from_string(std::string_view s);
Severity severity_from_string(std::string_view s);
DetectorKind detector_from_string(std::string_view s);
FindingSource source_from_string(std::string_view s);
FindingStatus status_from_string(std::string_view s);

}  // namespace fwsec
