#include "fwsec/domain.hpp"

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <set>
#include <stdexcept>

#include "fwsec/digest.hpp"

namespace fwsec {

namespace {

constexpr std::size_t kEvidenceCap = 4096;
constexpr std::size_t kIdentityPrefix = 512;

}  // namespace

Severity default_severity(int cwe_id) {
  switch (cwe_id) {
    case 120:
      return Severity::critical;
    case 362:
    case 400:
      return Severity::high;
    default:
      return Severity::medium;
  }
}

TimingThreshold SecurityRule::timing_threshold() const {
  if (detector != DetectorKind::timing_threshold)
    throw std::logic_error("rule '" + id + "' is not a timing-threshold rule");
  std::size_t op = pattern.find("<=");
  if (op == std::string::npos)
    throw std::runtime_error("rule '" + id + "': timing pattern must be metric<=value");
  std::string metric = pattern.substr(0, op);
  std::string value = pattern.substr(op + 2);
  TimingThreshold t{};
  if (metric == "wcet-ms")
    t.metric = TimingMetric::wcet_ms;
  else if (metric == "jitter-us")
    t.metric = TimingMetric::jitter_us;
  else if (metric == "deadline-misses")
    t.metric = TimingMetric::deadline_misses;
  else
    throw std::runtime_error("rule '" + id + "': unknown timing metric '" + metric + "'");
  char* end = nullptr;
  t.value = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty())
    throw std::runtime_error("rule '" + id + "': bad threshold value '" + value + "'");
  return t;
}

bool ThreatModel::has_cwe(int id) const { return find_threat(id) != nullptr; }

const Threat* ThreatModel::find_threat(int id) const {
  for (const auto& t : threats)
    if (t.cwe.id == id) return &t;
  return nullptr;
}

const SecurityRule* ThreatModel::find_rule(std::string_view rule_id) const {
  for (const auto& r : rules)
    if (r.id == rule_id) return &r;
  return nullptr;
}

std::string normalize_evidence(std::string_view evidence) {
  std::string out;
  out.reserve(std::min(evidence.size(), kIdentityPrefix));
  bool in_space = true;  // leading whitespace is dropped
  for (char c : evidence) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!in_space) {
        out.push_back(' ');
        in_space = true;
      }
    } else {
      out.push_back(c);
      in_space = false;
    }
    if (out.size() >= kIdentityPrefix) break;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  if (out.size() > kIdentityPrefix) out.resize(kIdentityPrefix);
  return out;
}

std::string finding_id(std::string_view rule_id, std::string_view evidence) {
  std::string material;
  material.reserve(rule_id.size() + 1 + kIdentityPrefix);
  material.append(rule_id);
  material.push_back('\x1f');
  material.append(normalize_evidence(evidence));
  return digest128_hex(material);
}

Finding make_finding(const SecurityRule& rule, const ThreatModel& model,
                     std::string_view evidence, FindingSource source,
                     std::uint32_t iteration) {
  const Threat* threat = model.find_threat(rule.cwe);
  if (threat == nullptr)
    throw std::logic_error("rule '" + rule.id + "' references CWE-" +
                           std::to_string(rule.cwe) + " absent from the threat model");
  Finding f;
  f.id = finding_id(rule.id, evidence);
  f.cwe = threat->cwe;
  f.severity = rule.severity;
  f.source = source;
  f.evidence = std::string(evidence.substr(0, kEvidenceCap));
  f.first_seen_iteration = iteration;
  f.status = FindingStatus::open;
  return f;
}

namespace {

// std::regex has no inline flags; a leading "(?i)" selects icase instead.
std::regex compile_rule_pattern(const SecurityRule& rule) {
  std::string pat = rule.pattern;
  auto flags = std::regex::ECMAScript | std::regex::optimize;
  if (pat.rfind("(?i)", 0) == 0) {
    pat = pat.substr(4);
    flags |= std::regex::icase;
  }
  try {
    return std::regex(pat, flags);
  } catch (const std::regex_error& e) {
    throw std::runtime_error("rule '" + rule.id + "': bad pattern: " + e.what());
  }
}

bool rule_applies(const SecurityRule& rule, FindingSource source) {
  if (!rule.enabled) return false;
  if (rule.detector == DetectorKind::log_pattern) return true;
  if (rule.detector == DetectorKind::analyzer_message)
    return source == FindingSource::static_analysis;
  return false;
}

}  // namespace

std::optional<Finding> classify_finding(std::string_view evidence,
                                        FindingSource source,
                                        const ThreatModel& model) {
  if (evidence.empty()) throw std::invalid_argument("classify_finding: empty evidence");
  std::string text(evidence);
  for (const auto& rule : model.rules) {
    if (!rule_applies(rule, source)) continue;
    std::regex re = compile_rule_pattern(rule);
    if (std::regex_search(text, re)) return make_finding(rule, model, evidence, source);
  }
  return std::nullopt;
}

FindingDiff diff_findings(const std::vector<Finding>& previous,
                          const std::vector<Finding>& current) {
  std::set<std::string> current_ids, previous_ids;
  for (const auto& f : current) current_ids.insert(f.id);
  for (const auto& f : previous) previous_ids.insert(f.id);

  FindingDiff out;
  for (const auto& f : previous)
    if (!current_ids.count(f.id)) out.fixed.push_back(f);
  for (const auto& f : current) {
    if (previous_ids.count(f.id))
      out.persisting.push_back(f);
    else
      out.added.push_back(f);
  }
  return out;
}

bool status_transition_allowed(FindingStatus from, FindingStatus to) {
  switch (from) {
    case FindingStatus::open:
      return to == FindingStatus::fixed || to == FindingStatus::accepted_risk;
    case FindingStatus::fixed:
      return to == FindingStatus::regressed;
    case FindingStatus::regressed:
      return to == FindingStatus::fixed;
    case FindingStatus::accepted_risk:
      return false;
  }
  return false;
}

void transition_status(Finding& finding, FindingStatus to) {
  if (!status_transition_allowed(finding.status, to))
    throw std::logic_error("finding " + finding.id + ": transition " +
                           to_string(finding.status) + " -> " + to_string(to) +
                           " not allowed");
  finding.status = to;
}

bool finding_is_open(const Finding& f) {
  return f.status == FindingStatus::open || f.status == FindingStatus::regressed;
}

std::vector<Finding> IterationRecord::open_findings() const {
  std::vector<Finding> out;
  for (const auto& f : findings)
    if (finding_is_open(f)) out.push_back(f);
  return out;
}

std::string to_string(CweCategory c) {
  switch (c) {
    case CweCategory::memory: return "memory";
    case CweCategory::concurrency: return "concurrency";
    case CweCategory::availability: return "availability";
    case CweCategory::other: return "other";
  }
  return "other";
}

std::string to_string(Severity s) {
  switch (s) {
    case Severity::low: return "low";
    case Severity::medium: return "medium";
    case Severity::high: return "high";
    case Severity::critical: return "critical";
  }
  return "high";
}

std::string to_string(DetectorKind d) {
  switch (d) {
    case DetectorKind::log_pattern: return "log-pattern";
    case DetectorKind::analyzer_message: return "analyzer-message";
    case DetectorKind::timing_threshold: return "timing-threshold";
    case DetectorKind::freeze: return "freeze";
  }
  return "log-pattern";
}

std::string to_string(FindingSource s) {
  switch (s) {
    case FindingSource::fuzz: return "fuzz";
    case FindingSource::static_analysis: return "static-analysis";
    case FindingSource::runtime_monitor: return "runtime-monitor";
    case FindingSource::agent: return "agent";
  }
  return "fuzz";
}

std::string to_string(FindingStatus s) {
  switch (s) {
    case FindingStatus::open: return "open";
    case FindingStatus::fixed: return "fixed";
    case FindingStatus::regressed: return "regressed";
    case FindingStatus::accepted_risk: return "accepted-risk";
  }
  return "open";
}

namespace {

[[noreturn]] void bad_enum(std::string_view what, std::string_view value) {
  throw std::runtime_error("unknown " + std::string(what) + ": '" + std::string(value) + "'");
}

}  // namespace

CweCategory cwe_category_from_string(std::string_view s) {
  if (s == "memory") return CweCategory::memory;
  if (s == "concurrency") return CweCategory::concurrency;
  if (s == "availability") return CweCategory::availability;
  if (s == "other") return CweCategory::other;
  bad_enum("cwe category", s);
}

Severity severity_from_string(std::string_view s) {
  if (s == "low") return Severity::low;
  if (s == "medium") return Severity::medium;
  if (s == "high") return Severity::high;
  if (s == "critical") return Severity::critical;
  bad_enum("severity", s);
}

DetectorKind detector_from_string(std::string_view s) {
  if (s == "log-pattern") return DetectorKind::log_pattern;
  if (s == "analyzer-message") return DetectorKind::analyzer_message;
  if (s == "timing-threshold") return DetectorKind::timing_threshold;
  if (s == "freeze") return DetectorKind::freeze;
  bad_enum("detector", s);
}

FindingSource source_from_string(std::string_view s) {
  if (s == "fuzz") return FindingSource::fuzz;
  if (s == "static-analysis") return FindingSource::static_analysis;
  if (s == "runtime-monitor") return FindingSource::runtime_monitor;
  if (s == "agent") return FindingSource::agent;
  bad_enum("finding source", s);
}

FindingStatus status_from_string(std::string_view s) {
  if (s == "open") return FindingStatus::open;
  if (s == "fixed") return FindingStatus::fixed;
  if (s == "regressed") return FindingStatus::regressed;
  if (s == "accepted-risk") return FindingStatus::accepted_risk;
  bad_enum("finding status", s);
}

}  // namespace fwsec
