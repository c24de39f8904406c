#include "fwsec/agents.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "fwsec/llm.hpp"
#include "fwsec/metrics.hpp"
#include "json.hpp"

using nlohmann::json;

namespace fwsec {

std::string to_string(AgentKind a) {
  switch (a) {
    case AgentKind::threat: return "threat";
    case AgentKind::performance: return "performance";
    case AgentKind::compliance: return "compliance";
  }
  return "threat";
}

std::string to_string(VerdictKind v) {
  switch (v) {
    case VerdictKind::confirm: return "confirm";
    case VerdictKind::reject: return "reject";
    case VerdictKind::enrich: return "enrich";
    case VerdictKind::advise: return "advise";
    case VerdictKind::pass: return "pass";
    case VerdictKind::fail: return "fail";
  }
  return "confirm";
}

AgentKind agent_from_string(std::string_view s) {
  if (s == "threat") return AgentKind::threat;
  if (s == "performance") return AgentKind::performance;
  if (s == "compliance") return AgentKind::compliance;
  throw std::runtime_error("unknown agent: '" + std::string(s) + "'");
}

VerdictKind verdict_from_string(std::string_view s) {
  if (s == "confirm") return VerdictKind::confirm;
  if (s == "reject") return VerdictKind::reject;
  if (s == "enrich") return VerdictKind::enrich;
  if (s == "advise") return VerdictKind::advise;
  if (s == "pass") return VerdictKind::pass;
  if (s == "fail") return VerdictKind::fail;
  throw std::runtime_error("unknown verdict: '" + std::string(s) + "'");
}

namespace {

// All double-quoted literal bodies in one source file; handles \" escapes,
// good enough for C-family sources.
std::vector<std::string> string_literals(const std::string& source) {
  std::vector<std::string> literals;
  bool inside = false;
  std::string current;
  for (std::size_t i = 0; i < source.size(); ++i) {
    char c = source[i];
    if (!inside) {
      if (c == '"') {
        inside = true;
        current.clear();
      }
      continue;
    }
    if (c == '\\' && i + 1 < source.size()) {
      char esc = source[i + 1];
      if (esc == 'n')
        current.push_back('\n');
      else if (esc == 't')
        current.push_back('\t');
      else
        current.push_back(esc);
      ++i;
      continue;
    }
    if (c == '"') {
      inside = false;
      literals.push_back(current);
      continue;
    }
    current.push_back(c);
  }
  return literals;
}

bool evidence_is_source_literal(const std::string& evidence, const SourceTree& tree) {
  if (evidence.empty()) return false;
  for (const auto& [path, content] : tree) {
    for (const auto& literal : string_literals(content)) {
      if (!literal.empty() && literal.find(evidence) != std::string::npos) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<AgentVerdict> threat_agent_review(const std::vector<Finding>& findings,
                                              const SourceTree& tree,
                                              LlmBackend* backend) {
  std::vector<AgentVerdict> verdicts;
  std::set<std::string> reviewed;  // exactly one decisive verdict per finding id
  for (const auto& f : findings) {
    if (!reviewed.insert(f.id).second) continue;
    AgentVerdict v;
    v.agent = AgentKind::threat;
    v.subject = f.id;
    // Evidence lines that exist only as hard-coded string literals in the
    // source were printed, not triggered: classic pattern false positive.
    std::string first_line = f.evidence.substr(0, f.evidence.find('\n'));
    if (f.source != FindingSource::static_analysis &&
        evidence_is_source_literal(first_line, tree)) {
      v.verdict = VerdictKind::reject;
      v.annotation = "evidence matches a string literal in the source; pattern hit is "
                     "a printed constant, not an observed defect";
    } else {
      v.verdict = VerdictKind::confirm;
      v.annotation = "evidence corroborated by " + to_string(f.source) + " observation";
    }
    verdicts.push_back(std::move(v));
  }

  if (backend != nullptr && !findings.empty()) {
    try {
      GenerationRequest request;
      request.role = LlmRole::generate_patch;
      request.system_prompt =
          "You are a firmware threat analyst. For each finding id, reply with one "
          "line '<finding-id>: <context note>'.";
      std::ostringstream prompt;
      for (const auto& f : findings)
        prompt << f.id << " CWE-" << f.cwe.id << ": " << f.evidence << '\n';
      request.user_prompt = prompt.str();
      LlmResponse response = backend->complete(request);
      std::istringstream lines(response.text);
      std::string line;
      while (std::getline(lines, line)) {
        std::size_t colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string id = line.substr(0, colon);
        for (const auto& f : findings) {
          if (f.id != id) continue;
          AgentVerdict v;
          v.agent = AgentKind::threat;
          v.subject = id;
          v.verdict = VerdictKind::enrich;
          v.annotation = line.substr(colon + 1);
          verdicts.push_back(std::move(v));
        }
      }
    } catch (const std::exception& e) {
      std::cerr << "[fwsec] threat agent enrichment degraded to rules-only: "
                << e.what() << '\n';
    }
  }
  return verdicts;
}

std::vector<AgentVerdict> performance_agent_review(const TimingReport& report,
                                                   const SourceTree& tree,
                                                   const AdvisoryThresholds& thresholds,
                                                   LlmBackend* backend) {
  (void)tree;
  (void)backend;  // rule layer is sufficient; enrichment hooks in via campaign config
  if (report.tasks.empty())
    throw std::invalid_argument("performance_agent_review: empty timing report");

  std::vector<AgentVerdict> verdicts;
  char buf[160];
  for (const auto& task : report.tasks) {
    if (task.wcet_ms > thresholds.wcet_ms) {
      std::snprintf(buf, sizeof(buf),
                    "reduce WCET: task=%s wcet_ms=%.3f advisory_ms=%.3f",
                    task.task.c_str(), task.wcet_ms, thresholds.wcet_ms);
      verdicts.push_back({AgentKind::performance, task.task, VerdictKind::advise, buf,
                          std::nullopt});
    }
    if (task.jitter_us > thresholds.jitter_us) {
      std::snprintf(buf, sizeof(buf),
                    "reduce jitter: task=%s jitter_us=%.3f advisory_us=%.3f",
                    task.task.c_str(), task.jitter_us, thresholds.jitter_us);
      verdicts.push_back({AgentKind::performance, task.task, VerdictKind::advise, buf,
                          std::nullopt});
    }
  }
  return verdicts;
}

std::vector<AgentVerdict> compliance_agent_check(const IterationRecord& record,
                                                 const ThreatModel& model) {
  std::vector<AgentVerdict> verdicts;
  auto emit = [&](bool ok, const std::string& check, const std::string& remedy) {
    AgentVerdict v;
    v.agent = AgentKind::compliance;
    v.subject = "campaign";
    v.verdict = ok ? VerdictKind::pass : VerdictKind::fail;
    v.annotation = check + (ok ? ": pass" : ": fail; " + remedy);
    verdicts.push_back(std::move(v));
  };

  bool all_ruled = true;
  for (const auto& threat : model.threats) {
    bool has_rule = false;
    for (const auto& rule : model.rules)
      if (rule.cwe == threat.cwe.id && rule.enabled) has_rule = true;
    if (!has_rule) all_ruled = false;
  }
  emit(all_ruled, "threat-rule-coverage",
       "add or enable a detection rule for every declared threat");

  bool no_open_critical = true;
  for (const auto& f : record.findings)
    if (finding_is_open(f) && f.severity == Severity::critical) no_open_critical = false;
  emit(no_open_critical, "no-open-critical-finding",
       "remediate or triage the open critical findings");

  std::uint64_t misses =
      record.timing.has_value() ? record.timing->total_deadline_misses() : 0;
  emit(misses == 0, "zero-deadline-misses",
       "investigate the " + std::to_string(misses) + " missed deadline(s)");

  bool patches_anchored = true;
  for (const auto& p : record.patches)
    if (p.addresses.empty()) patches_anchored = false;
  emit(patches_anchored, "patches-reference-findings",
       "every applied patch must reference at least one finding id");
  return verdicts;
}

GroundTruth GroundTruth::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ground truth file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("ground truth parse error: " + std::string(e.what()));
  }
  GroundTruth truth;
  if (!doc.contains("labels") || !doc["labels"].is_object())
    throw std::runtime_error("ground truth file needs a 'labels' object");
  for (const auto& [id, value] : doc["labels"].items())
    truth.labels[id] = value.get<bool>();
  return truth;
}

std::pair<ConfusionMatrix, double> score_ada(const std::vector<AgentVerdict>& verdicts,
                                             const GroundTruth& truth) {
  ConfusionMatrix m;
  for (const auto& [id, is_vuln] : truth.labels) {
    const AgentVerdict* reviewed = nullptr;
    for (const auto& v : verdicts) {
      if (v.agent != AgentKind::threat || v.subject != id) continue;
      if (v.verdict == VerdictKind::confirm || v.verdict == VerdictKind::reject) {
        reviewed = &v;
        break;
      }
    }
    if (reviewed == nullptr)
      throw std::invalid_argument("ground-truth label " + id +
                                  " covers no reviewed finding");
    bool confirmed = reviewed->verdict == VerdictKind::confirm;
    if (confirmed && is_vuln)
      ++m.tp;
    else if (confirmed && !is_vuln)
      ++m.fp;
    else if (!confirmed && !is_vuln)
      ++m.tn;
    else
      ++m.fn;
  }
  double ada = detection_accuracy(m.tp, m.tn, m.fp, m.fn);
  return {m, ada};
}

void sort_verdicts(std::vector<AgentVerdict>& verdicts) {
  std::stable_sort(verdicts.begin(), verdicts.end(),
                   [](const AgentVerdict& a, const AgentVerdict& b) {
                     if (a.agent != b.agent) return int(a.agent) < int(b.agent);
                     if (a.subject != b.subject) return a.subject < b.subject;
                     return int(a.verdict) < int(b.verdict);
                   });
}

}  // namespace fwsec
