#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fwsec/digest.hpp"
#include "fwsec/domain.hpp"
#include "fwsec/timing.hpp"

namespace fwsec {

class LlmBackend;

enum class AgentKind { threat, performance, compliance };
enum class VerdictKind { confirm, reject, enrich, advise, pass, fail };

std::string to_string(AgentKind a);
std::string to_string(VerdictKind v);
AgentKind agent_from_string(std::string_view s);
VerdictKind verdict_from_string(std::string_view s);

struct AgentVerdict {
  AgentKind agent = AgentKind::threat;
  std::string subject;  // finding id, task name, or "campaign"
  VerdictKind verdict = VerdictKind::confirm;
  std::string annotation;
  std::optional<std::string> suggested_patch;  // patch ref, when an agent proposes one
};

/// Deterministic rule pass over findings: a finding whose evidence text
/// appears verbatim inside a string literal of the source is a false
/// positive (the target merely printed a hard-coded string) and is
/// rejected; everything else is confirmed. Every finding receives exactly
/// one confirm/reject verdict. An optional backend adds enrich verdicts;
/// backend errors degrade to rules-only with a warning, never an abort.
std::vector<AgentVerdict> threat_agent_review(const std::vector<Finding>& findings,
                                              const SourceTree& tree,
                                              LlmBackend* backend = nullptr);

struct AdvisoryThresholds {
  double wcet_ms = 10.0;
  double jitter_us = 200.0;
};

/// Advise verdicts for tasks whose WCET or jitter exceed the advisory
/// thresholds; annotations name the task and metric. The report must be
/// non-empty.
std::vector<AgentVerdict> performance_agent_review(const TimingReport& report,
                                                   const SourceTree& tree,
                                                   const AdvisoryThresholds& thresholds,
                                                   LlmBackend* backend = nullptr);

/// Campaign gate checks, one pass/fail verdict each:
///   (a) every threat has at least one enabled detection rule
///   (b) no open critical finding
///   (c) zero deadline misses
///   (d) every applied patch references at least one finding
std::vector<AgentVerdict> compliance_agent_check(const IterationRecord& record,
                                                 const ThreatModel& model);

struct ConfusionMatrix {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
};

struct GroundTruth {
  std::map<std::string, bool> labels;  // finding id -> is-true-vulnerability

  static GroundTruth load(const std::string& path);
};

/// Scores the threat agent's confirm/reject verdicts against labeled ground
/// truth. Every label must cover a reviewed finding; the evaluation set
/// must be non-empty. Returns the matrix and (tp+tn)/(tp+tn+fp+fn).
std::pair<ConfusionMatrix, double> score_ada(const std::vector<AgentVerdict>& verdicts,
                                             const GroundTruth& truth);

/// Deterministic merge order for concurrently produced verdict lists.
void sort_verdicts(std::vector<AgentVerdict>& verdicts);

}  // namespace fwsec
