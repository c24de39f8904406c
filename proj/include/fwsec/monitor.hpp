#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fwsec/domain.hpp"
#include "fwsec/timing.hpp"

namespace fwsec {

struct TimingFindingsResult {
  std::vector<Finding> findings;
  double dynamic_coverage = 0.0;  // tasks with samples / tasks declared
  bool coverage_defined = true;   // false when no tasks are declared
  std::vector<std::string> executed_rules;
};

/// Evaluates every enabled timing-threshold rule ("metric<=value" over
/// wcet-ms, jitter-us or deadline-misses) against each task in the report;
/// a breach yields one finding per (rule, task). With no declared tasks the
/// coverage is returned as 0 and flagged undefined.
TimingFindingsResult timing_findings(const TimingReport& report, const ThreatModel& model,
                                     const std::vector<std::string>& declared_tasks,
                                     std::uint32_t iteration = 0);

}  // namespace fwsec
