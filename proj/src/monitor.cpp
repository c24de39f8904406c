#include "fwsec/monitor.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace fwsec {

TimingFindingsResult timing_findings(const TimingReport& report, const ThreatModel& model,
                                     const std::vector<std::string>& declared_tasks,
                                     std::uint32_t iteration) {
  TimingFindingsResult result;
  std::set<std::string> seen;
  char buf[192];

  for (const auto& rule : model.rules) {
    if (!rule.enabled || rule.detector != DetectorKind::timing_threshold) continue;
    result.executed_rules.push_back(rule.id);
    TimingThreshold threshold = rule.timing_threshold();
    for (const auto& task : report.tasks) {
      double value = 0.0;
      const char* metric = "";
      switch (threshold.metric) {
        case TimingMetric::wcet_ms:
          value = task.wcet_ms;
          metric = "wcet-ms";
          break;
        case TimingMetric::jitter_us:
          value = task.jitter_us;
          metric = "jitter-us";
          break;
        case TimingMetric::deadline_misses:
          value = double(task.deadline_miss_count);
          metric = "deadline-misses";
          break;
      }
      if (value <= threshold.value) continue;
      std::snprintf(buf, sizeof(buf), "task %s: %s=%.3f exceeds threshold %s<=%.3f",
                    task.task.c_str(), metric, value, metric, threshold.value);
      Finding f = make_finding(rule, model, buf, FindingSource::runtime_monitor, iteration);
      if (seen.insert(f.id).second) result.findings.push_back(std::move(f));
    }
  }

  if (declared_tasks.empty()) {
    result.dynamic_coverage = 0.0;
    result.coverage_defined = false;
  } else {
    std::size_t sampled = 0;
    for (const auto& name : declared_tasks)
      if (report.find(name) != nullptr) ++sampled;
    result.dynamic_coverage = double(sampled) / double(declared_tasks.size());
  }
  return result;
}

}  // namespace fwsec
