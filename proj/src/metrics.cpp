#include "fwsec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fwsec/domain.hpp"

namespace fwsec {

double vrr_percent(std::uint64_t fixed, std::uint64_t total, bool* vacuous) {
  if (vacuous) *vacuous = false;
  if (fixed > total) throw std::invalid_argument("vrr: fixed > total");
  if (total == 0) {
    if (vacuous) *vacuous = true;
    return 100.0;
  }
  return 100.0 * double(fixed) / double(total);
}

double sci(const CoverageVector& v) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(v.c_fuzz) || !in_unit(v.c_static) || !in_unit(v.c_dynamic))
    throw std::invalid_argument("sci: coverage outside [0,1]");
  if (v.w1 < 0.0 || v.w2 < 0.0 || v.w3 < 0.0)
    throw std::invalid_argument("sci: negative weight");
  double wsum = v.w1 + v.w2 + v.w3;
  if (wsum <= 0.0) throw std::invalid_argument("sci: all-zero weights");
  return (v.w1 * v.c_fuzz + v.w2 * v.c_static + v.w3 * v.c_dynamic) / wsum;
}

double tmcs_percent(std::uint64_t mitigated, std::uint64_t total) {
  if (total == 0) throw std::invalid_argument("tmcs: empty threat model");
  if (mitigated > total) throw std::invalid_argument("tmcs: mitigated > total");
  return 100.0 * double(mitigated) / double(total);
}

double detection_accuracy(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp,
                          std::uint64_t fn) {
  std::uint64_t all = tp + tn + fp + fn;
  if (all == 0) throw std::invalid_argument("ADA undefined: empty evaluation set");
  return double(tp + tn) / double(all);
}

double iei(const IterationDelta& delta) {
  if (!(delta.resources > 0.0)) throw std::invalid_argument("iei: resources must be > 0");
  return (delta.delta_security + delta.delta_performance) / delta.resources;
}

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

double performance_score(const IterationRecord& record, const SnapshotOptions& opts) {
  if (!record.timing.has_value() || record.timing->tasks.empty()) return 0.0;
  double wcet = record.timing->max_wcet_ms();
  double jitter = record.timing->max_jitter_us();
  double wcet_part = 1.0 - clamp01(wcet / opts.wcet_budget_ms);
  double jitter_part = 1.0 - clamp01(jitter / opts.jitter_budget_us);
  return (wcet_part + jitter_part) / 2.0;
}

}  // namespace

MetricsSnapshot compute_snapshot(const IterationRecord& record,
                                 const IterationRecord* previous,
                                 const ThreatModel& model,
                                 const SnapshotOptions& opts) {
  MetricsSnapshot snap;
  MetricsRawInputs& raw = snap.raw;

  for (const auto& f : record.findings) {
    if (f.status == FindingStatus::accepted_risk && !opts.count_accepted_risk_in_vrr)
      continue;
    ++raw.total_identified;
    if (f.status == FindingStatus::fixed) ++raw.fixed_count;
  }
  if (previous == nullptr) {
    snap.vrr_baseline = true;
  } else {
    snap.vrr = vrr_percent(raw.fixed_count, raw.total_identified, &snap.vrr_vacuous);
  }

  // A threat counts as mitigated only when no finding of its CWE is open
  // and at least one of its detection rules actually ran this iteration.
  std::set<std::string> executed(record.executed_rules.begin(),
                                 record.executed_rules.end());
  raw.total_threats = model.threats.size();
  for (const auto& threat : model.threats) {
    bool open = false;
    for (const auto& f : record.findings)
      if (f.cwe.id == threat.cwe.id && finding_is_open(f)) open = true;
    bool rule_ran = false;
    for (const auto& rule : model.rules)
      if (rule.cwe == threat.cwe.id && executed.count(rule.id)) rule_ran = true;
    if (!open && rule_ran) ++raw.mitigated_threats;
  }
  if (raw.total_threats > 0)
    snap.tmcs = tmcs_percent(raw.mitigated_threats, raw.total_threats);

  raw.coverage = record.coverage;
  raw.coverage.w1 = opts.sci_w1;
  raw.coverage.w2 = opts.sci_w2;
  raw.coverage.w3 = opts.sci_w3;
  snap.sci_value = sci(raw.coverage);

  if (record.timing.has_value() && !record.timing->tasks.empty()) {
    snap.wcet_ms = record.timing->max_wcet_ms();
    snap.jitter_us = record.timing->max_jitter_us();
    raw.deadline_misses = record.timing->total_deadline_misses();
  }

  raw.wall_clock_seconds = record.wall_clock_seconds;
  raw.token_cost = record.token_cost;
  raw.security_score =
      (snap.vrr.value_or(0.0) + snap.tmcs.value_or(0.0)) / 2.0 / 100.0;
  raw.performance_score = performance_score(record, opts);
  raw.resources = opts.resource_wall_weight * (record.wall_clock_seconds / 3600.0) +
                  opts.resource_token_weight * (double(record.token_cost) / 1e6);

  if (previous != nullptr && previous->metrics.has_value() && raw.resources > 0.0) {
    IterationDelta delta;
    delta.delta_security = raw.security_score - previous->metrics->raw.security_score;
    delta.delta_performance =
        raw.performance_score - previous->metrics->raw.performance_score;
    delta.resources = raw.resources;
    snap.iei_value = iei(delta);
  }
  return snap;
}

namespace {

const char* kMetricRows[] = {
    "Vulnerability Remediation Rate (VRR) (%)",
    "Security Coverage Index (SCI)",
    "Threat Model Compliance Score (TMCS) (%)",
    "Worst-Case Execution Time (WCET) (ms)",
    "Task Jitter (TJ) (us)",
    "Agent Detection Accuracy (ADA)",
    "Iteration Efficiency Index (IEI)",
};

const char* kRadarAxes[] = {
    "vrr", "sci", "tmcs", "wcet_ms_inverted", "jitter_us_inverted", "ada", "iei",
};

std::optional<double> metric_value(const MetricsSnapshot& s, std::size_t row) {
  switch (row) {
    case 0: return s.vrr;
    case 1: return s.sci_value;
    case 2: return s.tmcs;
    case 3: return s.wcet_ms;
    case 4: return s.jitter_us;
    case 5: return s.ada;
    case 6: return s.iei_value;
  }
  return std::nullopt;
}

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

// Canonical comparison column order; unrecognized names keep input order.
int canonical_rank(const std::string& name) {
  if (name == "LLM Only") return 0;
  if (name == "Detection Agent") return 1;
  if (name == "Optimization Agent") return 2;
  if (name == "Verification Agent") return 3;
  if (name == "All Agents") return 4;
  return 5;
}

}  // namespace

ComparisonArtifacts export_comparison(
    const std::vector<std::pair<std::string, MetricsSnapshot>>& snapshots) {
  if (snapshots.empty())
    throw std::invalid_argument("export_comparison: need at least one snapshot");

  std::vector<std::size_t> order(snapshots.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return canonical_rank(snapshots[a].first) < canonical_rank(snapshots[b].first);
  });

  ComparisonArtifacts out;
  std::ostringstream table;
  table << "Evaluation Metric";
  for (std::size_t i : order) {
    table << '\t' << snapshots[i].first;
    out.column_order.push_back(snapshots[i].first);
  }
  table << '\n';
  for (std::size_t row = 0; row < 7; ++row) {
    table << kMetricRows[row];
    for (std::size_t i : order) {
      auto v = metric_value(snapshots[i].second, row);
      table << '\t' << (v ? fmt(*v, 2) : std::string("n/a"));
    }
    table << '\n';
  }
  out.table_tsv = table.str();

  // Radar axes: benefit metrics scale against the best (max) value, cost
  // metrics (wcet, jitter) invert against the best (min) value.
  std::ostringstream matrix;
  for (std::size_t i : order) {
    const MetricsSnapshot& s = snapshots[i].second;
    for (std::size_t row = 0; row < 7; ++row) {
      bool cost = (row == 3 || row == 4);
      double best = cost ? 1e300 : 0.0;
      for (const auto& [_, other] : snapshots) {
        auto v = metric_value(other, row);
        if (!v) continue;
        best = cost ? std::min(best, *v) : std::max(best, *v);
      }
      auto v = metric_value(s, row);
      double norm = 0.0;
      if (v) {
        if (cost)
          norm = (*v <= 0.0) ? 1.0 : clamp01(best / *v);
        else
          norm = (best <= 0.0) ? 0.0 : clamp01(*v / best);
      }
      matrix << (row == 0 ? "" : " ") << fmt(norm, 6);
    }
    matrix << '\n';
  }
  out.radar_matrix = matrix.str();

  std::ostringstream legend;
  legend << "# axes (columns), left to right\n";
  for (const char* axis : kRadarAxes) legend << axis << '\n';
  legend << "# rows, top to bottom\n";
  for (std::size_t i : order) legend << snapshots[i].first << '\n';
  out.radar_legend = legend.str();
  return out;
}

}  // namespace fwsec
