#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fwsec {

struct IterationRecord;
struct ThreatModel;

/// Coverage of the three testing channels, each in [0,1], plus the weights
/// used to blend them into the coverage index.
struct CoverageVector {
  double c_fuzz = 0.0;
  double c_static = 0.0;
  double c_dynamic = 0.0;
  double w1 = 1.0;
  double w2 = 1.0;
  double w3 = 1.0;
};

/// Per-iteration improvement operands for the efficiency index.
struct IterationDelta {
  double delta_security = 0.0;     // security score delta, scores in [0,1]
  double delta_performance = 0.0;  // performance score delta, scores in [0,1]
  double resources = 0.0;          // normalized cost, must be > 0
};

/// Remediation rate in percent: 100 * fixed / total.
/// total == 0 is defined as a vacuous 100% (nothing to fix) and sets
/// *vacuous when provided. Throws std::invalid_argument when fixed > total.
double vrr_percent(std::uint64_t fixed, std::uint64_t total, bool* vacuous = nullptr);

/// Weighted coverage index: (w1*Cf + w2*Cs + w3*Cd) / (w1+w2+w3).
/// Throws std::invalid_argument on all-zero weights, negative weights, or
/// coverage values outside [0,1].
double sci(const CoverageVector& v);

/// Threat mitigation compliance in percent: 100 * mitigated / total.
/// Throws std::invalid_argument when total == 0 or mitigated > total.
double tmcs_percent(std::uint64_t mitigated, std::uint64_t total);

/// Detection accuracy: (tp+tn) / (tp+tn+fp+fn).
/// Throws std::invalid_argument when all four counts are zero.
double detection_accuracy(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp,
                          std::uint64_t fn);

/// Efficiency index: (delta_security + delta_performance) / resources.
/// Negative deltas pass through (a regression yields a negative index).
/// Throws std::invalid_argument when resources <= 0.
double iei(const IterationDelta& delta);

/// All operands that fed a snapshot, kept verbatim so every reported value
/// can be re-derived from its inputs.
struct MetricsRawInputs {
  std::uint64_t fixed_count = 0;
  std::uint64_t total_identified = 0;
  std::uint64_t mitigated_threats = 0;
  std::uint64_t total_threats = 0;
  CoverageVector coverage;
  std::uint64_t deadline_misses = 0;
  double wall_clock_seconds = 0.0;  // volatile: excluded from state digests
  std::uint64_t token_cost = 0;
  double security_score = 0.0;      // (vrr + tmcs) / 2, normalized to [0,1]
  double performance_score = 0.0;   // budget-relative, in [0,1]
  double resources = 0.0;           // volatile: derived from wall clock
};

struct MetricsSnapshot {
  bool vrr_baseline = false;  // first iteration: no previous population
  bool vrr_vacuous = false;
  std::optional<double> vrr;   // percent
  double sci_value = 0.0;
  std::optional<double> tmcs;  // percent
  std::optional<double> wcet_ms;
  std::optional<double> jitter_us;
  std::optional<double> ada;
  std::optional<double> iei_value;  // volatile: resources include wall clock
  MetricsRawInputs raw;
};

struct SnapshotOptions {
  double wcet_budget_ms = 50.0;
  double jitter_budget_us = 2000.0;
  double sci_w1 = 1.0;
  double sci_w2 = 1.0;
  double sci_w3 = 1.0;
  // resources = wall_weight * (wall_s / 3600) + token_weight * (tokens / 1e6)
  double resource_wall_weight = 1.0;
  double resource_token_weight = 1.0;
  bool count_accepted_risk_in_vrr = true;
};

/// Assembles the full metric suite for one iteration. `previous` enables the
/// delta-based values (vrr gets a real population, iei becomes available);
/// without it the snapshot is marked as baseline.
MetricsSnapshot compute_snapshot(const IterationRecord& record,
                                 const IterationRecord* previous,
                                 const ThreatModel& model,
                                 const SnapshotOptions& opts);

/// Comparison artifacts across named configurations: a tab-delimited table
/// (metric rows, one column per configuration) and radar data (one row per
/// configuration, one normalized [0,1] axis per metric; cost-type axes are
/// inverted so larger is always better).
struct ComparisonArtifacts {
  std::string table_tsv;
  std::string radar_matrix;  // headerless, space-separated
  std::string radar_legend;  // one axis name per line, column order
  std::vector<std::string> column_order;
};

ComparisonArtifacts export_comparison(
    const std::vector<std::pair<std::string, MetricsSnapshot>>& snapshots);

}  // namespace fwsec
