#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fwsec/agents.hpp"
#include "fwsec/analyzers.hpp"
#include "fwsec/domain.hpp"
#include "fwsec/fuzz.hpp"
#include "fwsec/harness.hpp"
#include "fwsec/llm.hpp"
#include "fwsec/metrics.hpp"

namespace fwsec {

enum class BackendKind { mock, http };

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string mock_dir;  // for mock: directory with by-key/ and playback/
};

struct ConvergenceConfig {
  Severity no_open_findings_above = Severity::low;  // any open finding at or above blocks
  std::uint32_t max_stagnant_iterations = 3;
};

enum class AnalyzerMode { off, replay, live };

struct AnalyzerConfig {
  AnalyzerMode mode = AnalyzerMode::off;
  AnalyzerFormat format = AnalyzerFormat::cppcheck_xml;
  std::string report_file;  // replay mode
  std::string command;      // live mode
};

struct CampaignConfig {
  std::string name = "campaign";
  std::uint64_t seed = 0;  // single seed source; the fuzz plan inherits it
  std::string task_spec;   // inline text; loaded from task_spec_file when empty
  std::string task_spec_file;
  std::string threat_model_path;
  std::string checkmap_path;  // empty: bundled default
  std::string prompts_dir;    // empty: bundled default
  TargetConfig target;
  FuzzPlan fuzz;
  std::set<AgentKind> agents_enabled;
  std::uint32_t max_iterations = 5;
  std::uint32_t needs_human_build_failures = 3;
  ConvergenceConfig convergence;
  double wcet_budget_ms = 50.0;
  double jitter_budget_us = 2000.0;
  double sci_weights[3] = {1.0, 1.0, 1.0};
  bool count_accepted_risk_in_vrr = true;
  AdvisoryThresholds advisory;
  std::vector<std::string> declared_tasks;
  BackendConfig backend;
  AnalyzerConfig analyzer;
  std::string ground_truth_path;  // optional ADA labels
  unsigned fuzz_workers = 0;
  std::string default_file = "main.c";

  void validate() const;
  SnapshotOptions snapshot_options() const;
};

/// Reads the documented JSON config (docs/campaign-config.md). Relative
/// paths resolve against the config file's directory.
CampaignConfig load_campaign_config(const std::filesystem::path& path);

enum class CampaignStatus { running, converged, budget_exhausted, needs_human, failed };

std::string to_string(CampaignStatus s);
CampaignStatus campaign_status_from_string(std::string_view s);

/// Exit code contract for the CLI: 0 converged, 2 budget-exhausted,
/// 3 needs-human, 1 failed.
int exit_code_for(CampaignStatus s);

struct CampaignState {
  CampaignStatus status = CampaignStatus::running;
  std::vector<IterationRecord> iterations;
  std::string active_source_digest;
  std::uint64_t llm_calls = 0;
  std::uint64_t playback_cursor = 0;  // mock backend position, restored on resume
  std::uint32_t consecutive_build_failures = 0;
  std::uint32_t stagnant_iterations = 0;
  std::string failure_diagnostic;
};

struct RunOptions {
  std::filesystem::path campaign_dir;
  std::uint32_t stop_after_iterations = 0;  // 0: run to completion; else pause (status
                                            // stays running) once this many iterations
                                            // are persisted, for resume testing and
                                            // operator-controlled batching
};

/// Drives the full loop: generate -> build -> test (fuzz + static +
/// runtime) -> agents -> metrics -> refine, until convergence, budget
/// exhaustion or escalation. Every iteration is persisted before the next
/// begins, so a killed campaign resumes from its directory.
CampaignState run_campaign(const CampaignConfig& config, const RunOptions& options);

/// Continues a persisted campaign from its last complete iteration.
/// Resuming a finished campaign is a no-op that returns the stored state.
CampaignState resume_campaign(const std::filesystem::path& campaign_dir,
                              std::uint32_t stop_after_iterations = 0);

/// Loads the persisted state (config + iteration records) without running.
CampaignState load_campaign_state(const std::filesystem::path& campaign_dir);
CampaignConfig load_campaign_dir_config(const std::filesystem::path& campaign_dir);

/// Digest of the deterministic projection of a campaign state: volatile
/// fields (wall clock, durations, resource-derived values) are zeroed
/// before hashing, so reruns of a seeded campaign digest identically.
std::string campaign_state_digest(const CampaignState& state);

struct DatasetManifest {
  std::string manifest_json;  // canonical serialization, written to manifest.json
  std::string digest;         // digest128 of manifest_json
};

/// Copies findings, logs, corpus, patches and metrics into out_dir with a
/// digest manifest. Re-export of the same campaign is byte-identical.
/// Refuses a non-empty out_dir unless force is set.
DatasetManifest export_dataset(const std::filesystem::path& campaign_dir,
                               const std::filesystem::path& out_dir, bool force = false);

/// Marks a finding in the latest iteration accepted-risk or fixed with an
/// auditable note; persists the updated ledger.
void triage_finding(const std::filesystem::path& campaign_dir, const std::string& id,
                    FindingStatus new_status, const std::string& note);

struct ComparisonOutcome {
  ComparisonArtifacts artifacts;
  std::vector<std::pair<std::string, CampaignState>> states;  // per configuration
  std::string manifest_json;  // per-config seeds and digests
};

/// Runs each variant under an identical seed and task spec, differing only
/// in agents-enabled (anything else is rejected as a confound), and emits
/// the comparison table plus radar data under work_dir/comparison/.
ComparisonOutcome compare_configurations(const std::vector<CampaignConfig>& variants,
                                         const std::filesystem::path& work_dir);

/// Configuration column name from the enabled-agent set ("LLM Only",
/// "Detection Agent", ..., "All Agents").
std::string configuration_name(const std::set<AgentKind>& agents);

}  // namespace fwsec
