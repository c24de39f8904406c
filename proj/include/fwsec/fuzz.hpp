#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fwsec/domain.hpp"
#include "fwsec/harness.hpp"

namespace fwsec {

/// SplitMix64: the campaign's named random source. Fixed here and in
/// docs/fuzzing.md so that identical seeds reproduce identical corpora
/// regardless of platform or reimplementation. Bounded draws use modulo
/// reduction, also part of the documented contract.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t bounded(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

 private:
  std::uint64_t state_;
};

/// Per-trial stream: the plan seed mixed with the trial index, scrambled
/// through one SplitMix64 step so neighboring trials do not correlate.
std::uint64_t trial_stream_seed(std::uint64_t seed, std::uint32_t trial_index);

enum class Generator { random_bytes, ascii_garbage, boundary_lengths, malformed_mqtt, flood };

std::string to_string(Generator g);
Generator generator_from_string(std::string_view s);

struct FuzzPlan {
  std::uint64_t seed = 0;
  std::uint32_t trials = 1;
  std::uint32_t inputs_per_trial = 4;
  std::uint32_t max_input_len = 64;
  std::vector<Generator> generators;
  double flood_rate_multiplier = 8.0;

  /// trials >= 1, inputs_per_trial >= 1, max_input_len >= 1, generators
  /// non-empty, multiplier > 0. Throws std::invalid_argument.
  void validate() const;
};

struct GeneratedInput {
  std::string bytes;
  Generator generator = Generator::random_bytes;
  bool flood_burst = false;  // injected with zero pacing
};

/// Deterministic function of (plan.seed, trial_index). Generators are
/// assigned round-robin across the plan's input slots; a flood slot expands
/// into round(flood_rate_multiplier) zero-paced inputs. boundary-lengths
/// cycles the lengths {0, 1, max-1, max, max+1-truncated-with-marker}.
/// Every input is at most max_input_len bytes.
std::vector<GeneratedInput> generate_inputs(const FuzzPlan& plan,
                                            std::uint32_t trial_index);

/// Applies every enabled log-pattern rule line by line over stdout+stderr,
/// then maps the exit status: crash -> CWE-120, freeze-kill -> CWE-400 (via
/// the model's freeze rule when one is declared). Findings deduplicate by
/// id within the call.
std::vector<Finding> scan_logs(const RunResult& run, const ThreatModel& model,
                               std::uint32_t iteration = 0);

struct TrialOutcome {
  std::uint32_t trial_index = 0;
  std::vector<GeneratedInput> inputs;
  RunResult run;
  std::vector<Finding> findings;
};

struct FuzzCampaignResult {
  std::vector<TrialOutcome> outcomes;    // sorted by trial index
  std::vector<Finding> findings;         // campaign-level, deduped by id
  double coverage = 0.0;                 // exercised generator x outcome cells
  std::vector<std::string> executed_rules;  // log-pattern rules that ran
};

struct FuzzOptions {
  unsigned workers = 0;  // 0: hardware concurrency
};

/// Runs plan.trials executions of the artifact (parallel across a bounded
/// worker pool; results are ordered by trial index so the outcome is
/// independent of scheduling). Coverage counts distinct
/// (generator, exit-status-class) cells over the full grid.
FuzzCampaignResult run_fuzz_campaign(const FuzzPlan& plan, const BuildArtifact& artifact,
                                     const TargetConfig& config, const ThreatModel& model,
                                     std::uint32_t iteration = 0,
                                     const FuzzOptions& options = {});

}  // namespace fwsec
