#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fwsec/digest.hpp"
#include "fwsec/domain.hpp"

namespace fwsec {

enum class LlmRole { generate_firmware, generate_patch };

struct GenerationRequest {
  LlmRole role = LlmRole::generate_firmware;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.2;
  std::uint32_t max_output_tokens = 4096;
  std::optional<std::int64_t> seed;

  void validate() const;  // non-empty prompts, temperature in [0,2]
};

struct LlmResponse {
  std::string text;
  std::uint64_t tokens_used = 0;
};

enum class BackendErrorKind {
  transport,   // retryable: network / HTTP / backend hiccup
  refusal,     // prose came back without any code block
  extraction,  // blocks present but unusable
  fatal,       // configuration problem, not retryable
};

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  BackendErrorKind kind() const { return kind_; }

 private:
  BackendErrorKind kind_;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual LlmResponse complete(const GenerationRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Offline deterministic backend. A request is answered by, in order:
///   1. <dir>/by-key/<prompt-key>.txt   keyed on the rendered prompt digest
///   2. <dir>/playback/<NNN>.txt        consumed in numeric order
/// Exhausting both is a fatal error (a fixture bug, not worth retrying).
/// Every request can be appended to a requests log so fixture authors can
/// discover prompt keys. Token cost is (prompt + response bytes) / 4,
/// deterministic by construction.
class MockBackend : public LlmBackend {
 public:
  explicit MockBackend(std::filesystem::path dir, std::uint64_t playback_start = 0);

  LlmResponse complete(const GenerationRequest& request) override;
  std::string name() const override { return "mock"; }

  std::uint64_t playback_cursor() const { return playback_cursor_; }
  void set_request_log(std::filesystem::path log_path) { request_log_ = std::move(log_path); }

  /// 128-bit hex digest of system ++ 0x1e ++ user prompt.
  static std::string prompt_key(const GenerationRequest& request);

 private:
  std::filesystem::path dir_;
  std::uint64_t playback_cursor_ = 0;
  std::filesystem::path request_log_;
};

/// Chat-completions HTTP backend. Endpoint, key and model come from the
/// environment: FWSEC_LLM_ENDPOINT (e.g. http://host:8000/v1/chat/completions),
/// FWSEC_LLM_API_KEY, FWSEC_LLM_MODEL. Concurrent workers share one
/// serialized token bucket (FWSEC_LLM_RPS, default 1 request/s with a burst
/// of 4) so unattended loops cannot hammer the endpoint.
class HttpBackend : public LlmBackend {
 public:
  HttpBackend(std::string endpoint, std::string api_key, std::string model,
              double requests_per_second = 1.0, double burst = 4.0);
  static std::unique_ptr<HttpBackend> from_env();

  LlmResponse complete(const GenerationRequest& request) override;
  std::string name() const override { return "http"; }

 private:
  void take_token();

  std::string endpoint_;
  std::string api_key_;
  std::string model_;
  double refill_per_second_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_refill_;
  std::mutex bucket_mutex_;
};

struct RetryPolicy {
  int transport_attempts = 3;
  int refusal_attempts = 2;
  int backoff_base_ms = 250;
  bool sleep_between = true;  // tests disable the real sleep
};

/// Plain-text prompt templates with {placeholder} substitution.
struct PromptTemplates {
  std::string generate_firmware;
  std::string generate_patch;

  static PromptTemplates load(const std::filesystem::path& dir);
  static PromptTemplates load_default();
};

/// Replaces {name} for the names present in vars; anything else (code
/// braces included) passes through untouched.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars);

/// One fenced code block from a backend response. The first content line
/// may carry a "// file: <path>" marker and, for patches, an
/// "// addresses: id,id" marker; both are consumed, not kept in the body.
struct CodeBlock {
  std::string path;  // empty when unlabeled
  std::string content;
  std::vector<std::string> addresses;
};

std::vector<CodeBlock> extract_code_blocks(const std::string& response);

struct PatchProposal {
  std::string target_file;
  std::string replacement_source;
  std::string rationale;
  std::string proposed_by = "llm";
  std::vector<std::string> addresses;  // finding ids this patch claims to fix
};

struct VulnerabilityReport {
  std::vector<Finding> findings;        // open findings to remediate
  std::vector<std::string> advisories;  // agent annotations folded into the prompt
};

struct GatewayOptions {
  PromptTemplates templates;
  RetryPolicy retry;
  std::string default_file = "main.c";  // target of a single unlabeled block
  double firmware_temperature = 0.7;
  double patch_temperature = 0.2;
  std::uint32_t max_output_tokens = 8192;
};

/// Mitigation requirements, one line per threat, embedded verbatim into the
/// generation prompt.
std::string mitigation_block(const ThreatModel& model);

GenerationRequest build_firmware_request(const std::string& task_spec,
                                         const ThreatModel& model,
                                         const GatewayOptions& opts);
GenerationRequest build_patch_request(const VulnerabilityReport& report,
                                      const SourceTree& tree,
                                      const GatewayOptions& opts);

/// Tokens consumed across gateway calls, reported per operation.
struct GatewayResult {
  SourceTree tree;  // generate_firmware
  std::vector<PatchProposal> proposals;  // generate_patch / build fix
  std::uint64_t tokens_used = 0;
};

/// Renders the generation prompt (threat mitigations embedded), calls the
/// backend under the retry policy, and assembles the tree from the fenced
/// blocks of the response. Zero blocks is an extraction error.
GatewayResult generate_firmware(const std::string& task_spec, const ThreatModel& model,
                                LlmBackend& backend, const GatewayOptions& opts);

/// Patch generation for a report with at least one open finding. Each
/// returned proposal addresses a subset of the report's finding ids; blocks
/// without an addresses marker claim all of them.
GatewayResult generate_patch(const VulnerabilityReport& report, const SourceTree& tree,
                             LlmBackend& backend, const GatewayOptions& opts);

/// Build-repair variant: same patch machinery, but driven by a compiler log
/// instead of findings.
GatewayResult generate_build_fix(const std::string& compiler_log, const SourceTree& tree,
                                 LlmBackend& backend, const GatewayOptions& opts);

/// Pure function: returns a new tree with replacements applied in order.
/// Proposals targeting the same file must agree byte-for-byte; paths must
/// stay inside the tree. Throws std::runtime_error otherwise.
SourceTree apply_patches(const SourceTree& tree,
                         const std::vector<PatchProposal>& proposals);

}  // namespace fwsec
