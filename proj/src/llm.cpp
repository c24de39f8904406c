#include "fwsec/llm.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "fwsec/harness.hpp"
#include "httplib.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fwsec {

void GenerationRequest::validate() const {
  if (system_prompt.empty() || user_prompt.empty())
    throw std::invalid_argument("generation request: prompts must be non-empty");
  if (temperature < 0.0 || temperature > 2.0)
    throw std::invalid_argument("generation request: temperature outside [0,2]");
  if (max_output_tokens == 0)
    throw std::invalid_argument("generation request: max_output_tokens must be positive");
}

// ---------------------------------------------------------------- mock

MockBackend::MockBackend(fs::path dir, std::uint64_t playback_start)
    : dir_(std::move(dir)), playback_cursor_(playback_start) {}

std::string MockBackend::prompt_key(const GenerationRequest& request) {
  return digest128_hex(request.system_prompt + '\x1e' + request.user_prompt);
}

LlmResponse MockBackend::complete(const GenerationRequest& request) {
  request.validate();
  std::string key = prompt_key(request);

  if (!request_log_.empty()) {
    std::ofstream log(request_log_, std::ios::app);
    log << key << '\t'
        << (request.role == LlmRole::generate_firmware ? "generate-firmware"
                                                       : "generate-patch")
        << '\n';
  }

  auto read_file = [](const fs::path& p) -> std::optional<std::string> {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };

  std::optional<std::string> text = read_file(dir_ / "by-key" / (key + ".txt"));
  if (!text) {
    char name[16];
    std::snprintf(name, sizeof(name), "%03llu.txt",
                  static_cast<unsigned long long>(playback_cursor_));
    text = read_file(dir_ / "playback" / name);
    if (text) ++playback_cursor_;
  }
  if (!text)
    throw BackendError(BackendErrorKind::fatal,
                       "mock backend exhausted: no by-key/" + key +
                           ".txt and no playback entry " +
                           std::to_string(playback_cursor_) + " under " + dir_.string());

  LlmResponse response;
  response.text = std::move(*text);
  response.tokens_used =
      (request.system_prompt.size() + request.user_prompt.size() + response.text.size()) / 4;
  return response;
}

// ---------------------------------------------------------------- http

HttpBackend::HttpBackend(std::string endpoint, std::string api_key, std::string model,
                         double requests_per_second, double burst)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      model_(std::move(model)),
      refill_per_second_(requests_per_second > 0 ? requests_per_second : 1.0),
      capacity_(burst >= 1.0 ? burst : 1.0),
      tokens_(capacity_),
      last_refill_(std::chrono::steady_clock::now()) {}

std::unique_ptr<HttpBackend> HttpBackend::from_env() {
  const char* endpoint = std::getenv("FWSEC_LLM_ENDPOINT");
  const char* key = std::getenv("FWSEC_LLM_API_KEY");
  const char* model = std::getenv("FWSEC_LLM_MODEL");
  if (endpoint == nullptr || *endpoint == '\0')
    throw BackendError(BackendErrorKind::fatal, "FWSEC_LLM_ENDPOINT is not set");
  double rps = 1.0;
  if (const char* env = std::getenv("FWSEC_LLM_RPS"); env != nullptr && *env != '\0')
    rps = std::strtod(env, nullptr);
  return std::make_unique<HttpBackend>(endpoint, key ? key : "", model ? model : "gpt-4",
                                       rps);
}

void HttpBackend::take_token() {
  while (true) {
    {
      std::lock_guard<std::mutex> lock(bucket_mutex_);
      auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(capacity_,
                         tokens_ + refill_per_second_ *
                                       std::chrono::duration<double>(now - last_refill_)
                                           .count());
      last_refill_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

LlmResponse HttpBackend::complete(const GenerationRequest& request) {
  request.validate();
  take_token();

  std::string scheme, rest = endpoint_;
  std::size_t sep = rest.find("://");
  if (sep != std::string::npos) {
    scheme = rest.substr(0, sep);
    rest = rest.substr(sep + 3);
  }
  if (scheme == "https")
    throw BackendError(BackendErrorKind::fatal,
                       "https endpoints need a TLS-enabled build; use an http proxy");
  std::size_t slash = rest.find('/');
  std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
  std::string path = slash == std::string::npos ? "/v1/chat/completions" : rest.substr(slash);

  json body = {
      {"model", model_},
      {"temperature", request.temperature},
      {"max_tokens", request.max_output_tokens},
      {"messages",
       json::array({{{"role", "system"}, {"content", request.system_prompt}},
                    {{"role", "user"}, {"content", request.user_prompt}}})},
  };
  if (request.seed.has_value()) body["seed"] = *request.seed;

  httplib::Client client(("http://" + host).c_str());
  client.set_read_timeout(120, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.insert({"Authorization", "Bearer " + api_key_});
  auto res = client.Post(path.c_str(), headers, body.dump(), "application/json");
  if (!res)
    throw BackendError(BackendErrorKind::transport,
                       "no response from " + endpoint_);
  if (res->status != 200)
    throw BackendError(BackendErrorKind::transport,
                       "backend returned HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 512));

  try {
    json parsed = json::parse(res->body);
    LlmResponse response;
    response.text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    if (parsed.contains("usage") && parsed["usage"].contains("total_tokens"))
      response.tokens_used = parsed["usage"]["total_tokens"].get<std::uint64_t>();
    else
      response.tokens_used =
          (request.system_prompt.size() + request.user_prompt.size() + response.text.size()) / 4;
    return response;
  } catch (const json::exception& e) {
    throw BackendError(BackendErrorKind::transport,
                       std::string("unparseable completion response: ") + e.what());
  }
}

// ---------------------------------------------------------------- templates

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open template: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

PromptTemplates PromptTemplates::load(const fs::path& dir) {
  PromptTemplates t;
  t.generate_firmware = slurp(dir / "generate_firmware.txt");
  t.generate_patch = slurp(dir / "generate_patch.txt");
  return t;
}

PromptTemplates PromptTemplates::load_default() {
  const char* env = std::getenv("FWSEC_PROMPT_DIR");
  if (env != nullptr && *env != '\0') return load(fs::path(env));
  return load(fs::path(FWSEC_DEFAULT_PROMPT_DIR));
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find('{', pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    std::size_t close = tmpl.find('}', open);
    if (close == std::string::npos) {
      out.append(tmpl, open, std::string::npos);
      break;
    }
    std::string name = tmpl.substr(open + 1, close - open - 1);
    auto it = vars.find(name);
    if (it != vars.end()) {
      out.append(it->second);
      pos = close + 1;
    } else {
      out.push_back('{');  // unknown placeholder (or code brace): verbatim
      pos = open + 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------- extraction

std::vector<CodeBlock> extract_code_blocks(const std::string& response) {
  std::vector<CodeBlock> blocks;
  std::istringstream in(response);
  std::string line;
  bool inside = false;
  CodeBlock current;
  std::string body;
  bool first_content_line = true;

  auto strip_marker = [&](const std::string& l) -> bool {
    const std::string file_marker = "// file:";
    const std::string addr_marker = "// addresses:";
    if (l.rfind(file_marker, 0) == 0) {
      std::string p = l.substr(file_marker.size());
      while (!p.empty() && p.front() == ' ') p.erase(p.begin());
      while (!p.empty() && (p.back() == ' ' || p.back() == '\r')) p.pop_back();
      current.path = p;
      return true;
    }
    if (l.rfind(addr_marker, 0) == 0) {
      std::string rest = l.substr(addr_marker.size());
      std::string id;
      for (char c : rest) {
        if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
          if (!id.empty()) current.addresses.push_back(id);
          id.clear();
        } else {
          id.push_back(c);
        }
      }
      if (!id.empty()) current.addresses.push_back(id);
      return true;
    }
    return false;
  };

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("```", 0) == 0) {
      if (inside) {
        current.content = body;
        blocks.push_back(std::move(current));
        current = CodeBlock{};
        body.clear();
      } else {
        first_content_line = true;
      }
      inside = !inside;
      continue;
    }
    if (!inside) continue;
    if (first_content_line || (body.empty() && !current.path.empty())) {
      if (strip_marker(line)) {
        first_content_line = false;
        continue;
      }
      first_content_line = false;
    }
    body += line;
    body += '\n';
  }
  return blocks;
}

// ---------------------------------------------------------------- prompts

std::string mitigation_block(const ThreatModel& model) {
  std::ostringstream out;
  for (const auto& threat : model.threats)
    out << "- CWE-" << threat.cwe.id << " (" << threat.cwe.name
        << "): " << threat.mitigation << '\n';
  return out.str();
}

namespace {

std::string findings_block(const VulnerabilityReport& report) {
  std::ostringstream out;
  for (const auto& f : report.findings) {
    out << "- finding " << f.id << " CWE-" << f.cwe.id << " severity="
        << to_string(f.severity) << " source=" << to_string(f.source) << '\n';
    out << "  evidence: " << f.evidence << '\n';
    if (f.location.has_value())
      out << "  location: " << f.location->file << ":" << f.location->line << '\n';
  }
  return out.str();
}

std::string advisories_block(const VulnerabilityReport& report) {
  if (report.advisories.empty()) return "";
  std::ostringstream out;
  out << "Advisories:\n";
  for (const auto& a : report.advisories) out << "- ADVISORY " << a << '\n';
  return out.str();
}

std::string sources_block(const SourceTree& tree) {
  std::ostringstream out;
  for (const auto& [path, content] : tree) {
    out << "```\n// file: " << path << '\n' << content;
    if (!content.empty() && content.back() != '\n') out << '\n';
    out << "```\n";
  }
  return out.str();
}

constexpr const char* kSystemPrompt =
    "You are a careful embedded firmware engineer. Respond with complete "
    "files in fenced code blocks only.";

}  // namespace

GenerationRequest build_firmware_request(const std::string& task_spec,
                                         const ThreatModel& model,
                                         const GatewayOptions& opts) {
  GenerationRequest request;
  request.role = LlmRole::generate_firmware;
  request.system_prompt = kSystemPrompt;
  request.user_prompt = render_template(
      opts.templates.generate_firmware,
      {{"task_spec", task_spec}, {"mitigations", mitigation_block(model)}});
  request.temperature = opts.firmware_temperature;
  request.max_output_tokens = opts.max_output_tokens;
  return request;
}

GenerationRequest build_patch_request(const VulnerabilityReport& report,
                                      const SourceTree& tree,
                                      const GatewayOptions& opts) {
  GenerationRequest request;
  request.role = LlmRole::generate_patch;
  request.system_prompt = kSystemPrompt;
  request.user_prompt = render_template(opts.templates.generate_patch,
                                        {{"findings", findings_block(report)},
                                         {"advisories", advisories_block(report)},
                                         {"sources", sources_block(tree)}});
  request.temperature = opts.patch_temperature;
  request.max_output_tokens = opts.max_output_tokens;
  return request;
}

// ---------------------------------------------------------------- gateway ops

namespace {

LlmResponse call_with_retry(LlmBackend& backend, GenerationRequest request,
                            const RetryPolicy& policy, bool refusal_retry) {
  int transport_left = policy.transport_attempts;
  int refusal_left = policy.refusal_attempts;
  int backoff = policy.backoff_base_ms;
  while (true) {
    try {
      LlmResponse response = backend.complete(request);
      if (refusal_retry && extract_code_blocks(response.text).empty()) {
        if (--refusal_left > 0) {
          request.user_prompt += "\n\nReturn only code in fenced code blocks.";
          continue;
        }
        throw BackendError(BackendErrorKind::refusal,
                           "backend returned prose without code");
      }
      return response;
    } catch (const BackendError& e) {
      if (e.kind() == BackendErrorKind::transport && --transport_left > 0) {
        if (policy.sleep_between)
          std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
        continue;
      }
      throw;
    }
  }
}

}  // namespace

GatewayResult generate_firmware(const std::string& task_spec, const ThreatModel& model,
                                LlmBackend& backend, const GatewayOptions& opts) {
  if (task_spec.empty())
    throw std::invalid_argument("generate_firmware: empty task spec");
  GenerationRequest request = build_firmware_request(task_spec, model, opts);
  LlmResponse response = call_with_retry(backend, request, opts.retry, false);

  std::vector<CodeBlock> blocks = extract_code_blocks(response.text);
  if (blocks.empty())
    throw BackendError(BackendErrorKind::extraction,
                       "response contains zero code blocks");

  GatewayResult result;
  result.tokens_used = response.tokens_used;
  if (blocks.size() == 1 && blocks[0].path.empty()) blocks[0].path = opts.default_file;
  for (auto& block : blocks) {
    if (block.path.empty())
      throw BackendError(BackendErrorKind::extraction,
                         "multiple code blocks without '// file:' markers");
    validate_tree_path(block.path);
    result.tree[block.path] = std::move(block.content);
  }
  return result;
}

namespace {

GatewayResult proposals_from_response(const LlmResponse& response,
                                      const std::vector<std::string>& report_ids,
                                      const GatewayOptions& opts,
                                      const std::string& proposed_by) {
  std::vector<CodeBlock> blocks = extract_code_blocks(response.text);
  if (blocks.empty())
    throw BackendError(BackendErrorKind::refusal, "backend returned prose without code");
  if (blocks.size() == 1 && blocks[0].path.empty()) blocks[0].path = opts.default_file;

  GatewayResult result;
  result.tokens_used = response.tokens_used;
  for (auto& block : blocks) {
    if (block.path.empty())
      throw BackendError(BackendErrorKind::extraction,
                         "multiple code blocks without '// file:' markers");
    if (block.content.empty())
      throw BackendError(BackendErrorKind::extraction,
                         "empty replacement for " + block.path);
    validate_tree_path(block.path);
    PatchProposal proposal;
    proposal.target_file = block.path;
    proposal.replacement_source = std::move(block.content);
    proposal.proposed_by = proposed_by;
    if (block.addresses.empty()) {
      proposal.addresses = report_ids;  // unmarked block claims the whole report
    } else {
      for (const auto& id : block.addresses) {
        bool known = false;
        for (const auto& rid : report_ids)
          if (rid == id) known = true;
        if (known) proposal.addresses.push_back(id);
      }
    }
    result.proposals.push_back(std::move(proposal));
  }
  return result;
}

}  // namespace

GatewayResult generate_patch(const VulnerabilityReport& report, const SourceTree& tree,
                             LlmBackend& backend, const GatewayOptions& opts) {
  bool any_open = false;
  for (const auto& f : report.findings)
    if (finding_is_open(f)) any_open = true;
  if (!any_open)
    throw std::invalid_argument("generate_patch: report has no open finding");

  GenerationRequest request = build_patch_request(report, tree, opts);
  LlmResponse response = call_with_retry(backend, request, opts.retry, true);

  std::vector<std::string> ids;
  for (const auto& f : report.findings) ids.push_back(f.id);
  return proposals_from_response(response, ids, opts, "llm");
}

GatewayResult generate_build_fix(const std::string& compiler_log, const SourceTree& tree,
                                 LlmBackend& backend, const GatewayOptions& opts) {
  if (compiler_log.empty())
    throw std::invalid_argument("generate_build_fix: empty compiler log");
  GenerationRequest request;
  request.role = LlmRole::generate_patch;
  request.system_prompt = kSystemPrompt;
  request.user_prompt = render_template(
      opts.templates.generate_patch,
      {{"findings", "- build failure\n  evidence: " + compiler_log + "\n"},
       {"advisories", ""},
       {"sources", sources_block(tree)}});
  request.temperature = opts.patch_temperature;
  request.max_output_tokens = opts.max_output_tokens;

  LlmResponse response = call_with_retry(backend, request, opts.retry, true);
  return proposals_from_response(response, {}, opts, "llm");
}

SourceTree apply_patches(const SourceTree& tree,
                         const std::vector<PatchProposal>& proposals) {
  SourceTree out = tree;
  std::map<std::string, std::string> staged;
  for (const auto& p : proposals) {
    validate_tree_path(p.target_file);
    if (p.replacement_source.empty())
      throw std::runtime_error("patch for " + p.target_file + " is empty");
    auto it = staged.find(p.target_file);
    if (it != staged.end() && it->second != p.replacement_source)
      throw std::runtime_error("conflicting patches for " + p.target_file);
    staged[p.target_file] = p.replacement_source;
  }
  for (auto& [path, content] : staged) out[path] = content;
  return out;
}

}  // namespace fwsec
