#include "fwsec/campaign.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstring>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>

#include "fwsec/monitor.hpp"
#include "fwsec/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fwsec {

// ---------------------------------------------------------------- config

void CampaignConfig::validate() const {
  if (name.empty()) throw std::invalid_argument("campaign: name is empty");
  if (max_iterations < 1)
    throw std::invalid_argument("campaign: max_iterations must be >= 1");
  if (task_spec.empty() && task_spec_file.empty())
    throw std::invalid_argument("campaign: task_spec or task_spec_file required");
  if (threat_model_path.empty())
    throw std::invalid_argument("campaign: threat_model path required");
  if (backend.kind == BackendKind::mock && backend.mock_dir.empty())
    throw std::invalid_argument("campaign: mock backend needs mock_dir");
  target.validate();
  fuzz.validate();
}

SnapshotOptions CampaignConfig::snapshot_options() const {
  SnapshotOptions opts;
  opts.wcet_budget_ms = wcet_budget_ms;
  opts.jitter_budget_us = jitter_budget_us;
  opts.sci_w1 = sci_weights[0];
  opts.sci_w2 = sci_weights[1];
  opts.sci_w3 = sci_weights[2];
  opts.count_accepted_risk_in_vrr = count_accepted_risk_in_vrr;
  return opts;
}

std::string to_string(CampaignStatus s) {
  switch (s) {
    case CampaignStatus::running: return "running";
    case CampaignStatus::converged: return "converged";
    case CampaignStatus::budget_exhausted: return "budget-exhausted";
    case CampaignStatus::needs_human: return "needs-human";
    case CampaignStatus::failed: return "failed";
  }
  return "failed";
}

CampaignStatus campaign_status_from_string(std::string_view s) {
  if (s == "running") return CampaignStatus::running;
  if (s == "converged") return CampaignStatus::converged;
  if (s == "budget-exhausted") return CampaignStatus::budget_exhausted;
  if (s == "needs-human") return CampaignStatus::needs_human;
  if (s == "failed") return CampaignStatus::failed;
  throw std::runtime_error("unknown campaign status: '" + std::string(s) + "'");
}

int exit_code_for(CampaignStatus s) {
  switch (s) {
    case CampaignStatus::converged: return 0;
    case CampaignStatus::budget_exhausted: return 2;
    case CampaignStatus::needs_human: return 3;
    case CampaignStatus::running: return 4;  // paused via --stop-after
    case CampaignStatus::failed: return 1;
  }
  return 1;
}

std::string configuration_name(const std::set<AgentKind>& agents) {
  if (agents.empty()) return "LLM Only";
  if (agents.size() == 3) return "All Agents";
  if (agents.size() == 1) {
    switch (*agents.begin()) {
      case AgentKind::threat: return "Detection Agent";
      case AgentKind::performance: return "Optimization Agent";
      case AgentKind::compliance: return "Verification Agent";
    }
  }
  std::string name;
  for (AgentKind a : agents) name += (name.empty() ? "" : "+") + to_string(a);
  return name;
}

namespace {

json target_to_json(const TargetConfig& t) {
  return {{"kind", t.kind == TargetKind::stub_target ? "stub-target" : "external-command"},
          {"build_command", t.build_command},
          {"run_command", t.run_command},
          {"stub_binary", t.stub_binary},
          {"startup_grace_ms", t.startup_grace_ms},
          {"run_timeout_ms", t.run_timeout_ms},
          {"freeze_silence_ms", t.freeze_silence_ms},
          {"build_timeout_ms", t.build_timeout_ms},
          {"input_pacing_ms", t.input_pacing_ms},
          {"stdin_injectable", t.stdin_injectable},
          {"log_cap_bytes", t.log_cap_bytes}};
}

TargetConfig target_from_json(const json& j) {
  TargetConfig t;
  std::string kind = j.value("kind", "stub-target");
  if (kind == "stub-target")
    t.kind = TargetKind::stub_target;
  else if (kind == "external-command")
    t.kind = TargetKind::external_command;
  else
    throw std::runtime_error("target: unknown kind '" + kind + "'");
  t.build_command = j.value("build_command", "");
  t.run_command = j.value("run_command", "scenario.stub");
  t.stub_binary = j.value("stub_binary", "");
  t.startup_grace_ms = j.value("startup_grace_ms", 50u);
  t.run_timeout_ms = j.value("run_timeout_ms", 5000u);
  t.freeze_silence_ms = j.value("freeze_silence_ms", 1000u);
  t.build_timeout_ms = j.value("build_timeout_ms", 60000u);
  t.input_pacing_ms = j.value("input_pacing_ms", 20u);
  t.stdin_injectable = j.value("stdin_injectable", true);
  t.log_cap_bytes = j.value("log_cap_bytes", std::size_t(16 * 1024 * 1024));
  return t;
}

json fuzz_to_json(const FuzzPlan& p) {
  json generators = json::array();
  for (Generator g : p.generators) generators.push_back(to_string(g));
  return {{"trials", p.trials},
          {"inputs_per_trial", p.inputs_per_trial},
          {"max_input_len", p.max_input_len},
          {"generators", generators},
          {"flood_rate_multiplier", p.flood_rate_multiplier}};
}

FuzzPlan fuzz_from_json(const json& j) {
  FuzzPlan p;
  p.trials = j.value("trials", 1u);
  p.inputs_per_trial = j.value("inputs_per_trial", 4u);
  p.max_input_len = j.value("max_input_len", 64u);
  if (j.contains("generators"))
    for (const auto& g : j["generators"])
      p.generators.push_back(generator_from_string(g.get<std::string>()));
  p.flood_rate_multiplier = j.value("flood_rate_multiplier", 8.0);
  return p;
}

json config_to_json(const CampaignConfig& c) {
  json agents = json::array();
  for (AgentKind a : c.agents_enabled) agents.push_back(to_string(a));
  json j;
  j["schema_version"] = 1;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["task_spec"] = c.task_spec;
  j["task_spec_file"] = c.task_spec_file;
  j["threat_model"] = c.threat_model_path;
  j["checkmap"] = c.checkmap_path;
  j["prompts_dir"] = c.prompts_dir;
  j["target"] = target_to_json(c.target);
  j["fuzz"] = fuzz_to_json(c.fuzz);
  j["agents"] = agents;
  j["max_iterations"] = c.max_iterations;
  j["needs_human_build_failures"] = c.needs_human_build_failures;
  j["convergence"] = {{"no_open_findings_above", to_string(c.convergence.no_open_findings_above)},
                      {"max_stagnant_iterations", c.convergence.max_stagnant_iterations}};
  j["budgets"] = {{"wcet_ms", c.wcet_budget_ms}, {"jitter_us", c.jitter_budget_us}};
  j["sci_weights"] = {c.sci_weights[0], c.sci_weights[1], c.sci_weights[2]};
  j["count_accepted_risk_in_vrr"] = c.count_accepted_risk_in_vrr;
  j["advisory"] = {{"wcet_ms", c.advisory.wcet_ms}, {"jitter_us", c.advisory.jitter_us}};
  j["declared_tasks"] = c.declared_tasks;
  j["backend"] = {{"kind", c.backend.kind == BackendKind::mock ? "mock" : "http"},
                  {"mock_dir", c.backend.mock_dir}};
  j["analyzer"] = {{"mode", c.analyzer.mode == AnalyzerMode::off
                                ? "off"
                                : (c.analyzer.mode == AnalyzerMode::replay ? "replay" : "live")},
                   {"format", to_string(c.analyzer.format)},
                   {"report_file", c.analyzer.report_file},
                   {"command", c.analyzer.command}};
  j["ground_truth"] = c.ground_truth_path;
  j["fuzz_workers"] = c.fuzz_workers;
  j["default_file"] = c.default_file;
  return j;
}

CampaignConfig config_from_json(const json& j) {
  CampaignConfig c;
  c.name = j.value("name", "campaign");
  c.seed = j.value("seed", std::uint64_t(0));
  c.task_spec = j.value("task_spec", "");
  c.task_spec_file = j.value("task_spec_file", "");
  c.threat_model_path = j.value("threat_model", "");
  c.checkmap_path = j.value("checkmap", "");
  c.prompts_dir = j.value("prompts_dir", "");
  if (j.contains("target")) c.target = target_from_json(j["target"]);
  if (j.contains("fuzz")) c.fuzz = fuzz_from_json(j["fuzz"]);
  c.fuzz.seed = c.seed;
  if (j.contains("agents"))
    for (const auto& a : j["agents"])
      c.agents_enabled.insert(agent_from_string(a.get<std::string>()));
  c.max_iterations = j.value("max_iterations", 5u);
  c.needs_human_build_failures = j.value("needs_human_build_failures", 3u);
  if (j.contains("convergence")) {
    c.convergence.no_open_findings_above = severity_from_string(
        j["convergence"].value("no_open_findings_above", "low"));
    c.convergence.max_stagnant_iterations =
        j["convergence"].value("max_stagnant_iterations", 3u);
  }
  if (j.contains("budgets")) {
    c.wcet_budget_ms = j["budgets"].value("wcet_ms", 50.0);
    c.jitter_budget_us = j["budgets"].value("jitter_us", 2000.0);
  }
  if (j.contains("sci_weights")) {
    auto w = j["sci_weights"];
    if (!w.is_array() || w.size() != 3)
      throw std::runtime_error("campaign config: sci_weights must be [w1,w2,w3]");
    for (int i = 0; i < 3; ++i) c.sci_weights[i] = w[i].get<double>();
  }
  c.count_accepted_risk_in_vrr = j.value("count_accepted_risk_in_vrr", true);
  if (j.contains("advisory")) {
    c.advisory.wcet_ms = j["advisory"].value("wcet_ms", 10.0);
    c.advisory.jitter_us = j["advisory"].value("jitter_us", 200.0);
  }
  if (j.contains("declared_tasks"))
    c.declared_tasks = j["declared_tasks"].get<std::vector<std::string>>();
  if (j.contains("backend")) {
    std::string kind = j["backend"].value("kind", "mock");
    c.backend.kind = kind == "http" ? BackendKind::http : BackendKind::mock;
    c.backend.mock_dir = j["backend"].value("mock_dir", "");
  }
  if (j.contains("analyzer")) {
    std::string mode = j["analyzer"].value("mode", "off");
    c.analyzer.mode = mode == "replay" ? AnalyzerMode::replay
                                       : (mode == "live" ? AnalyzerMode::live
                                                         : AnalyzerMode::off);
    c.analyzer.format =
        analyzer_format_from_string(j["analyzer"].value("format", "cppcheck-xml"));
    c.analyzer.report_file = j["analyzer"].value("report_file", "");
    c.analyzer.command = j["analyzer"].value("command", "");
  }
  c.ground_truth_path = j.value("ground_truth", "");
  c.fuzz_workers = j.value("fuzz_workers", 0u);
  c.default_file = j.value("default_file", "main.c");
  return c;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), std::streamsize(content.size()));
}

std::string resolve_path(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path candidate(p);
  if (candidate.is_absolute()) return p;
  return (base / candidate).lexically_normal().string();
}

// Paths must survive persistence into the campaign directory and later
// resolution from anywhere, so they are pinned before the first write.
void absolutize_paths(CampaignConfig& config, const fs::path& base) {
  config.task_spec_file = resolve_path(base, config.task_spec_file);
  config.threat_model_path = resolve_path(base, config.threat_model_path);
  config.checkmap_path = resolve_path(base, config.checkmap_path);
  config.prompts_dir = resolve_path(base, config.prompts_dir);
  config.backend.mock_dir = resolve_path(base, config.backend.mock_dir);
  config.target.stub_binary = resolve_path(base, config.target.stub_binary);
  config.analyzer.report_file = resolve_path(base, config.analyzer.report_file);
  config.ground_truth_path = resolve_path(base, config.ground_truth_path);
}

}  // namespace

CampaignConfig load_campaign_config(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  CampaignConfig config = config_from_json(doc);
  absolutize_paths(config, fs::absolute(path).parent_path());
  return config;
}

// ---------------------------------------------------------------- persistence

namespace {

fs::path iteration_dir(const fs::path& campaign_dir, std::uint32_t k) {
  return campaign_dir / "iterations" / std::to_string(k);
}

// One campaign owns its directory; the lock is released on clean exit.
class CampaignLock {
 public:
  explicit CampaignLock(const fs::path& dir) : path_(dir / "lock") {
    fs::create_directories(dir);
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw std::runtime_error("campaign directory is locked (" + path_.string() +
                               " exists; remove it if no campaign is running)");
    std::string pid = std::to_string(::getpid()) + "\n";
    ssize_t ignored = ::write(fd, pid.data(), pid.size());
    (void)ignored;
    ::close(fd);
  }
  ~CampaignLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  CampaignLock(const CampaignLock&) = delete;
  CampaignLock& operator=(const CampaignLock&) = delete;

 private:
  fs::path path_;
};

json state_header_json(const CampaignState& state) {
  json j;
  j["schema_version"] = 1;
  j["status"] = to_string(state.status);
  j["active_source_digest"] = state.active_source_digest;
  j["llm_calls"] = state.llm_calls;
  j["playback_cursor"] = state.playback_cursor;
  j["consecutive_build_failures"] = state.consecutive_build_failures;
  j["stagnant_iterations"] = state.stagnant_iterations;
  j["failure_diagnostic"] = state.failure_diagnostic;
  j["iteration_count"] = state.iterations.size();
  return j;
}

void persist_state_header(const fs::path& dir, const CampaignState& state) {
  write_file(dir / "state.json", canonical_dump(state_header_json(state)));
}

void persist_iteration(const fs::path& dir, const IterationRecord& record,
                       const std::vector<AgentVerdict>& verdicts,
                       const std::vector<PatchProposal>& proposals) {
  fs::path it_dir = iteration_dir(dir, record.index);
  write_file(it_dir / "record.json", canonical_dump(to_json(record)));
  write_file(it_dir / "findings.json",
             canonical_dump(findings_file_json(record.findings)));
  if (record.metrics.has_value())
    write_file(it_dir / "metrics.json", canonical_dump(to_json(*record.metrics)));
  json verdicts_json = json::array();
  for (const auto& v : verdicts) verdicts_json.push_back(to_json(v));
  write_file(it_dir / "verdicts.json", canonical_dump(verdicts_json));
  json proposals_json = json::array();
  for (const auto& p : proposals) proposals_json.push_back(to_json(p));
  write_file(it_dir / "proposals.json", canonical_dump(proposals_json));
}

void persist_source(const fs::path& dir, std::uint32_t k, const SourceTree& tree) {
  materialize_tree(tree, iteration_dir(dir, k) / "source");
}

SourceTree load_source(const fs::path& dir, std::uint32_t k) {
  fs::path root = iteration_dir(dir, k) / "source";
  SourceTree tree;
  if (!fs::exists(root)) throw std::runtime_error("missing source for iteration " +
                                                  std::to_string(k));
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string rel = fs::relative(entry.path(), root).generic_string();
    tree[rel] = read_file(entry.path());
  }
  return tree;
}

void persist_trial(const fs::path& campaign_dir, std::uint32_t iteration,
                   const TrialOutcome& outcome) {
  fs::path trial_dir =
      campaign_dir / "corpus" / std::to_string(iteration) / std::to_string(outcome.trial_index);
  json meta;
  meta["schema_version"] = 1;
  meta["trial_index"] = outcome.trial_index;
  meta["exit_status"] = to_string(outcome.run.exit_status);
  meta["crash_code"] = outcome.run.crash_code;
  meta["crash_signal"] = outcome.run.crash_signal;
  json inputs = json::array();
  json generators = json::array();
  for (std::size_t i = 0; i < outcome.inputs.size(); ++i) {
    std::string name = std::to_string(i) + ".bin";
    write_file(trial_dir / name, outcome.inputs[i].bytes);
    inputs.push_back(name);
    generators.push_back(to_string(outcome.inputs[i].generator));
  }
  meta["inputs"] = inputs;
  meta["generators"] = generators;
  json finding_ids = json::array();
  for (const auto& f : outcome.findings) finding_ids.push_back(f.id);
  meta["findings"] = finding_ids;
  meta["stdout_digest"] = digest128_hex(outcome.run.stdout_log);
  meta["stderr_digest"] = digest128_hex(outcome.run.stderr_log);
  write_file(trial_dir / "outcome.json", canonical_dump(meta));

  fs::path logs = iteration_dir(campaign_dir, iteration) / "logs";
  std::string base = "trial-" + std::to_string(outcome.trial_index);
  write_file(logs / (base + ".stdout.log"), outcome.run.stdout_log);
  write_file(logs / (base + ".stderr.log"), outcome.run.stderr_log);
}

std::vector<PatchProposal> load_proposals(const fs::path& dir, std::uint32_t k) {
  fs::path path = iteration_dir(dir, k) / "proposals.json";
  if (!fs::exists(path)) return {};
  json doc = json::parse(read_file(path));
  std::vector<PatchProposal> proposals;
  for (const auto& p : doc) proposals.push_back(patch_proposal_from_json(p));
  return proposals;
}

int severity_rank(Severity s) {
  switch (s) {
    case Severity::low: return 0;
    case Severity::medium: return 1;
    case Severity::high: return 2;
    case Severity::critical: return 3;
  }
  return 3;
}

std::size_t count_source_files(const SourceTree& tree) {
  static const char* exts[] = {".c", ".h", ".cc", ".cpp", ".hpp", ".cxx", ".hxx"};
  std::size_t n = 0;
  for (const auto& [path, _] : tree)
    for (const char* ext : exts)
      if (path.size() > std::strlen(ext) &&
          path.compare(path.size() - std::strlen(ext), std::string::npos, ext) == 0) {
        ++n;
        break;
      }
  return n == 0 ? tree.size() : n;
}

}  // namespace

CampaignConfig load_campaign_dir_config(const fs::path& campaign_dir) {
  return load_campaign_config(campaign_dir / "config.json");
}

CampaignState load_campaign_state(const fs::path& campaign_dir) {
  fs::path state_path = campaign_dir / "state.json";
  json doc;
  try {
    doc = json::parse(read_file(state_path));
  } catch (const std::exception& e) {
    throw std::runtime_error("corrupt campaign state: " + std::string(e.what()));
  }
  CampaignState state;
  state.status = campaign_status_from_string(doc.at("status").get<std::string>());
  state.active_source_digest = doc.at("active_source_digest").get<std::string>();
  state.llm_calls = doc.at("llm_calls").get<std::uint64_t>();
  state.playback_cursor = doc.at("playback_cursor").get<std::uint64_t>();
  state.consecutive_build_failures =
      doc.at("consecutive_build_failures").get<std::uint32_t>();
  state.stagnant_iterations = doc.at("stagnant_iterations").get<std::uint32_t>();
  state.failure_diagnostic = doc.at("failure_diagnostic").get<std::string>();
  std::size_t count = doc.at("iteration_count").get<std::size_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    fs::path record_path = iteration_dir(campaign_dir, k) / "record.json";
    if (!fs::exists(record_path))
      throw std::runtime_error("campaign state integrity error: missing " +
                               record_path.string());
    IterationRecord record = iteration_record_from_json(json::parse(read_file(record_path)));
    if (record.index != k)
      throw std::runtime_error("campaign state integrity error: iteration index gap at " +
                               std::to_string(k));
    state.iterations.push_back(std::move(record));
  }
  return state;
}

std::string campaign_state_digest(const CampaignState& state) {
  json j;
  j["status"] = to_string(state.status);
  j["active_source_digest"] = state.active_source_digest;
  j["llm_calls"] = state.llm_calls;
  j["playback_cursor"] = state.playback_cursor;
  json iterations = json::array();
  for (IterationRecord record : state.iterations) {
    record.wall_clock_seconds = 0.0;  // volatile fields are zeroed for identity
    if (record.metrics.has_value()) {
      record.metrics->raw.wall_clock_seconds = 0.0;
      record.metrics->raw.resources = 0.0;
      record.metrics->iei_value.reset();
    }
    iterations.push_back(to_json(record));
  }
  j["iterations"] = iterations;
  return digest128_hex(canonical_dump(j));
}

// ---------------------------------------------------------------- the loop

namespace {

struct LoopContext {
  CampaignConfig config;
  fs::path dir;
  ThreatModel model;
  CheckMap checkmap;
  GatewayOptions gateway;
  std::unique_ptr<LlmBackend> backend;
  MockBackend* mock = nullptr;  // non-null when backend is the mock
  std::string task_spec;
};

LoopContext make_context(const CampaignConfig& config, const fs::path& dir,
                         std::uint64_t playback_start) {
  LoopContext ctx;
  ctx.config = config;
  ctx.dir = dir;
  ctx.model = load_threat_model(config.threat_model_path);
  ctx.checkmap = config.checkmap_path.empty() ? default_checkmap()
                                              : load_checkmap(config.checkmap_path);
  ctx.gateway.templates = config.prompts_dir.empty()
                              ? PromptTemplates::load_default()
                              : PromptTemplates::load(config.prompts_dir);
  ctx.gateway.default_file = config.default_file;
  ctx.task_spec = !config.task_spec.empty() ? config.task_spec
                                            : read_file(config.task_spec_file);
  if (config.backend.kind == BackendKind::mock) {
    auto mock = std::make_unique<MockBackend>(config.backend.mock_dir, playback_start);
    mock->set_request_log(dir / "llm" / "requests.log");
    fs::create_directories(dir / "llm");
    ctx.mock = mock.get();
    ctx.backend = std::move(mock);
  } else {
    ctx.backend = HttpBackend::from_env();
  }
  // Keep a copy of the prompt templates with the campaign record.
  write_file(dir / "prompts" / "generate_firmware.txt", ctx.gateway.templates.generate_firmware);
  write_file(dir / "prompts" / "generate_patch.txt", ctx.gateway.templates.generate_patch);
  return ctx;
}

struct BuildCacheEntry {
  BuildResult result;
  BuildArtifact artifact;
};

CampaignState run_loop(LoopContext& ctx, CampaignState state,
                       std::uint32_t stop_after_iterations) {
  const CampaignConfig& config = ctx.config;
  const fs::path& dir = ctx.dir;

  SourceTree tree;
  std::vector<PatchProposal> pending;
  std::map<std::string, BuildCacheEntry> build_cache;

  if (!state.iterations.empty()) {
    std::uint32_t last = state.iterations.back().index;
    tree = load_source(dir, last);
    pending = load_proposals(dir, last);
  }

  FuzzPlan plan = config.fuzz;
  plan.seed = config.seed;

  std::uint32_t k = std::uint32_t(state.iterations.size());
  while (true) {
    if (k >= config.max_iterations) {
      state.status = CampaignStatus::budget_exhausted;
      break;
    }
    auto started = std::chrono::steady_clock::now();
    std::uint64_t tokens = 0;

    IterationRecord record;
    record.index = k;
    const IterationRecord* previous =
        state.iterations.empty() ? nullptr : &state.iterations.back();

    try {
      if (k == 0) {
        GatewayResult gen = generate_firmware(ctx.task_spec, ctx.model, *ctx.backend,
                                              ctx.gateway);
        tree = std::move(gen.tree);
        tokens += gen.tokens_used;
        ++state.llm_calls;
      } else if (!pending.empty()) {
        for (const auto& p : pending) {
          PatchRef ref;
          ref.target_file = p.target_file;
          ref.content_digest = digest128_hex(p.replacement_source);
          ref.proposed_by = p.proposed_by;
          ref.addresses = p.addresses;
          record.patches.push_back(std::move(ref));
        }
        tree = apply_patches(tree, pending);
      }
    } catch (const std::exception& e) {
      state.status = CampaignStatus::failed;
      state.failure_diagnostic = e.what();
      break;
    }

    record.firmware_ref = tree_digest(tree);
    persist_source(dir, k, tree);

    // Build, memoized by tree digest.
    BuildResult build;
    BuildArtifact artifact;
    try {
      auto cached = build_cache.find(record.firmware_ref);
      if (cached != build_cache.end()) {
        build = cached->second.result;
        artifact = cached->second.artifact;
      } else {
        build = build_target(tree, config.target, iteration_dir(dir, k) / "build",
                             &artifact);
        build_cache[record.firmware_ref] = {build, artifact};
      }
    } catch (const std::exception& e) {
      state.status = CampaignStatus::failed;
      state.failure_diagnostic = e.what();
      break;
    }
    write_file(iteration_dir(dir, k) / "logs" / "build.log", build.compiler_log);

    record.coverage.w1 = config.sci_weights[0];
    record.coverage.w2 = config.sci_weights[1];
    record.coverage.w3 = config.sci_weights[2];

    if (!build.success) {
      record.build_ok = false;
      record.build_failure_class = to_string(
          build.failure_class.value_or(BuildFailureClass::unclassified));
      if (previous != nullptr) record.findings = previous->findings;
      record.wall_clock_seconds = std::max(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
              .count(),
          1e-6);
      ++state.consecutive_build_failures;

      bool escalate =
          state.consecutive_build_failures >= config.needs_human_build_failures;
      bool out_of_budget = k + 1 >= config.max_iterations;
      std::vector<PatchProposal> fix;
      if (!escalate && !out_of_budget) {
        try {
          GatewayResult repair = generate_build_fix(
              build.compiler_log.substr(0, 8192), tree, *ctx.backend, ctx.gateway);
          fix = std::move(repair.proposals);
          tokens += repair.tokens_used;
          ++state.llm_calls;
        } catch (const std::exception& e) {
          state.status = CampaignStatus::failed;
          state.failure_diagnostic = e.what();
          break;
        }
      }
      record.token_cost = tokens;
      persist_iteration(dir, record, {}, fix);
      state.iterations.push_back(record);
      state.active_source_digest = record.firmware_ref;
      if (ctx.mock != nullptr) state.playback_cursor = ctx.mock->playback_cursor();
      if (escalate)
        state.status = CampaignStatus::needs_human;
      else if (out_of_budget)
        state.status = CampaignStatus::budget_exhausted;
      persist_state_header(dir, state);
      if (escalate || out_of_budget) break;
      if (stop_after_iterations != 0 && state.iterations.size() >= stop_after_iterations)
        break;  // status stays running; resumable
      pending = std::move(fix);
      ++k;
      continue;
    }
    state.consecutive_build_failures = 0;

    // --- test: fuzz + static + runtime ---
    FuzzCampaignResult fuzz;
    try {
      FuzzOptions fuzz_options;
      fuzz_options.workers = config.fuzz_workers;
      fuzz = run_fuzz_campaign(plan, artifact, config.target, ctx.model, k, fuzz_options);
    } catch (const std::exception& e) {
      state.status = CampaignStatus::failed;
      state.failure_diagnostic = e.what();
      break;
    }
    for (const auto& outcome : fuzz.outcomes) persist_trial(dir, k, outcome);

    MapResult analysis;
    bool analysis_ran = false;
    try {
      std::vector<AnalyzerRecord> records;
      if (config.analyzer.mode == AnalyzerMode::replay) {
        records = replay_analyzer_report(config.analyzer.report_file,
                                         config.analyzer.format);
        analysis_ran = true;
      } else if (config.analyzer.mode == AnalyzerMode::live) {
        records = run_analyzer(tree, config.analyzer.command, config.analyzer.format,
                               iteration_dir(dir, k) / "analysis");
        analysis_ran = true;
      }
      if (analysis_ran)
        analysis = map_to_findings(records, ctx.model, ctx.checkmap,
                                   count_source_files(tree), k);
    } catch (const std::exception& e) {
      state.status = CampaignStatus::failed;
      state.failure_diagnostic = e.what();
      break;
    }

    std::string combined_log;
    for (const auto& outcome : fuzz.outcomes) {
      combined_log += outcome.run.stdout_log;
      combined_log += outcome.run.stderr_log;
    }
    TimingParse parsed = parse_timing_log(combined_log);
    TimingReport timing = compute_report(parsed.samples);
    if (timing.total_samples > 0) record.timing = timing;
    TimingFindingsResult monitor =
        timing_findings(timing, ctx.model, config.declared_tasks, k);
    if (!monitor.coverage_defined && timing.total_samples > 0)
      std::cerr << "[fwsec] no declared tasks; dynamic coverage reported as 0\n";

    record.coverage.c_fuzz = fuzz.coverage;
    record.coverage.c_static = analysis_ran ? analysis.static_coverage : 0.0;
    record.coverage.c_dynamic = monitor.dynamic_coverage;

    for (const auto& id : fuzz.executed_rules) record.executed_rules.push_back(id);
    if (analysis_ran)
      for (const auto& id : analysis.executed_rules) record.executed_rules.push_back(id);
    if (timing.total_samples > 0)
      for (const auto& id : monitor.executed_rules) record.executed_rules.push_back(id);

    // Current detections, deduplicated by id across channels.
    std::vector<Finding> current;
    std::set<std::string> current_ids;
    auto add_current = [&](const Finding& f) {
      if (current_ids.insert(f.id).second) current.push_back(f);
    };
    for (const auto& f : fuzz.findings) add_current(f);
    for (const auto& f : analysis.findings) add_current(f);
    for (const auto& f : monitor.findings) add_current(f);

    // Ledger reconciliation against the previous iteration.
    std::vector<Finding> ledger = previous != nullptr ? previous->findings
                                                      : std::vector<Finding>{};
    std::set<std::string> known;
    for (auto& f : ledger) {
      known.insert(f.id);
      bool detected = current_ids.count(f.id) > 0;
      if (finding_is_open(f) && !detected)
        transition_status(f, FindingStatus::fixed);
      else if (f.status == FindingStatus::fixed && detected)
        transition_status(f, FindingStatus::regressed);
    }
    for (const auto& f : current) {
      if (known.count(f.id)) continue;
      Finding fresh = f;
      fresh.first_seen_iteration = k;
      fresh.status = FindingStatus::open;
      ledger.push_back(std::move(fresh));
    }
    record.findings = std::move(ledger);

    // --- agents, concurrently over the finished record ---
    std::vector<AgentVerdict> verdicts;
    std::vector<Finding> open = record.open_findings();
    try {
      std::future<std::vector<AgentVerdict>> threat_future, perf_future, compliance_future;
      if (config.agents_enabled.count(AgentKind::threat))
        threat_future = std::async(std::launch::async, [&] {
          return threat_agent_review(open, tree, nullptr);
        });
      if (config.agents_enabled.count(AgentKind::performance) && !timing.tasks.empty())
        perf_future = std::async(std::launch::async, [&] {
          return performance_agent_review(timing, tree, config.advisory, nullptr);
        });
      if (config.agents_enabled.count(AgentKind::compliance))
        compliance_future = std::async(std::launch::async, [&] {
          return compliance_agent_check(record, ctx.model);
        });
      for (auto* future : {&threat_future, &perf_future, &compliance_future}) {
        if (!future->valid()) continue;
        for (auto& v : future->get()) verdicts.push_back(std::move(v));
      }
    } catch (const std::exception& e) {
      state.status = CampaignStatus::failed;
      state.failure_diagnostic = e.what();
      break;
    }
    sort_verdicts(verdicts);

    std::optional<double> ada;
    if (!config.ground_truth_path.empty() &&
        config.agents_enabled.count(AgentKind::threat)) {
      GroundTruth truth = GroundTruth::load(config.ground_truth_path);
      GroundTruth reviewed;
      for (const auto& [id, label] : truth.labels)
        for (const auto& v : verdicts)
          if (v.agent == AgentKind::threat && v.subject == id &&
              (v.verdict == VerdictKind::confirm || v.verdict == VerdictKind::reject))
            reviewed.labels[id] = label;
      if (!reviewed.labels.empty()) ada = score_ada(verdicts, reviewed).second;
    }

    // --- refine: build the patch prompt for the next iteration ---
    std::set<std::string> rejected;
    for (const auto& v : verdicts)
      if (v.agent == AgentKind::threat && v.verdict == VerdictKind::reject)
        rejected.insert(v.subject);
    VulnerabilityReport report;
    for (const auto& f : open)
      if (!rejected.count(f.id)) report.findings.push_back(f);
    for (const auto& v : verdicts)
      if (v.agent == AgentKind::performance && v.verdict == VerdictKind::advise)
        report.advisories.push_back(v.annotation);

    bool compliance_ok = true;
    if (config.agents_enabled.count(AgentKind::compliance))
      for (const auto& v : verdicts)
        if (v.agent == AgentKind::compliance && v.verdict == VerdictKind::fail)
          compliance_ok = false;

    bool severity_block = false;
    int bar = severity_rank(config.convergence.no_open_findings_above);
    for (const auto& f : open)
      if (severity_rank(f.severity) >= bar) severity_block = true;
    std::uint64_t misses = record.timing.has_value()
                               ? record.timing->total_deadline_misses()
                               : 0;
    bool converged = !severity_block && misses == 0 && compliance_ok;
    bool out_of_budget = k + 1 >= config.max_iterations;

    std::vector<PatchProposal> next;
    if (!converged && !out_of_budget && !report.findings.empty()) {
      try {
        GatewayResult patch = generate_patch(report, tree, *ctx.backend, ctx.gateway);
        next = std::move(patch.proposals);
        tokens += patch.tokens_used;
        ++state.llm_calls;
      } catch (const std::exception& e) {
        state.status = CampaignStatus::failed;
        state.failure_diagnostic = e.what();
        break;
      }
    }

    record.wall_clock_seconds = std::max(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(),
        1e-6);
    record.token_cost = tokens;
    MetricsSnapshot snapshot =
        compute_snapshot(record, previous, ctx.model, config.snapshot_options());
    snapshot.ada = ada;
    record.metrics = snapshot;

    // Stagnation guard: the same non-empty open set twice in a row counts.
    // Evaluated before push_back, which may invalidate `previous`.
    bool stagnant = false;
    if (previous != nullptr) {
      std::set<std::string> open_ids, prev_open;
      for (const auto& f : record.open_findings()) open_ids.insert(f.id);
      for (const auto& f : previous->findings)
        if (finding_is_open(f)) prev_open.insert(f.id);
      stagnant = !open_ids.empty() && open_ids == prev_open;
    }

    persist_iteration(dir, record, verdicts, next);
    state.iterations.push_back(record);
    state.active_source_digest = record.firmware_ref;
    if (ctx.mock != nullptr) state.playback_cursor = ctx.mock->playback_cursor();
    if (stagnant)
      ++state.stagnant_iterations;
    else
      state.stagnant_iterations = 0;

    if (converged)
      state.status = CampaignStatus::converged;
    else if (state.stagnant_iterations >= config.convergence.max_stagnant_iterations)
      state.status = CampaignStatus::needs_human;
    else if (out_of_budget)
      state.status = CampaignStatus::budget_exhausted;
    persist_state_header(dir, state);

    if (state.status != CampaignStatus::running) break;
    if (stop_after_iterations != 0 && state.iterations.size() >= stop_after_iterations)
      break;  // paused: status stays running, resume picks up here

    pending = std::move(next);
    ++k;
  }

  persist_state_header(dir, state);
  return state;
}

}  // namespace

CampaignState run_campaign(const CampaignConfig& config_in, const RunOptions& options) {
  CampaignConfig config = config_in;
  absolutize_paths(config, fs::current_path());  // pin before persisting
  config.validate();
  if (options.campaign_dir.empty())
    throw std::invalid_argument("run_campaign: campaign_dir required");
  fs::path dir = fs::absolute(options.campaign_dir);
  if (fs::exists(dir / "state.json"))
    throw std::runtime_error("campaign directory already holds a campaign; use resume: " +
                             dir.string());
  fs::create_directories(dir);
  CampaignLock lock(dir);

  write_file(dir / "config.json", canonical_dump(config_to_json(config)));
  LoopContext ctx = make_context(config, dir, 0);
  CampaignState state;
  return run_loop(ctx, std::move(state), options.stop_after_iterations);
}

CampaignState resume_campaign(const fs::path& campaign_dir_in,
                              std::uint32_t stop_after_iterations) {
  fs::path campaign_dir = fs::absolute(campaign_dir_in);
  CampaignConfig config = load_campaign_dir_config(campaign_dir);
  CampaignState state = load_campaign_state(campaign_dir);
  if (state.status != CampaignStatus::running &&
      state.status != CampaignStatus::needs_human) {
    std::cerr << "[fwsec] campaign already " << to_string(state.status)
              << "; nothing to resume\n";
    return state;
  }
  CampaignLock lock(campaign_dir);
  if (state.status == CampaignStatus::needs_human) {
    // A human intervened (triage or source fix); give the loop fresh guards.
    state.status = CampaignStatus::running;
    state.consecutive_build_failures = 0;
    state.stagnant_iterations = 0;
  }
  LoopContext ctx = make_context(config, campaign_dir, state.playback_cursor);
  return run_loop(ctx, std::move(state), stop_after_iterations);
}

// ---------------------------------------------------------------- export

DatasetManifest export_dataset(const fs::path& campaign_dir, const fs::path& out_dir,
                               bool force) {
  CampaignState state = load_campaign_state(campaign_dir);
  if (state.iterations.empty())
    throw std::invalid_argument("export_dataset: campaign has no iterations");
  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
    throw std::runtime_error("output directory is not empty (use force): " +
                             out_dir.string());
  fs::create_directories(out_dir);

  // Deterministic copy: paths sorted by the map, bytes copied verbatim.
  std::map<std::string, std::string> files;
  auto add_tree = [&](const fs::path& root, const std::string& prefix) {
    if (!fs::exists(root)) return;
    std::vector<fs::path> paths;
    for (const auto& entry : fs::recursive_directory_iterator(root))
      if (entry.is_regular_file()) paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
      std::string rel = prefix + "/" + fs::relative(p, root).generic_string();
      files[rel] = read_file(p);
    }
  };
  add_tree(campaign_dir / "iterations", "iterations");
  add_tree(campaign_dir / "corpus", "corpus");
  files["config.json"] = read_file(campaign_dir / "config.json");
  files["state.json"] = read_file(campaign_dir / "state.json");

  json manifest;
  manifest["schema_version"] = 1;
  CampaignConfig config = load_campaign_dir_config(campaign_dir);
  manifest["campaign"] = {{"name", config.name},
                          {"seed", config.seed},
                          {"status", to_string(state.status)},
                          {"iterations", state.iterations.size()},
                          {"state_digest", campaign_state_digest(state)}};
  json file_digests;
  for (const auto& [rel, content] : files) {
    write_file(out_dir / rel, content);
    file_digests[rel] = digest128_hex(content);
  }
  manifest["files"] = file_digests;

  DatasetManifest out;
  out.manifest_json = canonical_dump(manifest);
  out.digest = digest128_hex(out.manifest_json);
  write_file(out_dir / "manifest.json", out.manifest_json);
  return out;
}

void triage_finding(const fs::path& campaign_dir, const std::string& id,
                    FindingStatus new_status, const std::string& note) {
  if (new_status != FindingStatus::accepted_risk && new_status != FindingStatus::fixed)
    throw std::invalid_argument("triage: status must be accepted-risk or fixed");
  CampaignState state = load_campaign_state(campaign_dir);
  if (state.iterations.empty())
    throw std::runtime_error("triage: campaign has no iterations");
  IterationRecord& record = state.iterations.back();
  bool found = false;
  for (auto& f : record.findings) {
    if (f.id != id) continue;
    transition_status(f, new_status);  // validates the lifecycle rule
    found = true;
    break;
  }
  if (!found) throw std::runtime_error("triage: no finding " + id + " in latest iteration");

  fs::path it_dir = iteration_dir(campaign_dir, record.index);
  write_file(it_dir / "record.json", canonical_dump(to_json(record)));
  write_file(it_dir / "findings.json", canonical_dump(findings_file_json(record.findings)));
  std::ofstream log(campaign_dir / "triage.log", std::ios::app);
  log << id << '\t' << to_string(new_status) << '\t' << note << '\n';
  persist_state_header(campaign_dir, state);
}

// ---------------------------------------------------------------- compare

namespace {

std::string slugify(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum((unsigned char)c))
      out.push_back(char(std::tolower((unsigned char)c)));
    else if (!out.empty() && out.back() != '-')
      out.push_back('-');
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

}  // namespace

ComparisonOutcome compare_configurations(const std::vector<CampaignConfig>& variants,
                                         const fs::path& work_dir) {
  if (variants.size() < 2)
    throw std::invalid_argument("compare: need at least two variants");

  // Confound guard: variants may differ only in agents-enabled.
  json reference;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    json neutral = config_to_json(variants[i]);
    neutral.erase("agents");
    neutral.erase("ground_truth");  // ADA labels only make sense with agents on
    if (i == 0)
      reference = neutral;
    else if (neutral != reference)
      throw std::invalid_argument(
          "compare: variants differ in more than agents-enabled (confound guard)");
  }

  ComparisonOutcome outcome;
  std::vector<std::pair<std::string, MetricsSnapshot>> snapshots;
  json manifest;
  manifest["schema_version"] = 1;
  json configurations;

  for (const auto& variant : variants) {
    std::string column = configuration_name(variant.agents_enabled);
    fs::path dir = work_dir / slugify(column);
    RunOptions options;
    options.campaign_dir = dir;
    CampaignState state = run_campaign(variant, options);

    MetricsSnapshot final_snapshot;
    for (auto it = state.iterations.rbegin(); it != state.iterations.rend(); ++it) {
      if (it->metrics.has_value()) {
        final_snapshot = *it->metrics;
        break;
      }
    }
    snapshots.emplace_back(column, final_snapshot);
    json agents = json::array();
    for (AgentKind a : variant.agents_enabled) agents.push_back(to_string(a));
    configurations[column] = {{"seed", variant.seed},
                              {"agents", agents},
                              {"status", to_string(state.status)},
                              {"iterations", state.iterations.size()},
                              {"state_digest", campaign_state_digest(state)},
                              {"campaign_dir", dir.generic_string()}};
    outcome.states.emplace_back(column, std::move(state));
  }

  outcome.artifacts = export_comparison(snapshots);
  manifest["configurations"] = configurations;
  outcome.manifest_json = canonical_dump(manifest);

  fs::path cmp = work_dir / "comparison";
  write_file(cmp / "table.tsv", outcome.artifacts.table_tsv);
  write_file(cmp / "radar.dat", outcome.artifacts.radar_matrix);
  write_file(cmp / "radar.legend", outcome.artifacts.radar_legend);
  write_file(cmp / "manifest.json", outcome.manifest_json);
  return outcome;
}

}  // namespace fwsec
