#include "fwsec/harness.hpp"

#include <cstdlib>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "fwsec/scenario.hpp"

namespace fs = std::filesystem;

namespace fwsec {

void TargetConfig::validate() const {
  if (startup_grace_ms == 0 || run_timeout_ms == 0 || freeze_silence_ms == 0)
    throw std::invalid_argument("target: timing fields must be positive");
  if (run_timeout_ms <= startup_grace_ms)
    throw std::invalid_argument("target: run_timeout_ms must exceed startup_grace_ms");
  if (freeze_silence_ms >= run_timeout_ms)
    throw std::invalid_argument("target: freeze_silence_ms must be below run_timeout_ms");
  if (kind == TargetKind::external_command && build_command.empty())
    throw std::invalid_argument("target: external-command needs a build_command");
  if (run_command.empty()) throw std::invalid_argument("target: run_command is empty");
}

std::string to_string(ExitStatus s) {
  switch (s) {
    case ExitStatus::clean_exit: return "clean-exit";
    case ExitStatus::timeout_kill: return "timeout-kill";
    case ExitStatus::freeze_kill: return "freeze-kill";
    case ExitStatus::crash: return "crash";
  }
  return "clean-exit";
}

ExitStatus exit_status_from_string(std::string_view s) {
  if (s == "clean-exit") return ExitStatus::clean_exit;
  if (s == "timeout-kill") return ExitStatus::timeout_kill;
  if (s == "freeze-kill") return ExitStatus::freeze_kill;
  if (s == "crash") return ExitStatus::crash;
  throw std::runtime_error("unknown exit status: '" + std::string(s) + "'");
}

std::string to_string(BuildFailureClass c) {
  switch (c) {
    case BuildFailureClass::missing_context: return "missing-context";
    case BuildFailureClass::logical_inconsistency: return "logical-inconsistency";
    case BuildFailureClass::unclassified: return "unclassified";
  }
  return "unclassified";
}

void validate_tree_path(const std::string& path) {
  if (path.empty()) throw std::runtime_error("tree path is empty");
  if (path.front() == '/') throw std::runtime_error("tree path escapes root: " + path);
  if (path.find('\0') != std::string::npos)
    throw std::runtime_error("tree path contains NUL");
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t slash = path.find('/', start);
    std::string comp = path.substr(start, slash == std::string::npos ? std::string::npos
                                                                     : slash - start);
    if (comp.empty() || comp == "." || comp == "..")
      throw std::runtime_error("tree path escapes root: " + path);
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
}

void materialize_tree(const SourceTree& tree, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [path, content] : tree) {
    validate_tree_path(path);
    fs::path full = dir / path;
    fs::create_directories(full.parent_path());
    std::ofstream out(full, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + full.string());
    out.write(content.data(), std::streamsize(content.size()));
  }
}

FailurePatternTable load_failure_patterns(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open failure pattern table: " + path);
  FailurePatternTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::size_t bar = line.find('|');
    if (bar == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'class | regex'");
    auto trim = [](std::string s) {
      while (!s.empty() && std::isspace((unsigned char)s.front())) s.erase(s.begin());
      while (!s.empty() && std::isspace((unsigned char)s.back())) s.pop_back();
      return s;
    };
    std::string cls = trim(line.substr(0, bar));
    std::string pattern = trim(line.substr(bar + 1));
    FailurePattern p;
    if (cls == "missing-context")
      p.cls = BuildFailureClass::missing_context;
    else if (cls == "logical-inconsistency")
      p.cls = BuildFailureClass::logical_inconsistency;
    else
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": unknown class '" + cls + "'");
    p.regex = pattern;
    std::regex probe(pattern);  // fail fast on bad table entries
    table.push_back(std::move(p));
  }
  return table;
}

const FailurePatternTable& default_failure_patterns() {
  static const FailurePatternTable table = [] {
    const char* env = std::getenv("FWSEC_DATA_DIR");
    std::string dir = env != nullptr && *env != '\0' ? env : FWSEC_DEFAULT_DATA_DIR;
    return load_failure_patterns(dir + "/build_failure_patterns.default");
  }();
  return table;
}

BuildFailureClass classify_build_failure(const std::string& compiler_log,
                                         const FailurePatternTable& table) {
  if (compiler_log.empty())
    throw std::invalid_argument("classify_build_failure: empty log");
  for (const auto& p : table) {
    std::regex re(p.regex);
    if (std::regex_search(compiler_log, re)) return p.cls;
  }
  return BuildFailureClass::unclassified;
}

BuildFailureClass classify_build_failure(const std::string& compiler_log) {
  return classify_build_failure(compiler_log, default_failure_patterns());
}

BuildResult build_target(const SourceTree& tree, const TargetConfig& config,
                         const fs::path& scratch, BuildArtifact* artifact) {
  config.validate();
  materialize_tree(tree, scratch);
  if (artifact != nullptr) {
    artifact->dir = scratch;
    artifact->tree_ref = tree_digest(tree);
  }

  BuildResult result;
  if (config.kind == TargetKind::stub_target) {
    // Stub "build" = scenario validation.
    fs::path scenario_path = scratch / config.run_command;
    std::ifstream in(scenario_path, std::ios::binary);
    if (!in) {
      result.success = false;
      result.compiler_log = "scenario file missing: " + config.run_command;
      result.failure_class = BuildFailureClass::missing_context;
      return result;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      parse_scenario(buf.str());
      result.success = true;
    } catch (const std::exception& e) {
      result.success = false;
      result.compiler_log = e.what();
      result.failure_class = classify_build_failure(result.compiler_log);
    }
    return result;
  }

  ExecSpec spec;
  spec.shell_command = config.build_command;
  spec.cwd = scratch.string();
  spec.run_timeout_ms = config.build_timeout_ms;
  spec.startup_grace_ms = 1;
  spec.freeze_silence_ms = config.build_timeout_ms;  // no freeze detection for builds
  ExecResult exec = run_process(spec);
  if (exec.termination == ExecResult::Termination::launch_failure)
    throw std::runtime_error("build launch failure: " + exec.error);

  result.compiler_log = exec.stdout_log + exec.stderr_log;
  if (exec.termination == ExecResult::Termination::exited && exec.exit_code == 127)
    throw std::runtime_error("build command not found (exit 127): " +
                             config.build_command);
  result.success =
      exec.termination == ExecResult::Termination::exited && exec.exit_code == 0;
  if (!result.success) {
    result.failure_class = result.compiler_log.empty()
                               ? BuildFailureClass::unclassified
                               : classify_build_failure(result.compiler_log);
    if (result.compiler_log.empty()) result.compiler_log = "build failed with no output";
  }
  return result;
}

RunResult run_target(const BuildArtifact& artifact, const TargetConfig& config,
                     const std::vector<InjectedInput>& inputs) {
  config.validate();
  if (!inputs.empty() && !config.stdin_injectable)
    throw std::invalid_argument("target is not stdin-injectable but inputs were supplied");

  // The child chdirs into the artifact before exec, so every path it gets
  // must survive that: absolutize here.
  fs::path artifact_dir = fs::absolute(artifact.dir);
  ExecSpec spec;
  spec.cwd = artifact_dir.string();
  spec.run_timeout_ms = config.run_timeout_ms;
  spec.startup_grace_ms = config.startup_grace_ms;
  spec.freeze_silence_ms = config.freeze_silence_ms;
  spec.inputs = inputs;
  spec.log_cap_bytes = config.log_cap_bytes;
  if (config.kind == TargetKind::stub_target) {
    if (config.stub_binary.empty())
      throw std::runtime_error("stub-target config needs stub_binary");
    spec.argv = {fs::absolute(config.stub_binary).string(),
                 (artifact_dir / config.run_command).string()};
  } else {
    spec.shell_command = config.run_command;
  }

  ExecResult exec = run_process(spec);
  if (exec.termination == ExecResult::Termination::launch_failure)
    throw std::runtime_error("target launch failure: " + exec.error);

  RunResult run;
  run.stdout_log = std::move(exec.stdout_log);
  run.stderr_log = std::move(exec.stderr_log);
  run.duration_ms = exec.duration_ms;
  run.freeze_silence_ms = config.freeze_silence_ms;
  run.injected_inputs = std::move(exec.injected);
  switch (exec.termination) {
    case ExecResult::Termination::exited:
      if (exec.exit_code == 0) {
        run.exit_status = ExitStatus::clean_exit;
      } else {
        run.exit_status = ExitStatus::crash;
        run.crash_code = exec.exit_code;
      }
      break;
    case ExecResult::Termination::signaled:
      run.exit_status = ExitStatus::crash;
      run.crash_signal = exec.term_signal;
      break;
    case ExecResult::Termination::timeout_kill:
      run.exit_status = ExitStatus::timeout_kill;
      break;
    case ExecResult::Termination::freeze_kill:
      run.exit_status = ExitStatus::freeze_kill;
      break;
    case ExecResult::Termination::launch_failure:
      break;  // unreachable
  }
  return run;
}

}  // namespace fwsec
