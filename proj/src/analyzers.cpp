#include "fwsec/analyzers.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "fwsec/process.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fwsec {

std::string to_string(AnalyzerFormat f) {
  switch (f) {
    case AnalyzerFormat::cppcheck_xml: return "cppcheck-xml";
    case AnalyzerFormat::clang_sarif: return "clang-sarif";
    case AnalyzerFormat::generic_gcc_text: return "generic-gcc-text";
  }
  return "generic-gcc-text";
}

AnalyzerFormat analyzer_format_from_string(std::string_view s) {
  if (s == "cppcheck-xml") return AnalyzerFormat::cppcheck_xml;
  if (s == "clang-sarif") return AnalyzerFormat::clang_sarif;
  if (s == "generic-gcc-text") return AnalyzerFormat::generic_gcc_text;
  throw std::runtime_error("unknown analyzer format: '" + std::string(s) + "'");
}

namespace {

std::string head_of(const std::string& text) { return text.substr(0, 512); }

std::string decode_xml_entities(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    auto match = [&](std::string_view entity, char repl) {
      if (s.compare(i, entity.size(), entity) == 0) {
        out.push_back(repl);
        i += entity.size();
        return true;
      }
      return false;
    };
    if (match("&quot;", '"') || match("&apos;", '\'') || match("&#039;", '\'') ||
        match("&lt;", '<') || match("&gt;", '>') || match("&amp;", '&'))
      continue;
    out.push_back(s[i++]);
  }
  return out;
}

// Attribute value inside one XML tag body; tolerant of attribute order.
std::string xml_attr(const std::string& tag, const std::string& name) {
  std::regex re(name + "\\s*=\\s*\"([^\"]*)\"");
  std::smatch m;
  if (std::regex_search(tag, m, re)) return decode_xml_entities(m[1].str());
  return "";
}

std::vector<AnalyzerRecord> parse_cppcheck_xml(const std::string& text) {
  if (text.find("<results") == std::string::npos)
    throw AdapterError("cppcheck report: no <results> element", head_of(text));

  std::vector<AnalyzerRecord> records;
  // <error ...> ... </error> or self-closing <error .../>; the first nested
  // <location .../> supplies file and line.
  std::regex error_re("<error\\b([^>]*?)(/>|>)");
  auto begin = std::sregex_iterator(text.begin(), text.end(), error_re);
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    std::string attrs = (*it)[1].str();
    bool self_closing = (*it)[2].str() == "/>";
    AnalyzerRecord rec;
    rec.tool = AnalyzerFormat::cppcheck_xml;
    rec.check_id = xml_attr(attrs, "id");
    rec.message = xml_attr(attrs, "msg");
    rec.tool_severity = xml_attr(attrs, "severity");
    if (!self_closing) {
      std::size_t body_start = std::size_t(it->position()) + it->length();
      std::size_t body_end = text.find("</error>", body_start);
      std::string body = text.substr(body_start, body_end == std::string::npos
                                                     ? 0
                                                     : body_end - body_start);
      std::smatch loc;
      std::regex loc_re("<location\\b([^>]*)>");
      if (std::regex_search(body, loc, loc_re)) {
        std::string loc_attrs = loc[1].str();
        rec.file = xml_attr(loc_attrs, "file");
        std::string line = xml_attr(loc_attrs, "line");
        if (!line.empty()) rec.line = std::max(1, std::atoi(line.c_str()));
      }
    }
    if (rec.message.empty()) rec.message = rec.check_id;
    if (rec.message.empty()) continue;  // skip degenerate entries
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<AnalyzerRecord> parse_sarif(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw AdapterError(std::string("SARIF parse error: ") + e.what(), head_of(text));
  }
  if (!doc.is_object() || !doc.contains("runs") || !doc["runs"].is_array())
    throw AdapterError("SARIF report: missing runs array", head_of(text));

  std::vector<AnalyzerRecord> records;
  for (const auto& run : doc["runs"]) {
    if (!run.contains("results")) continue;
    for (const auto& result : run["results"]) {
      AnalyzerRecord rec;
      rec.tool = AnalyzerFormat::clang_sarif;
      rec.check_id = result.value("ruleId", "");
      rec.tool_severity = result.value("level", "warning");
      if (result.contains("message") && result["message"].contains("text"))
        rec.message = result["message"]["text"].get<std::string>();
      if (rec.message.empty()) rec.message = rec.check_id;
      if (result.contains("locations") && result["locations"].is_array() &&
          !result["locations"].empty()) {
        const auto& loc = result["locations"][0];
        if (loc.contains("physicalLocation")) {
          const auto& phys = loc["physicalLocation"];
          if (phys.contains("artifactLocation"))
            rec.file = phys["artifactLocation"].value("uri", "");
          if (phys.contains("region"))
            rec.line = std::max(1, phys["region"].value("startLine", 1));
        }
      }
      if (rec.message.empty()) continue;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::vector<AnalyzerRecord> parse_gcc_text(const std::string& text) {
  std::vector<AnalyzerRecord> records;
  std::regex line_re(R"(^([^:\s][^:]*):(\d+)(?::\d+)?:\s*(warning|error):\s*(.*)$)");
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    AnalyzerRecord rec;
    rec.tool = AnalyzerFormat::generic_gcc_text;
    rec.file = m[1].str();
    rec.line = std::max(1, std::atoi(m[2].str().c_str()));
    rec.tool_severity = m[3].str();
    rec.message = m[4].str();
    // Diagnostic flag suffix, e.g. [-Wmaybe-uninitialized], becomes the check id.
    std::smatch flag;
    std::regex flag_re(R"(\[(\-W[^\]]+)\]\s*$)");
    if (std::regex_search(rec.message, flag, flag_re)) rec.check_id = flag[1].str();
    records.push_back(std::move(rec));
  }
  if (records.empty() && text.find(": warning:") == std::string::npos &&
      text.find(": error:") == std::string::npos && !text.empty()) {
    // Plain prose with no diagnostics at all still parses to zero records;
    // only a non-text payload is an error.
    if (text.find('\0') != std::string::npos)
      throw AdapterError("gcc-text report: binary payload", head_of(text));
  }
  return records;
}

}  // namespace

std::vector<AnalyzerRecord> parse_analyzer_report(const std::string& text,
                                                  AnalyzerFormat format) {
  switch (format) {
    case AnalyzerFormat::cppcheck_xml: return parse_cppcheck_xml(text);
    case AnalyzerFormat::clang_sarif: return parse_sarif(text);
    case AnalyzerFormat::generic_gcc_text: return parse_gcc_text(text);
  }
  return {};
}

std::vector<AnalyzerRecord> replay_analyzer_report(const fs::path& report,
                                                   AnalyzerFormat format) {
  std::ifstream in(report, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open analyzer report: " + report.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_analyzer_report(buf.str(), format);
}

std::vector<AnalyzerRecord> run_analyzer(const SourceTree& tree,
                                         const std::string& tool_command,
                                         AnalyzerFormat format, const fs::path& scratch) {
  materialize_tree(tree, scratch);
  ExecSpec spec;
  spec.shell_command = tool_command;
  spec.cwd = scratch.string();
  spec.run_timeout_ms = 120000;
  spec.freeze_silence_ms = 119000;
  ExecResult exec = run_process(spec);
  if (exec.termination == ExecResult::Termination::launch_failure)
    throw std::runtime_error("analyzer launch failure: " + exec.error);
  if (exec.termination == ExecResult::Termination::exited && exec.exit_code == 127)
    throw std::runtime_error("analyzer not installed (exit 127): " + tool_command);

  // cppcheck emits its XML on stderr; other tools print to stdout.
  if (format == AnalyzerFormat::cppcheck_xml &&
      exec.stderr_log.find("<results") != std::string::npos)
    return parse_analyzer_report(exec.stderr_log, format);
  std::string combined = exec.stdout_log;
  if (!exec.stderr_log.empty()) combined += "\n" + exec.stderr_log;
  return parse_analyzer_report(combined, format);
}

CheckMap load_checkmap(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open check map: " + path);
  CheckMap map;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::size_t bar = line.find('|');
    if (bar == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'check-id | cwe'");
    auto trim = [](std::string s) {
      while (!s.empty() && std::isspace((unsigned char)s.front())) s.erase(s.begin());
      while (!s.empty() && std::isspace((unsigned char)s.back())) s.pop_back();
      return s;
    };
    CheckMapEntry entry;
    entry.check_id = trim(line.substr(0, bar));
    std::string cwe = trim(line.substr(bar + 1));
    entry.cwe = std::atoi(cwe.c_str());
    if (entry.check_id.empty() || entry.cwe <= 0)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad entry");
    map.push_back(std::move(entry));
  }
  return map;
}

const CheckMap& default_checkmap() {
  static const CheckMap map = [] {
    const char* env = std::getenv("FWSEC_DATA_DIR");
    std::string dir = env != nullptr && *env != '\0' ? env : FWSEC_DEFAULT_DATA_DIR;
    return load_checkmap(dir + "/analyzer_checkmap.default");
  }();
  return map;
}

namespace {

std::string record_evidence(const AnalyzerRecord& rec) {
  std::ostringstream out;
  if (!rec.file.empty()) out << rec.file << ":" << rec.line << ": ";
  if (!rec.check_id.empty()) out << "[" << rec.check_id << "] ";
  out << rec.message;
  return out.str();
}

}  // namespace

MapResult map_to_findings(const std::vector<AnalyzerRecord>& records,
                          const ThreatModel& model, const CheckMap& checkmap,
                          std::size_t total_source_files, std::uint32_t iteration) {
  MapResult result;
  std::set<std::string> analyzed_files;

  for (const auto& rule : model.rules)
    if (rule.enabled && rule.detector == DetectorKind::analyzer_message)
      result.executed_rules.push_back(rule.id);

  for (const auto& rec : records) {
    if (!rec.file.empty()) analyzed_files.insert(rec.file);
    std::string evidence = record_evidence(rec);

    const SecurityRule* matched = nullptr;
    for (const auto& rule : model.rules) {
      if (!rule.enabled || rule.detector != DetectorKind::analyzer_message) continue;
      std::string pat = rule.pattern;
      auto flags = std::regex::ECMAScript;
      if (pat.rfind("(?i)", 0) == 0) {
        pat = pat.substr(4);
        flags |= std::regex::icase;
      }
      std::regex re(pat, flags);
      if (std::regex_search(rec.check_id, re) || std::regex_search(rec.message, re)) {
        matched = &rule;
        break;
      }
    }

    Finding finding;
    bool mapped = false;
    if (matched != nullptr) {
      finding = make_finding(*matched, model, evidence, FindingSource::static_analysis,
                             iteration);
      mapped = true;
    } else if (!rec.check_id.empty()) {
      for (const auto& entry : checkmap) {
        if (entry.check_id == rec.check_id && model.has_cwe(entry.cwe)) {
          SecurityRule pseudo;
          pseudo.id = "checkmap:" + entry.check_id;
          pseudo.cwe = entry.cwe;
          pseudo.severity = default_severity(entry.cwe);
          finding = make_finding(pseudo, model, evidence,
                                 FindingSource::static_analysis, iteration);
          mapped = true;
          break;
        }
      }
    }
    if (mapped) {
      if (!rec.file.empty()) finding.location = SourceLocation{rec.file, rec.line};
      result.findings.push_back(std::move(finding));
    } else {
      result.uncategorized.push_back(rec);
    }
  }

  result.static_coverage =
      total_source_files == 0
          ? 0.0
          : std::min(1.0, double(analyzed_files.size()) / double(total_source_files));
  return result;
}

}  // namespace fwsec
