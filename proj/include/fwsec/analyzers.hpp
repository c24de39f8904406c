#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fwsec/domain.hpp"
#include "fwsec/harness.hpp"

namespace fwsec {

enum class AnalyzerFormat { cppcheck_xml, clang_sarif, generic_gcc_text };

std::string to_string(AnalyzerFormat f);
AnalyzerFormat analyzer_format_from_string(std::string_view s);

struct AnalyzerRecord {
  AnalyzerFormat tool = AnalyzerFormat::generic_gcc_text;
  std::string file;
  int line = 1;  // >= 1
  std::string check_id;
  std::string message;
  std::string tool_severity;
};

/// Raised when a report cannot be parsed; carries the head of the raw
/// output for diagnosis.
class AdapterError : public std::runtime_error {
 public:
  AdapterError(const std::string& message, std::string raw_head)
      : std::runtime_error(message), raw_head_(std::move(raw_head)) {}
  const std::string& raw_head() const { return raw_head_; }

 private:
  std::string raw_head_;
};

/// Parses one report in the named format: cppcheck XML v2, SARIF 2.1.0, or
/// GCC-style "file:line: severity: message" text. Grammars are documented
/// in docs/analyzers.md. Throws AdapterError on unparseable input.
std::vector<AnalyzerRecord> parse_analyzer_report(const std::string& text,
                                                  AnalyzerFormat format);

/// Replay mode: parses a pre-captured report file.
std::vector<AnalyzerRecord> replay_analyzer_report(const std::filesystem::path& report,
                                                   AnalyzerFormat format);

/// Live mode: materializes the tree, runs the tool command in it and parses
/// its output (stderr first for cppcheck, which reports there). A missing
/// tool (shell exit 127) is an environment error, thrown as
/// std::runtime_error distinct from AdapterError.
std::vector<AnalyzerRecord> run_analyzer(const SourceTree& tree,
                                         const std::string& tool_command,
                                         AnalyzerFormat format,
                                         const std::filesystem::path& scratch);

struct CheckMapEntry {
  std::string check_id;  // exact match against the record's check id
  int cwe = 0;
};
using CheckMap = std::vector<CheckMapEntry>;

CheckMap load_checkmap(const std::string& path);
/// Bundled defaults for common cppcheck / clang-analyzer checks.
const CheckMap& default_checkmap();

struct MapResult {
  std::vector<Finding> findings;
  std::vector<AnalyzerRecord> uncategorized;  // retained for triage
  double static_coverage = 0.0;  // analyzed files / total source files
  std::vector<std::string> executed_rules;  // analyzer-message rules consulted
};

/// Matches each record against the model's analyzer-message rules first
/// (pattern over check id or message, declared order), then against the
/// check map (exact check id, only for CWEs the model knows). A record maps
/// to exactly one finding or lands in `uncategorized`, so
/// |findings| + |uncategorized| == |records|.
MapResult map_to_findings(const std::vector<AnalyzerRecord>& records,
                          const ThreatModel& model, const CheckMap& checkmap,
                          std::size_t total_source_files, std::uint32_t iteration = 0);

}  // namespace fwsec
