#include "fwsec/serialize.hpp"

#include <stdexcept>

using nlohmann::json;

namespace fwsec {

std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

json to_json(const Finding& f) {
  json j;
  j["id"] = f.id;
  j["cwe"] = {{"id", f.cwe.id}, {"name", f.cwe.name}, {"category", to_string(f.cwe.category)}};
  j["severity"] = to_string(f.severity);
  j["source"] = to_string(f.source);
  j["evidence"] = f.evidence;
  if (f.location.has_value())
    j["location"] = {{"file", f.location->file}, {"line", f.location->line}};
  j["first_seen_iteration"] = f.first_seen_iteration;
  j["status"] = to_string(f.status);
  return j;
}

Finding finding_from_json(const json& j) {
  Finding f;
  f.id = j.at("id").get<std::string>();
  f.cwe.id = j.at("cwe").at("id").get<int>();
  f.cwe.name = j.at("cwe").at("name").get<std::string>();
  f.cwe.category = cwe_category_from_string(j.at("cwe").at("category").get<std::string>());
  f.severity = severity_from_string(j.at("severity").get<std::string>());
  f.source = source_from_string(j.at("source").get<std::string>());
  f.evidence = j.at("evidence").get<std::string>();
  if (j.contains("location"))
    f.location = SourceLocation{j["location"].at("file").get<std::string>(),
                                j["location"].at("line").get<int>()};
  f.first_seen_iteration = j.at("first_seen_iteration").get<std::uint32_t>();
  f.status = status_from_string(j.at("status").get<std::string>());
  return f;
}

json to_json(const TimingReport& r) {
  json tasks = json::array();
  for (const auto& t : r.tasks) {
    tasks.push_back({{"task", t.task},
                     {"sample_count", t.sample_count},
                     {"wcet_ms", t.wcet_ms},
                     {"mean_exec_ms", t.mean_exec_ms},
                     {"jitter_us", t.jitter_us},
                     {"deadline_miss_count", t.deadline_miss_count}});
  }
  return {{"tasks", tasks}, {"total_samples", r.total_samples}};
}

TimingReport timing_report_from_json(const json& j) {
  TimingReport r;
  r.total_samples = j.at("total_samples").get<std::uint64_t>();
  for (const auto& t : j.at("tasks")) {
    TaskTiming task;
    task.task = t.at("task").get<std::string>();
    task.sample_count = t.at("sample_count").get<std::uint64_t>();
    task.wcet_ms = t.at("wcet_ms").get<double>();
    task.mean_exec_ms = t.at("mean_exec_ms").get<double>();
    task.jitter_us = t.at("jitter_us").get<double>();
    task.deadline_miss_count = t.at("deadline_miss_count").get<std::uint64_t>();
    r.tasks.push_back(std::move(task));
  }
  return r;
}

namespace {

json coverage_to_json(const CoverageVector& c) {
  return {{"c_fuzz", c.c_fuzz},   {"c_static", c.c_static}, {"c_dynamic", c.c_dynamic},
          {"w1", c.w1},           {"w2", c.w2},             {"w3", c.w3}};
}

CoverageVector coverage_from_json(const json& j) {
  CoverageVector c;
  c.c_fuzz = j.at("c_fuzz").get<double>();
  c.c_static = j.at("c_static").get<double>();
  c.c_dynamic = j.at("c_dynamic").get<double>();
  c.w1 = j.at("w1").get<double>();
  c.w2 = j.at("w2").get<double>();
  c.w3 = j.at("w3").get<double>();
  return c;
}

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v.has_value()) j[key] = *v;
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

json to_json(const MetricsSnapshot& s) {
  json j;
  j["vrr_baseline"] = s.vrr_baseline;
  j["vrr_vacuous"] = s.vrr_vacuous;
  put_optional(j, "vrr", s.vrr);
  j["sci"] = s.sci_value;
  put_optional(j, "tmcs", s.tmcs);
  put_optional(j, "wcet_ms", s.wcet_ms);
  put_optional(j, "jitter_us", s.jitter_us);
  put_optional(j, "ada", s.ada);
  put_optional(j, "iei", s.iei_value);
  j["raw_inputs"] = {{"fixed_count", s.raw.fixed_count},
                     {"total_identified", s.raw.total_identified},
                     {"mitigated_threats", s.raw.mitigated_threats},
                     {"total_threats", s.raw.total_threats},
                     {"coverage", coverage_to_json(s.raw.coverage)},
                     {"deadline_misses", s.raw.deadline_misses},
                     {"wall_clock_seconds", s.raw.wall_clock_seconds},
                     {"token_cost", s.raw.token_cost},
                     {"security_score", s.raw.security_score},
                     {"performance_score", s.raw.performance_score},
                     {"resources", s.raw.resources}};
  return j;
}

MetricsSnapshot metrics_snapshot_from_json(const json& j) {
  MetricsSnapshot s;
  s.vrr_baseline = j.at("vrr_baseline").get<bool>();
  s.vrr_vacuous = j.at("vrr_vacuous").get<bool>();
  s.vrr = get_optional<double>(j, "vrr");
  s.sci_value = j.at("sci").get<double>();
  s.tmcs = get_optional<double>(j, "tmcs");
  s.wcet_ms = get_optional<double>(j, "wcet_ms");
  s.jitter_us = get_optional<double>(j, "jitter_us");
  s.ada = get_optional<double>(j, "ada");
  s.iei_value = get_optional<double>(j, "iei");
  const json& raw = j.at("raw_inputs");
  s.raw.fixed_count = raw.at("fixed_count").get<std::uint64_t>();
  s.raw.total_identified = raw.at("total_identified").get<std::uint64_t>();
  s.raw.mitigated_threats = raw.at("mitigated_threats").get<std::uint64_t>();
  s.raw.total_threats = raw.at("total_threats").get<std::uint64_t>();
  s.raw.coverage = coverage_from_json(raw.at("coverage"));
  s.raw.deadline_misses = raw.at("deadline_misses").get<std::uint64_t>();
  s.raw.wall_clock_seconds = raw.at("wall_clock_seconds").get<double>();
  s.raw.token_cost = raw.at("token_cost").get<std::uint64_t>();
  s.raw.security_score = raw.at("security_score").get<double>();
  s.raw.performance_score = raw.at("performance_score").get<double>();
  s.raw.resources = raw.at("resources").get<double>();
  return s;
}

json to_json(const PatchRef& p) {
  return {{"target_file", p.target_file},
          {"content_digest", p.content_digest},
          {"proposed_by", p.proposed_by},
          {"addresses", p.addresses}};
}

PatchRef patch_ref_from_json(const json& j) {
  PatchRef p;
  p.target_file = j.at("target_file").get<std::string>();
  p.content_digest = j.at("content_digest").get<std::string>();
  p.proposed_by = j.at("proposed_by").get<std::string>();
  p.addresses = j.at("addresses").get<std::vector<std::string>>();
  return p;
}

json to_json(const IterationRecord& r) {
  json findings = json::array();
  for (const auto& f : r.findings) findings.push_back(to_json(f));
  json patches = json::array();
  for (const auto& p : r.patches) patches.push_back(to_json(p));

  json j;
  j["index"] = r.index;
  j["firmware_ref"] = r.firmware_ref;
  j["findings"] = findings;
  j["coverage"] = coverage_to_json(r.coverage);
  if (r.timing.has_value()) j["timing"] = to_json(*r.timing);
  if (r.metrics.has_value()) j["metrics"] = to_json(*r.metrics);
  j["patches"] = patches;
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  j["token_cost"] = r.token_cost;
  j["executed_rules"] = r.executed_rules;
  j["build_ok"] = r.build_ok;
  j["build_failure_class"] = r.build_failure_class;
  return j;
}

IterationRecord iteration_record_from_json(const json& j) {
  IterationRecord r;
  r.index = j.at("index").get<std::uint32_t>();
  r.firmware_ref = j.at("firmware_ref").get<std::string>();
  for (const auto& f : j.at("findings")) r.findings.push_back(finding_from_json(f));
  r.coverage = coverage_from_json(j.at("coverage"));
  if (j.contains("timing")) r.timing = timing_report_from_json(j["timing"]);
  if (j.contains("metrics")) r.metrics = metrics_snapshot_from_json(j["metrics"]);
  for (const auto& p : j.at("patches")) r.patches.push_back(patch_ref_from_json(p));
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  r.token_cost = j.at("token_cost").get<std::uint64_t>();
  r.executed_rules = j.at("executed_rules").get<std::vector<std::string>>();
  r.build_ok = j.at("build_ok").get<bool>();
  r.build_failure_class = j.at("build_failure_class").get<std::string>();
  return r;
}

json to_json(const AgentVerdict& v) {
  json j;
  j["agent"] = to_string(v.agent);
  j["subject"] = v.subject;
  j["verdict"] = to_string(v.verdict);
  j["annotation"] = v.annotation;
  if (v.suggested_patch.has_value()) j["suggested_patch"] = *v.suggested_patch;
  return j;
}

AgentVerdict agent_verdict_from_json(const json& j) {
  AgentVerdict v;
  v.agent = agent_from_string(j.at("agent").get<std::string>());
  v.subject = j.at("subject").get<std::string>();
  v.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  v.annotation = j.at("annotation").get<std::string>();
  if (j.contains("suggested_patch"))
    v.suggested_patch = j["suggested_patch"].get<std::string>();
  return v;
}

json to_json(const PatchProposal& p) {
  return {{"target_file", p.target_file},
          {"replacement_source", p.replacement_source},
          {"rationale", p.rationale},
          {"proposed_by", p.proposed_by},
          {"addresses", p.addresses}};
}

PatchProposal patch_proposal_from_json(const json& j) {
  PatchProposal p;
  p.target_file = j.at("target_file").get<std::string>();
  p.replacement_source = j.at("replacement_source").get<std::string>();
  p.rationale = j.at("rationale").get<std::string>();
  p.proposed_by = j.at("proposed_by").get<std::string>();
  p.addresses = j.at("addresses").get<std::vector<std::string>>();
  return p;
}

json findings_file_json(const std::vector<Finding>& findings) {
  json arr = json::array();
  for (const auto& f : findings) arr.push_back(to_json(f));
  return {{"schema_version", 1}, {"findings", arr}};
}

void validate_findings_json(const json& doc) {
  if (!doc.is_object()) throw std::runtime_error("findings: not an object");
  if (!doc.contains("schema_version") || doc["schema_version"].get<int>() != 1)
    throw std::runtime_error("findings: missing or unsupported schema_version");
  if (!doc.contains("findings") || !doc["findings"].is_array())
    throw std::runtime_error("findings: missing findings array");
  for (const auto& f : doc["findings"]) {
    Finding parsed = finding_from_json(f);  // throws on malformed entries
    if (parsed.id.size() != 32)
      throw std::runtime_error("findings: id is not a 128-bit hex digest");
    if (parsed.cwe.id <= 0) throw std::runtime_error("findings: non-positive CWE id");
    if (parsed.evidence.empty()) throw std::runtime_error("findings: empty evidence");
    if (parsed.evidence.size() > 4096)
      throw std::runtime_error("findings: evidence exceeds 4 KiB");
  }
}

}  // namespace fwsec
