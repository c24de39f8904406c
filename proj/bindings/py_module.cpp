// Python bindings for the fwsec pipeline: domain types, the metric suite,
// timing analysis, seeded input generation, and the campaign driver.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fwsec/campaign.hpp"
#include "fwsec/fuzz.hpp"
#include "fwsec/metrics.hpp"
#include "fwsec/monitor.hpp"
#include "fwsec/serialize.hpp"
#include "fwsec/timing.hpp"

namespace py = pybind11;
using namespace fwsec;

namespace {

py::bytes input_bytes(const GeneratedInput& input) { return py::bytes(input.bytes); }

}  // namespace

PYBIND11_MODULE(_fwsec, m) {
  m.doc() = "LLM firmware security validation and patching pipeline";

  // ---- domain ----
  py::enum_<FindingSource>(m, "FindingSource")
      .value("FUZZ", FindingSource::fuzz)
      .value("STATIC_ANALYSIS", FindingSource::static_analysis)
      .value("RUNTIME_MONITOR", FindingSource::runtime_monitor)
      .value("AGENT", FindingSource::agent);

  py::enum_<FindingStatus>(m, "FindingStatus")
      .value("OPEN", FindingStatus::open)
      .value("FIXED", FindingStatus::fixed)
      .value("REGRESSED", FindingStatus::regressed)
      .value("ACCEPTED_RISK", FindingStatus::accepted_risk);

  py::class_<CweClass>(m, "CweClass")
      .def_readonly("id", &CweClass::id)
      .def_readonly("name", &CweClass::name)
      .def("__repr__", [](const CweClass& c) {
        return "CweClass(CWE-" + std::to_string(c.id) + " " + c.name + ")";
      });

  py::class_<Finding>(m, "Finding")
      .def_readonly("id", &Finding::id)
      .def_readonly("cwe", &Finding::cwe)
      .def_readonly("evidence", &Finding::evidence)
      .def_readonly("first_seen_iteration", &Finding::first_seen_iteration)
      .def_property_readonly("severity",
                             [](const Finding& f) { return to_string(f.severity); })
      .def_property_readonly("source", [](const Finding& f) { return to_string(f.source); })
      .def_property_readonly("status", [](const Finding& f) { return to_string(f.status); })
      .def("__repr__", [](const Finding& f) {
        return "Finding(" + f.id + ", CWE-" + std::to_string(f.cwe.id) + ")";
      });

  py::class_<ThreatModel>(m, "ThreatModel")
      .def_property_readonly("threat_cwes",
                             [](const ThreatModel& model) {
                               std::vector<int> out;
                               for (const auto& t : model.threats) out.push_back(t.cwe.id);
                               return out;
                             })
      .def_property_readonly("rule_ids", [](const ThreatModel& model) {
        std::vector<std::string> out;
        for (const auto& r : model.rules) out.push_back(r.id);
        return out;
      });

  m.def("load_threat_model", &load_threat_model, py::arg("path"));
  m.def(
      "classify_finding",
      [](const std::string& evidence, const std::string& source, const ThreatModel& model) {
        return classify_finding(evidence, source_from_string(source), model);
      },
      py::arg("evidence"), py::arg("source"), py::arg("model"));
  m.def("finding_id", &finding_id, py::arg("rule_id"), py::arg("evidence"));
  m.def(
      "diff_findings",
      [](const std::vector<Finding>& previous, const std::vector<Finding>& current) {
        FindingDiff d = diff_findings(previous, current);
        return py::make_tuple(d.fixed, d.added, d.persisting);
      },
      py::arg("previous"), py::arg("current"));

  // ---- metrics ----
  m.def(
      "vrr",
      [](std::uint64_t fixed, std::uint64_t total) { return vrr_percent(fixed, total); },
      py::arg("fixed"), py::arg("total"));
  m.def(
      "sci",
      [](double c_fuzz, double c_static, double c_dynamic, double w1, double w2, double w3) {
        return sci({c_fuzz, c_static, c_dynamic, w1, w2, w3});
      },
      py::arg("c_fuzz"), py::arg("c_static"), py::arg("c_dynamic"), py::arg("w1") = 1.0,
      py::arg("w2") = 1.0, py::arg("w3") = 1.0);
  m.def("tmcs", &tmcs_percent, py::arg("mitigated"), py::arg("total"));
  m.def("ada", &detection_accuracy, py::arg("tp"), py::arg("tn"), py::arg("fp"),
        py::arg("fn"));
  m.def(
      "iei",
      [](double delta_security, double delta_performance, double resources) {
        return iei({delta_security, delta_performance, resources});
      },
      py::arg("delta_security"), py::arg("delta_performance"), py::arg("resources"));

  // ---- timing ----
  py::class_<TaskTiming>(m, "TaskTiming")
      .def_readonly("task", &TaskTiming::task)
      .def_readonly("sample_count", &TaskTiming::sample_count)
      .def_readonly("wcet_ms", &TaskTiming::wcet_ms)
      .def_readonly("mean_exec_ms", &TaskTiming::mean_exec_ms)
      .def_readonly("jitter_us", &TaskTiming::jitter_us)
      .def_readonly("deadline_miss_count", &TaskTiming::deadline_miss_count);

  py::class_<TimingReport>(m, "TimingReport")
      .def_readonly("tasks", &TimingReport::tasks)
      .def_readonly("total_samples", &TimingReport::total_samples)
      .def("total_deadline_misses", &TimingReport::total_deadline_misses)
      .def("max_wcet_ms", &TimingReport::max_wcet_ms)
      .def("max_jitter_us", &TimingReport::max_jitter_us);

  m.def(
      "analyze_timing_log",
      [](const std::string& log) {
        TimingParse parsed = parse_timing_log(log);
        return py::make_tuple(compute_report(parsed.samples), parsed.warnings);
      },
      py::arg("log"), "Parse a target log and aggregate per-task timing.");

  // ---- fuzz ----
  m.def(
      "generate_inputs",
      [](std::uint64_t seed, std::uint32_t trials, std::uint32_t trial_index,
         std::uint32_t inputs_per_trial, std::uint32_t max_input_len,
         const std::vector<std::string>& generators, double flood_rate_multiplier) {
        FuzzPlan plan;
        plan.seed = seed;
        plan.trials = trials;
        plan.inputs_per_trial = inputs_per_trial;
        plan.max_input_len = max_input_len;
        for (const auto& g : generators)
          plan.generators.push_back(generator_from_string(g));
        plan.flood_rate_multiplier = flood_rate_multiplier;
        std::vector<py::bytes> out;
        for (const auto& input : generate_inputs(plan, trial_index))
          out.push_back(input_bytes(input));
        return out;
      },
      py::arg("seed"), py::arg("trials"), py::arg("trial_index"),
      py::arg("inputs_per_trial") = 4, py::arg("max_input_len") = 64,
      py::arg("generators") = std::vector<std::string>{"random-bytes"},
      py::arg("flood_rate_multiplier") = 8.0,
      "Deterministic seeded fuzz inputs for one trial.");

  // ---- campaign ----
  py::class_<MetricsSnapshot>(m, "MetricsSnapshot")
      .def_readonly("vrr_baseline", &MetricsSnapshot::vrr_baseline)
      .def_readonly("vrr_vacuous", &MetricsSnapshot::vrr_vacuous)
      .def_readonly("vrr", &MetricsSnapshot::vrr)
      .def_property_readonly("sci", [](const MetricsSnapshot& s) { return s.sci_value; })
      .def_readonly("tmcs", &MetricsSnapshot::tmcs)
      .def_readonly("wcet_ms", &MetricsSnapshot::wcet_ms)
      .def_readonly("jitter_us", &MetricsSnapshot::jitter_us)
      .def_readonly("ada", &MetricsSnapshot::ada)
      .def_property_readonly("iei", [](const MetricsSnapshot& s) { return s.iei_value; });

  py::class_<IterationRecord>(m, "IterationRecord")
      .def_readonly("index", &IterationRecord::index)
      .def_readonly("firmware_ref", &IterationRecord::firmware_ref)
      .def_readonly("findings", &IterationRecord::findings)
      .def_readonly("metrics", &IterationRecord::metrics)
      .def("open_findings", &IterationRecord::open_findings);

  py::class_<CampaignState>(m, "CampaignState")
      .def_property_readonly("status",
                             [](const CampaignState& s) { return to_string(s.status); })
      .def_readonly("iterations", &CampaignState::iterations)
      .def_readonly("active_source_digest", &CampaignState::active_source_digest)
      .def("digest", [](const CampaignState& s) { return campaign_state_digest(s); });

  m.def(
      "run_campaign",
      [](const std::string& config_path, const std::string& campaign_dir,
         std::uint32_t stop_after) {
        CampaignConfig config = load_campaign_config(config_path);
        RunOptions options;
        options.campaign_dir = campaign_dir;
        options.stop_after_iterations = stop_after;
        return run_campaign(config, options);
      },
      py::arg("config_path"), py::arg("campaign_dir"), py::arg("stop_after") = 0);
  m.def("resume_campaign",
        [](const std::string& dir, std::uint32_t stop_after) {
          return resume_campaign(dir, stop_after);
        },
        py::arg("campaign_dir"), py::arg("stop_after") = 0);
  m.def("load_campaign_state",
        [](const std::string& dir) { return load_campaign_state(dir); },
        py::arg("campaign_dir"));
  m.def(
      "export_dataset",
      [](const std::string& campaign_dir, const std::string& out_dir, bool force) {
        return export_dataset(campaign_dir, out_dir, force).digest;
      },
      py::arg("campaign_dir"), py::arg("out_dir"), py::arg("force") = false,
      "Export the campaign dataset; returns the manifest digest.");

  m.attr("__version__") = "0.1.0";
}
