// fwsec: firmware validation and patching pipeline CLI.
//
// Subcommands: run, resume, export, compare, metrics, triage.
// Exit codes for run/resume: 0 converged, 2 budget-exhausted, 3 needs-human,
// 1 failed.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fwsec/campaign.hpp"
#include "fwsec/serialize.hpp"

using namespace fwsec;

namespace {

int finish(const CampaignState& state) {
  std::cout << "campaign status: " << to_string(state.status) << " after "
            << state.iterations.size() << " iteration(s)\n";
  if (!state.failure_diagnostic.empty())
    std::cerr << "diagnostic: " << state.failure_diagnostic << '\n';
  if (!state.iterations.empty() && state.iterations.back().metrics.has_value()) {
    const MetricsSnapshot& m = *state.iterations.back().metrics;
    std::cout << "final metrics:";
    if (m.vrr.has_value()) std::cout << " vrr=" << *m.vrr << "%";
    std::cout << " sci=" << m.sci_value;
    if (m.tmcs.has_value()) std::cout << " tmcs=" << *m.tmcs << "%";
    if (m.wcet_ms.has_value()) std::cout << " wcet_ms=" << *m.wcet_ms;
    if (m.jitter_us.has_value()) std::cout << " jitter_us=" << *m.jitter_us;
    std::cout << '\n';
  }
  std::cout << "state digest: " << campaign_state_digest(state) << '\n';
  return exit_code_for(state.status);
}

void print_metrics(const CampaignState& state) {
  std::cout << "iteration\tvrr\tsci\ttmcs\twcet_ms\tjitter_us\tada\tiei\topen_findings\n";
  for (const auto& record : state.iterations) {
    std::cout << record.index << '\t';
    auto cell = [](const std::optional<double>& v) {
      return v.has_value() ? std::to_string(*v) : std::string("n/a");
    };
    if (record.metrics.has_value()) {
      const MetricsSnapshot& m = *record.metrics;
      std::cout << (m.vrr_baseline ? "baseline" : cell(m.vrr)) << '\t' << m.sci_value
                << '\t' << cell(m.tmcs) << '\t' << cell(m.wcet_ms) << '\t'
                << cell(m.jitter_us) << '\t' << cell(m.ada) << '\t' << cell(m.iei_value);
    } else {
      std::cout << "n/a\tn/a\tn/a\tn/a\tn/a\tn/a\tn/a";
    }
    std::cout << '\t' << record.open_findings().size() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fwsec: LLM firmware security validation and patching pipeline"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "run a campaign from a config file");
  std::string config_path, campaign_dir;
  std::uint32_t stop_after = 0;
  run_cmd->add_option("config", config_path, "campaign config JSON")->required();
  run_cmd->add_option("-d,--dir", campaign_dir, "campaign directory")->required();
  run_cmd->add_option("--stop-after", stop_after,
                      "pause (resumable) after this many iterations");

  // resume
  auto* resume_cmd = app.add_subcommand("resume", "resume a persisted campaign");
  std::string resume_dir;
  std::uint32_t resume_stop_after = 0;
  resume_cmd->add_option("dir", resume_dir, "campaign directory")->required();
  resume_cmd->add_option("--stop-after", resume_stop_after,
                         "pause (resumable) after this many iterations");

  // export
  auto* export_cmd = app.add_subcommand("export", "export the campaign dataset");
  std::string export_campaign, export_out;
  bool export_force = false;
  export_cmd->add_option("dir", export_campaign, "campaign directory")->required();
  export_cmd->add_option("-o,--out", export_out, "output directory")->required();
  export_cmd->add_flag("--force", export_force, "overwrite a non-empty output directory");

  // compare
  auto* compare_cmd = app.add_subcommand(
      "compare", "run agent-set variants of one config and compare metrics");
  std::string compare_config, compare_dir;
  std::vector<std::string> variant_specs;
  compare_cmd->add_option("config", compare_config, "base campaign config JSON")->required();
  compare_cmd->add_option("-d,--dir", compare_dir, "work directory")->required();
  compare_cmd
      ->add_option("--variants", variant_specs,
                   "agent sets, e.g. none threat,performance,compliance")
      ->required()
      ->expected(-2);

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "print per-iteration metrics");
  std::string metrics_dir;
  metrics_cmd->add_option("dir", metrics_dir, "campaign directory")->required();

  // analyze
  auto* analyze_cmd = app.add_subcommand(
      "analyze", "normalize a static-analyzer report into findings JSON");
  std::string analyze_report, analyze_format = "cppcheck-xml", analyze_model,
              analyze_checkmap;
  std::size_t analyze_total_files = 0;
  analyze_cmd->add_option("report", analyze_report, "report file to parse")->required();
  analyze_cmd
      ->add_option("--format", analyze_format,
                   "cppcheck-xml | clang-sarif | generic-gcc-text")
      ->capture_default_str();
  analyze_cmd->add_option("--threat-model", analyze_model, "rules file")->required();
  analyze_cmd->add_option("--checkmap", analyze_checkmap, "check-id map override");
  analyze_cmd->add_option("--source-files", analyze_total_files,
                          "total source files for the coverage figure");

  // triage
  auto* triage_cmd =
      app.add_subcommand("triage", "mark a finding accepted-risk or fixed with a note");
  std::string triage_dir, triage_id, triage_status, triage_note;
  triage_cmd->add_option("dir", triage_dir, "campaign directory")->required();
  triage_cmd->add_option("finding", triage_id, "finding id")->required();
  triage_cmd->add_option("--status", triage_status, "accepted-risk or fixed")->required();
  triage_cmd->add_option("--note", triage_note, "auditable note")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      CampaignConfig config = load_campaign_config(config_path);
      RunOptions options;
      options.campaign_dir = campaign_dir;
      options.stop_after_iterations = stop_after;
      return finish(run_campaign(config, options));
    }
    if (*resume_cmd) {
      return finish(resume_campaign(resume_dir, resume_stop_after));
    }
    if (*export_cmd) {
      DatasetManifest manifest = export_dataset(export_campaign, export_out, export_force);
      std::cout << "exported dataset to " << export_out << "\nmanifest digest: "
                << manifest.digest << '\n';
      return 0;
    }
    if (*compare_cmd) {
      CampaignConfig base = load_campaign_config(compare_config);
      std::vector<CampaignConfig> variants;
      for (const auto& spec : variant_specs) {
        CampaignConfig v = base;
        v.agents_enabled.clear();
        if (spec != "none") {
          std::size_t start = 0;
          while (start <= spec.size()) {
            std::size_t comma = spec.find(',', start);
            std::string word = spec.substr(
                start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!word.empty()) v.agents_enabled.insert(agent_from_string(word));
            if (comma == std::string::npos) break;
            start = comma + 1;
          }
        }
        variants.push_back(std::move(v));
      }
      ComparisonOutcome outcome = compare_configurations(variants, compare_dir);
      std::cout << outcome.artifacts.table_tsv;
      std::cout << "comparison artifacts written under " << compare_dir << "/comparison\n";
      return 0;
    }
    if (*metrics_cmd) {
      print_metrics(load_campaign_state(metrics_dir));
      return 0;
    }
    if (*analyze_cmd) {
      ThreatModel model = load_threat_model(analyze_model);
      auto records = replay_analyzer_report(
          analyze_report, analyzer_format_from_string(analyze_format));
      CheckMap custom;
      const CheckMap* checkmap = &default_checkmap();
      if (!analyze_checkmap.empty()) {
        custom = load_checkmap(analyze_checkmap);
        checkmap = &custom;
      }
      MapResult mapped =
          map_to_findings(records, model, *checkmap, analyze_total_files);
      nlohmann::json doc = findings_file_json(mapped.findings);
      nlohmann::json uncategorized = nlohmann::json::array();
      for (const auto& rec : mapped.uncategorized)
        uncategorized.push_back({{"check_id", rec.check_id},
                                 {"file", rec.file},
                                 {"line", rec.line},
                                 {"message", rec.message}});
      doc["uncategorized"] = uncategorized;
      doc["static_coverage"] = mapped.static_coverage;
      std::cout << canonical_dump(doc);
      std::cerr << records.size() << " record(s): " << mapped.findings.size()
                << " finding(s), " << mapped.uncategorized.size()
                << " uncategorized\n";
      return 0;
    }
    if (*triage_cmd) {
      triage_finding(triage_dir, triage_id, status_from_string(triage_status), triage_note);
      std::cout << "finding " << triage_id << " marked " << triage_status << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
