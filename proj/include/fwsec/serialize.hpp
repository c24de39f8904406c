#pragma once

#include <string>

#include "fwsec/agents.hpp"
#include "fwsec/campaign.hpp"
#include "fwsec/domain.hpp"
#include "fwsec/fuzz.hpp"
#include "json.hpp"

namespace fwsec {

/// JSON views of the persisted artifacts. Keys are snake_case, objects are
/// emitted with sorted keys (nlohmann's default map ordering), so canonical
/// dumps are stable and round-trip byte-identical.

nlohmann::json to_json(const Finding& f);
Finding finding_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TimingReport& r);
TimingReport timing_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricsSnapshot& s);
MetricsSnapshot metrics_snapshot_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PatchRef& p);
PatchRef patch_ref_from_json(const nlohmann::json& j);

nlohmann::json to_json(const IterationRecord& r);
IterationRecord iteration_record_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AgentVerdict& v);
AgentVerdict agent_verdict_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PatchProposal& p);
PatchProposal patch_proposal_from_json(const nlohmann::json& j);

/// The documented findings file: {"schema_version":1, "findings":[...]}.
nlohmann::json findings_file_json(const std::vector<Finding>& findings);
/// Throws std::runtime_error when the document does not match the schema.
void validate_findings_json(const nlohmann::json& doc);

/// Deterministic dump: 2-space indent, sorted keys, trailing newline.
std::string canonical_dump(const nlohmann::json& j);

}  // namespace fwsec
