#include <set>

#include "doctest.h"
#include "fwsec/domain.hpp"
#include "fwsec/fuzz.hpp"
#include "support.hpp"

using namespace fwsec;
using fwsec_test::TempDir;
using fwsec_test::read_text;
using fwsec_test::write_text;

namespace {

std::string default_rules_path() {
  return std::string(FWSEC_DEFAULT_DATA_DIR) + "/threat_model.default";
}

Finding synthetic_finding(const std::string& rule_id, const std::string& evidence) {
  Finding f;
  f.id = finding_id(rule_id, evidence);
  f.cwe = {120, "Classic Buffer Overflow", CweCategory::memory};
  f.evidence = evidence;
  return f;
}

std::set<std::string> ids(const std::vector<Finding>& fs) {
  std::set<std::string> out;
  for (const auto& f : fs) out.insert(f.id);
  return out;
}

}  // namespace

TEST_SUITE("domain") {

TEST_CASE("bundled rules file loads the three stock threats") {
  ThreatModel model = load_threat_model(default_rules_path());
  REQUIRE(model.threats.size() == 3);
  CHECK(model.has_cwe(120));
  CHECK(model.has_cwe(362));
  CHECK(model.has_cwe(400));
  CHECK(model.find_threat(120)->cwe.category == CweCategory::memory);
  CHECK(model.find_threat(362)->cwe.category == CweCategory::concurrency);
  CHECK(model.find_threat(400)->cwe.category == CweCategory::availability);
  CHECK(!model.rules.empty());
}

TEST_CASE("zero rules is an empty threat model") {
  TempDir tmp;
  write_text(tmp.path() / "rules", "[threats]\n120 | Overflow | memory | d | m\n");
  CHECK_THROWS_WITH_AS(load_threat_model((tmp.path() / "rules").string()),
                       doctest::Contains("empty threat model"), std::runtime_error);
}

TEST_CASE("extending the bundled file by one threat loads four") {
  TempDir tmp;
  std::string extended = read_text(default_rules_path());
  extended +=
      "\n[threats]\n416 | Use After Free | memory | freed memory reused | lifetime "
      "audits\n[rules]\nan-uaf | 416 | analyzer-message | high | true | "
      "(?i)use.after.free\n";
  write_text(tmp.path() / "rules", extended);
  ThreatModel model = load_threat_model((tmp.path() / "rules").string());
  CHECK(model.threats.size() == 4);
  CHECK(model.has_cwe(416));
}

TEST_CASE("rule referencing an unknown CWE names the entry") {
  TempDir tmp;
  write_text(tmp.path() / "rules",
             "[threats]\n120 | Overflow | memory | d | m\n"
             "[rules]\nbad-rule | 999 | log-pattern | high | true | x\n");
  CHECK_THROWS_WITH_AS(load_threat_model((tmp.path() / "rules").string()),
                       doctest::Contains("bad-rule"), std::runtime_error);
}

TEST_CASE("duplicate rule ids are rejected") {
  TempDir tmp;
  write_text(tmp.path() / "rules",
             "[threats]\n120 | Overflow | memory | d | m\n"
             "[rules]\nr1 | 120 | log-pattern | high | true | x\n"
             "r1 | 120 | log-pattern | high | true | y\n");
  CHECK_THROWS_WITH_AS(load_threat_model((tmp.path() / "rules").string()),
                       doctest::Contains("duplicate rule id"), std::runtime_error);
}

TEST_CASE("disabled rules are retained but flagged") {
  TempDir tmp;
  write_text(tmp.path() / "rules",
             "[threats]\n120 | Overflow | memory | d | m\n"
             "[rules]\nr1 | 120 | log-pattern | high | false | overflow\n"
             "r2 | 120 | log-pattern | high | true | smash\n");
  ThreatModel model = load_threat_model((tmp.path() / "rules").string());
  REQUIRE(model.rules.size() == 2);
  CHECK_FALSE(model.rules[0].enabled);
  CHECK(model.rules[1].enabled);
  // Disabled rules never classify.
  CHECK_FALSE(classify_finding("BUFFER OVERFLOW here", FindingSource::fuzz, model)
                  .has_value());
}

TEST_CASE("fixed stock categories are enforced") {
  TempDir tmp;
  write_text(tmp.path() / "rules",
             "[threats]\n120 | Overflow | availability | d | m\n"
             "[rules]\nr1 | 120 | log-pattern | high | true | x\n");
  CHECK_THROWS_WITH_AS(load_threat_model((tmp.path() / "rules").string()),
                       doctest::Contains("category"), std::runtime_error);
}

TEST_CASE("classify_finding: first matching enabled rule wins") {
  ThreatModel model = load_threat_model(default_rules_path());
  auto finding = classify_finding("BUFFER OVERFLOW in msg_parse", FindingSource::fuzz, model);
  REQUIRE(finding.has_value());
  CHECK(finding->cwe.id == 120);
  CHECK(finding->source == FindingSource::fuzz);
  CHECK(finding->severity == Severity::critical);  // per-CWE default
  CHECK(finding->status == FindingStatus::open);
}

TEST_CASE("classify_finding: no match is a valid outcome") {
  ThreatModel model = load_threat_model(default_rules_path());
  CHECK_FALSE(classify_finding("all tests passed", FindingSource::fuzz, model).has_value());
}

TEST_CASE("classify_finding is deterministic and pure") {
  ThreatModel model = load_threat_model(default_rules_path());
  auto a = classify_finding("HEAP OVERFLOW at 0x2000", FindingSource::fuzz, model);
  auto b = classify_finding("HEAP OVERFLOW at 0x2000", FindingSource::fuzz, model);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK(a->id == b->id);
  CHECK(a->evidence == b->evidence);
  CHECK(a->cwe.id == b->cwe.id);
}

TEST_CASE("analyzer-message rules apply only to static-analysis evidence") {
  ThreatModel model = load_threat_model(default_rules_path());
  std::string evidence = "bufferAccessOutOfBounds detected by tool";
  auto as_static = classify_finding(evidence, FindingSource::static_analysis, model);
  REQUIRE(as_static.has_value());
  CHECK(as_static->cwe.id == 120);
}

TEST_CASE("finding id normalizes whitespace and truncates at 512 bytes") {
  CHECK(finding_id("r", "a  b\t c\n") == finding_id("r", "a b c"));
  std::string long_a(600, 'a');
  std::string long_b = long_a + "tail-difference";
  CHECK(finding_id("r", long_a) == finding_id("r", long_b));
  CHECK(finding_id("r", "x") != finding_id("q", "x"));
}

TEST_CASE("diff_findings set algebra") {
  Finding a = synthetic_finding("r", "A");
  Finding b = synthetic_finding("r", "B");
  Finding c = synthetic_finding("r", "C");
  Finding x = synthetic_finding("r", "X");

  auto diff = diff_findings({a, b, c}, {b});
  CHECK(ids(diff.fixed) == ids({a, c}));
  CHECK(diff.added.empty());
  CHECK(ids(diff.persisting) == ids({b}));
  CHECK(diff.fixed.size() + diff.persisting.size() == 3);

  auto diff2 = diff_findings({}, {x});
  CHECK(diff2.fixed.empty());
  CHECK(ids(diff2.added) == ids({x}));
  CHECK(diff2.persisting.empty());
}

TEST_CASE("identical rule+evidence re-detections persist under one id") {
  Finding original = synthetic_finding("log-overflow", "OVERFLOW len=63");
  Finding re_detected = synthetic_finding("log-overflow", "OVERFLOW len=63");
  auto diff = diff_findings({original}, {re_detected});
  CHECK(diff.persisting.size() == 1);
  CHECK(diff.fixed.empty());
  CHECK(diff.added.empty());
}

TEST_CASE("diff partitions are disjoint and cover the union") {
  SplitMix64 rng(7);
  for (int round = 0; round < 50; ++round) {
    std::vector<Finding> prev, cur;
    for (int i = 0; i < 12; ++i) {
      Finding f = synthetic_finding("r", "evidence-" + std::to_string(rng.bounded(10)));
      if (rng.bounded(2)) prev.push_back(f);
      if (rng.bounded(2)) cur.push_back(f);
    }
    auto diff = diff_findings(prev, cur);
    std::set<std::string> fixed = ids(diff.fixed), added = ids(diff.added),
                          persisting = ids(diff.persisting);
    for (const auto& id : fixed) CHECK(persisting.count(id) == 0);
    for (const auto& id : added) CHECK(persisting.count(id) == 0);
    for (const auto& id : added) CHECK(fixed.count(id) == 0);
    std::set<std::string> all = ids(prev);
    for (const auto& id : ids(cur)) all.insert(id);
    std::set<std::string> together = fixed;
    together.insert(added.begin(), added.end());
    together.insert(persisting.begin(), persisting.end());
    CHECK(together == all);
  }
}

TEST_CASE("status transitions: only the allowed edges") {
  using S = FindingStatus;
  CHECK(status_transition_allowed(S::open, S::fixed));
  CHECK(status_transition_allowed(S::open, S::accepted_risk));
  CHECK(status_transition_allowed(S::fixed, S::regressed));
  CHECK(status_transition_allowed(S::regressed, S::fixed));

  const S all[] = {S::open, S::fixed, S::regressed, S::accepted_risk};
  int allowed = 0;
  for (S from : all)
    for (S to : all)
      if (status_transition_allowed(from, to)) ++allowed;
  CHECK(allowed == 4);  // exactly the four edges above

  SplitMix64 rng(11);
  for (int round = 0; round < 200; ++round) {
    Finding f = synthetic_finding("r", "e");
    f.status = all[rng.bounded(4)];
    S to = all[rng.bounded(4)];
    if (status_transition_allowed(f.status, to)) {
      transition_status(f, to);
      CHECK(f.status == to);
    } else {
      CHECK_THROWS_AS(transition_status(f, to), std::logic_error);
    }
  }
}

TEST_CASE("evidence is capped at 4 KiB") {
  ThreatModel model = load_threat_model(default_rules_path());
  std::string huge = "OVERFLOW " + std::string(10000, 'x');
  auto finding = classify_finding(huge, FindingSource::fuzz, model);
  REQUIRE(finding.has_value());
  CHECK(finding->evidence.size() == 4096);
}

}  // TEST_SUITE
