#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fwsec/domain.hpp"

namespace fwsec {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line, std::size_t expected,
                                      const std::string& where) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t bar = line.find('|', start);
    if (bar == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, bar - start)));
    start = bar + 1;
    // The last declared field (pattern / mitigation) may itself contain '|',
    // so stop splitting once the expected count is reached.
    if (fields.size() == expected - 1) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
  }
  if (fields.size() != expected)
    throw std::runtime_error(where + ": expected " + std::to_string(expected) +
                             " '|'-separated fields, got " + std::to_string(fields.size()) +
                             " in: " + line);
  return fields;
}

int parse_cwe_id(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    int id = std::stoi(s, &used);
    if (used != s.size() || id <= 0) throw std::invalid_argument("");
    return id;
  } catch (...) {
    throw std::runtime_error(where + ": bad CWE id '" + s + "'");
  }
}

bool parse_bool(const std::string& s, const std::string& where) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::runtime_error(where + ": expected true/false, got '" + s + "'");
}

// The three stock threats carry fixed categories; a rules file that
// re-binds them is rejected.
void check_fixed_category(const CweClass& cwe, const std::string& where) {
  auto expect = [&](CweCategory want) {
    if (cwe.category != want)
      throw std::runtime_error(where + ": CWE-" + std::to_string(cwe.id) +
                               " must have category '" + to_string(want) + "'");
  };
  if (cwe.id == 120) expect(CweCategory::memory);
  if (cwe.id == 362) expect(CweCategory::concurrency);
  if (cwe.id == 400) expect(CweCategory::availability);
}

void validate_rule(const SecurityRule& rule, const ThreatModel& model,
                   const std::string& where) {
  if (!model.has_cwe(rule.cwe))
    throw std::runtime_error(where + ": rule '" + rule.id + "' references CWE-" +
                             std::to_string(rule.cwe) + " with no matching threat entry");
  switch (rule.detector) {
    case DetectorKind::log_pattern:
    case DetectorKind::analyzer_message:
      if (rule.pattern.empty())
        throw std::runtime_error(where + ": rule '" + rule.id + "' needs a pattern");
      try {
        std::string pat = rule.pattern;
        auto flags = std::regex::ECMAScript;
        if (pat.rfind("(?i)", 0) == 0) {
          pat = pat.substr(4);
          flags |= std::regex::icase;
        }
        std::regex probe(pat, flags);
      } catch (const std::regex_error& e) {
        throw std::runtime_error(where + ": rule '" + rule.id + "' has a bad pattern: " +
                                 e.what());
      }
      break;
    case DetectorKind::timing_threshold:
      rule.timing_threshold();  // throws with the rule named
      break;
    case DetectorKind::freeze:
      break;  // pattern unused
  }
}

}  // namespace

ThreatModel load_threat_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rules file: " + path);

  ThreatModel model;
  std::set<std::string> rule_ids;
  std::string section;
  std::string line;
  int lineno = 0;

  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::string where = path + ":" + std::to_string(lineno);

    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      if (section != "threats" && section != "rules")
        throw std::runtime_error(where + ": unknown section [" + section + "]");
      continue;
    }
    if (t.rfind("schema-version", 0) == 0) {
      std::size_t eq = t.find('=');
      if (eq == std::string::npos || trim(t.substr(eq + 1)) != "1")
        throw std::runtime_error(where + ": unsupported schema-version");
      continue;
    }
    if (section.empty())
      throw std::runtime_error(where + ": entry outside of [threats]/[rules]");

    if (section == "threats") {
      auto f = split_fields(t, 5, where);
      Threat threat;
      threat.cwe.id = parse_cwe_id(f[0], where);
      threat.cwe.name = f[1];
      threat.cwe.category = cwe_category_from_string(f[2]);
      threat.description = f[3];
      threat.mitigation = f[4];
      if (threat.cwe.name.empty())
        throw std::runtime_error(where + ": threat CWE-" + f[0] + " needs a name");
      check_fixed_category(threat.cwe, where);
      if (model.has_cwe(threat.cwe.id))
        throw std::runtime_error(where + ": duplicate threat CWE-" + f[0]);
      model.threats.push_back(std::move(threat));
    } else {
      auto f = split_fields(t, 6, where);
      SecurityRule rule;
      rule.id = f[0];
      rule.cwe = parse_cwe_id(f[1], where);
      rule.detector = detector_from_string(f[2]);
      rule.severity = f[3] == "default" ? default_severity(rule.cwe)
                                        : severity_from_string(f[3]);
      rule.enabled = parse_bool(f[4], where);
      rule.pattern = f[5];
      if (rule.id.empty()) throw std::runtime_error(where + ": rule needs an id");
      if (!rule_ids.insert(rule.id).second)
        throw std::runtime_error(where + ": duplicate rule id '" + rule.id + "'");
      validate_rule(rule, model, where);
      model.rules.push_back(std::move(rule));
    }
  }

  if (model.threats.empty() || model.rules.empty())
    throw std::runtime_error(path + ": empty threat model");
  return model;
}

}  // namespace fwsec
