#include "fwsec/scenario.hpp"

#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace fwsec {

namespace {

std::int64_t parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::runtime_error(where + ": bad integer '" + s + "'");
  }
}

double parse_real(const std::string& s, const std::string& where) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw std::runtime_error(where + ": bad number '" + s + "'");
  return v;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  Scenario scenario;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string where = "scenario line " + std::to_string(lineno);

    std::istringstream ls(line);
    std::string word;
    ls >> word;
    ScenarioDirective d{};
    if (word == "echo") {
      d.kind = ScenarioDirective::Kind::echo;
    } else if (word == "print") {
      d.kind = ScenarioDirective::Kind::print;
      std::string rest;
      std::getline(ls, rest);
      if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
      d.text = rest;
    } else if (word == "tick") {
      d.kind = ScenarioDirective::Kind::tick;
      std::string task, exec, deadline;
      ls >> task >> exec;
      if (task.empty() || exec.empty())
        throw std::runtime_error(where + ": tick needs <task> <exec_ms>");
      d.task = task;
      d.exec_ms = parse_real(exec, where);
      if (ls >> deadline) d.deadline_ms = parse_real(deadline, where);
      if (d.deadline_ms <= 0.0) throw std::runtime_error(where + ": deadline must be > 0");
    } else if (word == "hang-after") {
      d.kind = ScenarioDirective::Kind::hang_after;
      std::string n;
      if (!(ls >> n)) throw std::runtime_error(where + ": hang-after needs <n>");
      d.arg0 = parse_int(n, where);
      if (d.arg0 < 0) throw std::runtime_error(where + ": hang-after needs n >= 0");
    } else if (word == "crash") {
      d.kind = ScenarioDirective::Kind::crash;
      std::string code;
      if (!(ls >> code)) throw std::runtime_error(where + ": crash needs <code>");
      d.arg0 = parse_int(code, where);
    } else if (word == "crash-if-longer") {
      d.kind = ScenarioDirective::Kind::crash_if_longer;
      std::string n, code;
      if (!(ls >> n >> code))
        throw std::runtime_error(where + ": crash-if-longer needs <n> <code>");
      d.arg0 = parse_int(n, where);
      d.arg1 = parse_int(code, where);
    } else if (word == "overflow-if-longer") {
      d.kind = ScenarioDirective::Kind::overflow_if_longer;
      std::string n;
      if (!(ls >> n)) throw std::runtime_error(where + ": overflow-if-longer needs <n>");
      d.arg0 = parse_int(n, where);
      if (d.arg0 < 0) throw std::runtime_error(where + ": length bound must be >= 0");
    } else if (word == "ignore-signals") {
      d.kind = ScenarioDirective::Kind::ignore_signals;
    } else if (word == "sleep") {
      d.kind = ScenarioDirective::Kind::sleep_ms;
      std::string ms;
      if (!(ls >> ms)) throw std::runtime_error(where + ": sleep needs <ms>");
      d.arg0 = parse_int(ms, where);
      if (d.arg0 < 0) throw std::runtime_error(where + ": sleep needs ms >= 0");
    } else {
      throw std::runtime_error(where + ": unknown directive '" + word + "'");
    }
    scenario.directives.push_back(std::move(d));
  }
  return scenario;
}

}  // namespace fwsec
