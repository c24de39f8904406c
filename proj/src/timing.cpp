#include "fwsec/timing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>

namespace fwsec {

namespace {

// Splits a log into lines without copying. Handles both \n and \r\n.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

// Extracts the value of `key=` from a line: the run of non-space characters
// following the key. Returns nullopt when the key is absent.
std::optional<std::string_view> field(std::string_view line, std::string_view key) {
  std::string needle = std::string(key) + "=";
  std::size_t pos = line.find(needle);
  if (pos == std::string_view::npos) return std::nullopt;
  // Require the key to start a token.
  if (pos > 0 && line[pos - 1] != ' ' && line[pos - 1] != '\t') return std::nullopt;
  std::size_t vstart = pos + needle.size();
  std::size_t vend = line.find_first_of(" \t", vstart);
  if (vend == std::string_view::npos) vend = line.size();
  return line.substr(vstart, vend - vstart);
}

std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string buf(s);
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) return std::nullopt;
  if (!std::isfinite(v) || v < 0.0) return std::nullopt;
  return v;
}

}  // namespace

TimingParse parse_timing_log(std::string_view log) {
  TimingParse out;
  std::map<std::string, std::uint64_t> next_tick;
  std::map<std::string, double> last_deadline;

  for (std::string_view line : split_lines(log)) {
    bool is_tick = line.substr(0, 5) == "TICK ";
    bool is_miss = line.substr(0, 15) == "MISSED DEADLINE";
    if (!is_tick && !is_miss) continue;

    auto task = field(line, "task");
    if (!task || task->empty()) {
      ++out.warnings;
      continue;
    }
    auto exec_raw = field(line, "exec_ms");
    auto deadline_raw = field(line, "deadline_ms");

    TimingSample sample;
    sample.task = std::string(*task);
    sample.tick = next_tick[sample.task]++;

    if (is_tick) {
      if (!exec_raw || !deadline_raw) {
        ++out.warnings;
        continue;
      }
      auto exec = parse_real(*exec_raw);
      auto deadline = parse_real(*deadline_raw);
      if (!exec || !deadline || *deadline <= 0.0) {
        ++out.warnings;
        continue;
      }
      sample.exec_ms = *exec;
      sample.deadline_ms = *deadline;
      sample.missed = sample.exec_ms > sample.deadline_ms;
    } else {
      sample.missed = true;
      std::optional<double> deadline;
      if (deadline_raw) {
        deadline = parse_real(*deadline_raw);
        if (!deadline) {
          ++out.warnings;
          continue;
        }
      } else if (auto it = last_deadline.find(sample.task); it != last_deadline.end()) {
        deadline = it->second;
      }
      sample.deadline_ms = deadline.value_or(1.0);
      if (exec_raw) {
        auto exec = parse_real(*exec_raw);
        if (!exec) {
          ++out.warnings;
          continue;
        }
        sample.exec_ms = *exec;
      } else {
        // No measured value: impute at the deadline, flag it.
        sample.exec_ms = sample.deadline_ms;
        sample.imputed = true;
      }
    }
    last_deadline[sample.task] = sample.deadline_ms;
    out.samples.push_back(std::move(sample));
  }
  return out;
}

TimingReport compute_report(const std::vector<TimingSample>& samples) {
  struct Acc {
    std::uint64_t n = 0;
    double max = 0.0;
    double mean = 0.0;
    double m2 = 0.0;  // Welford sum of squared deviations
    std::uint64_t misses = 0;
  };
  std::map<std::string, Acc> per_task;
  for (const auto& s : samples) {
    Acc& a = per_task[s.task];
    ++a.n;
    a.max = std::max(a.max, s.exec_ms);
    double delta = s.exec_ms - a.mean;
    a.mean += delta / double(a.n);
    a.m2 += delta * (s.exec_ms - a.mean);
    if (s.missed) ++a.misses;
  }

  TimingReport report;
  for (const auto& [task, a] : per_task) {
    TaskTiming t;
    t.task = task;
    t.sample_count = a.n;
    t.wcet_ms = a.max;
    t.mean_exec_ms = a.mean;
    t.jitter_us = a.n > 0 ? std::sqrt(a.m2 / double(a.n)) * 1000.0 : 0.0;
    t.deadline_miss_count = a.misses;
    report.tasks.push_back(std::move(t));
    report.total_samples += a.n;
  }
  return report;
}

const TaskTiming* TimingReport::find(std::string_view task) const {
  for (const auto& t : tasks)
    if (t.task == task) return &t;
  return nullptr;
}

std::uint64_t TimingReport::total_deadline_misses() const {
  std::uint64_t n = 0;
  for (const auto& t : tasks) n += t.deadline_miss_count;
  return n;
}

double TimingReport::max_wcet_ms() const {
  double v = 0.0;
  for (const auto& t : tasks) v = std::max(v, t.wcet_ms);
  return v;
}

double TimingReport::max_jitter_us() const {
  double v = 0.0;
  for (const auto& t : tasks) v = std::max(v, t.jitter_us);
  return v;
}

}  // namespace fwsec
