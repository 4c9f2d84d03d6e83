#pragma once
// Experiment report plumbing: every statistic carries a sample size and an
// uncertainty, and the overall pass flag is a pure function of the checked
// entries.  Reports serialize to the JSON summary schema
//   {name, seed, config_hash, params, stats:[{key, value, stderr, n, ...}], pass}.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace rcmlab {

struct StatEntry {
  std::string key;
  double value = 0.0;
  double std_error = -1.0;  // negative: no meaningful error bar (deterministic)
  int64_t n = 0;            // sample size; 0 for deterministic quantities
  bool checked = false;     // whether this entry participates in pass/fail
  bool pass = true;
  std::string note;         // human-readable threshold description
};

struct ExperimentReport {
  std::string experiment;
  uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json params = nlohmann::json::object();  // echoed effective params
  std::vector<StatEntry> stats;
  double wall_seconds = 0.0;  // printed to stdout only, never serialized

  void add(const std::string& key, double value, double std_error = -1.0,
           int64_t n = 0);
  void add_check(const std::string& key, double value, bool ok,
                 const std::string& note, double std_error = -1.0,
                 int64_t n = 0);
  const StatEntry* find(const std::string& key) const;
  bool passed() const;  // conjunction over checked entries (true if none)
};

nlohmann::json report_to_json(const ExperimentReport& rep);
ExperimentReport report_from_json(const nlohmann::json& doc);

// Human-readable table (one line per statistic, pass/fail flags, wall time).
void print_report(const ExperimentReport& rep, std::ostream& os);

// Aggregate summary over >= 1 reports; overall pass is the conjunction.
// Throws std::runtime_error on an empty list or a report with no statistics.
nlohmann::json aggregate_reports(const std::vector<ExperimentReport>& reps);
void print_aggregate(const nlohmann::json& aggregate, std::ostream& os);

}  // namespace rcmlab
