#include "rcmlab/report.hpp"

#include <cinttypes>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace rcmlab {

void ExperimentReport::add(const std::string& key, double value,
                           double std_error, int64_t n) {
  StatEntry e;
  e.key = key;
  e.value = value;
  e.std_error = std_error;
  e.n = n;
  stats.push_back(std::move(e));
}

void ExperimentReport::add_check(const std::string& key, double value, bool ok,
                                 const std::string& note, double std_error,
                                 int64_t n) {
  StatEntry e;
  e.key = key;
  e.value = value;
  e.std_error = std_error;
  e.n = n;
  e.checked = true;
  e.pass = ok;
  e.note = note;
  stats.push_back(std::move(e));
}

const StatEntry* ExperimentReport::find(const std::string& key) const {
  for (const auto& e : stats)
    if (e.key == key) return &e;
  return nullptr;
}

bool ExperimentReport::passed() const {
  for (const auto& e : stats)
    if (e.checked && !e.pass) return false;
  return true;
}

nlohmann::json report_to_json(const ExperimentReport& rep) {
  nlohmann::json stats = nlohmann::json::array();
  for (const auto& e : rep.stats) {
    nlohmann::json s;
    s["key"] = e.key;
    s["value"] = e.value;
    if (e.std_error >= 0.0) s["stderr"] = e.std_error;
    s["n"] = e.n;
    if (e.checked) {
      s["pass"] = e.pass;
      s["note"] = e.note;
    }
    stats.push_back(std::move(s));
  }
  nlohmann::json doc;
  doc["name"] = rep.experiment;
  doc["seed"] = rep.seed;
  doc["config_hash"] = rep.config_hash;
  doc["params"] = rep.params;
  doc["stats"] = std::move(stats);
  doc["pass"] = rep.passed();
  return doc;
}

ExperimentReport report_from_json(const nlohmann::json& doc) {
  ExperimentReport rep;
  rep.experiment = doc.at("name").get<std::string>();
  rep.seed = doc.at("seed").get<uint64_t>();
  rep.config_hash = doc.value("config_hash", std::string());
  rep.params = doc.value("params", nlohmann::json::object());
  for (const auto& s : doc.at("stats")) {
    StatEntry e;
    e.key = s.at("key").get<std::string>();
    e.value = s.at("value").get<double>();
    e.std_error = s.value("stderr", -1.0);
    e.n = s.value("n", int64_t{0});
    if (s.contains("pass")) {
      e.checked = true;
      e.pass = s.at("pass").get<bool>();
      e.note = s.value("note", std::string());
    }
    rep.stats.push_back(std::move(e));
  }
  return rep;
}

void print_report(const ExperimentReport& rep, std::ostream& os) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "== %s  (seed %" PRIu64 ", config %s)",
                rep.experiment.c_str(), rep.seed, rep.config_hash.c_str());
  os << buf << "\n";
  for (const auto& e : rep.stats) {
    std::snprintf(buf, sizeof buf, "  %-34s %14.8g", e.key.c_str(), e.value);
    os << buf;
    if (e.std_error >= 0.0) {
      std::snprintf(buf, sizeof buf, " +- %-10.4g", e.std_error);
      os << buf;
    }
    if (e.n > 0) {
      std::snprintf(buf, sizeof buf, "  n=%" PRId64, e.n);
      os << buf;
    }
    if (e.checked) os << (e.pass ? "  [pass]" : "  [FAIL]") << "  " << e.note;
    os << "\n";
  }
  std::snprintf(buf, sizeof buf, "  -- %s, wall %.2f s",
                rep.passed() ? "PASS" : "FAIL", rep.wall_seconds);
  os << buf << "\n";
}

nlohmann::json aggregate_reports(const std::vector<ExperimentReport>& reps) {
  if (reps.empty())
    throw std::runtime_error("aggregate_reports: no reports given");
  nlohmann::json entries = nlohmann::json::array();
  bool all_pass = true;
  for (const auto& rep : reps) {
    if (rep.stats.empty())
      throw std::runtime_error("aggregate_reports: report \"" + rep.experiment +
                               "\" has no statistics");
    nlohmann::json e;
    e["name"] = rep.experiment;
    e["seed"] = rep.seed;
    e["config_hash"] = rep.config_hash;
    e["pass"] = rep.passed();
    int checked = 0, failed = 0;
    for (const auto& s : rep.stats) {
      if (s.checked) {
        ++checked;
        if (!s.pass) {
          ++failed;
          e["failing"].push_back(s.key);
        }
      }
    }
    e["checks"] = checked;
    e["failures"] = failed;
    all_pass = all_pass && rep.passed();
    entries.push_back(std::move(e));
  }
  nlohmann::json doc;
  doc["reports"] = std::move(entries);
  doc["pass"] = all_pass;
  return doc;
}

void print_aggregate(const nlohmann::json& aggregate, std::ostream& os) {
  os << "experiment                      checks  failures  status\n";
  for (const auto& e : aggregate.at("reports")) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "%-30s %7d %9d  %s",
                  e.at("name").get<std::string>().c_str(),
                  e.at("checks").get<int>(), e.at("failures").get<int>(),
                  e.at("pass").get<bool>() ? "pass" : "FAIL");
    os << buf << "\n";
    if (e.contains("failing"))
      for (const auto& k : e.at("failing"))
        os << "    failing: " << k.get<std::string>() << "\n";
  }
  os << "overall: " << (aggregate.at("pass").get<bool>() ? "PASS" : "FAIL")
     << "\n";
}

}  // namespace rcmlab
