#include "rcmlab/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rcmlab/geometry.hpp"
#include "rcmlab/rng.hpp"

namespace rcmlab {
namespace {

using KeySet = std::set<std::string>;

const KeySet kTopKeys = {
    "seed",      "threads",     "out_dir",  "law",
    "env_sample", "walk",       "clock",    "heat_kernel",
    "green",     "ceff",        "llt",      "classical",
    "ergodic",   "truncation",  "homogenization", "clusters",
    "qfclt",     "report"};

const KeySet kLawKeys = {"d", "tail_c", "alpha", "rho", "uniform", "a_p"};

const std::map<std::string, KeySet> kBlockKeys = {
    {"env_sample",
     {"half_side", "env_seed", "n", "a", "write_binary", "write_csv"}},
    {"walk",
     {"n", "t_max", "walkers", "env_seed", "dump_trajectory", "clock_points"}},
    {"clock",
     {"n_ladder", "envs", "walkers", "t", "t_grid", "env_seed", "a", "K",
      "delta", "eps", "identity_n", "identity_walkers", "identity_box_margin",
      "identity_tol", "moment_envs", "moment_walkers", "moment_n", "sigma_v_sq",
      "do_trend", "do_identity", "do_gap", "do_moments", "gap_ladder",
      "gap_walkers"}},
    {"heat_kernel",
     {"box", "times", "tol", "env_seed", "cutoff", "mc_walkers", "ball_radius",
      "bounds", "t_scan", "budget", "write_binary", "write_csv"}},
    {"green", {"box", "tol", "env_seed", "shell_lo", "shell_hi", "write_csv"}},
    {"ceff", {"box", "tol", "envs", "env_seed"}},
    {"llt",
     {"n", "delta", "t_max", "times", "starts", "y_axis", "ball_radius",
      "walkers", "box_margin", "min_expected_hits", "band", "control",
      "control_band", "env_seed", "sigma_n", "sigma_walkers", "sigma_envs",
      "sigma_t", "deterministic", "kernel_tol"}},
    {"classical",
     {"n_ladder", "seeds", "beta", "t_grid", "mismatch_n", "trend_fraction"}},
    {"ergodic",
     {"n", "K", "a", "seeds", "threshold", "pass_fraction", "f", "g1", "g2"}},
    {"truncation",
     {"n", "t", "k_values", "a_values", "pilot_envs", "pilot_walkers", "envs",
      "walkers", "threshold", "K", "a", "env_seed"}},
    {"homogenization",
     {"n", "a", "K", "theta1", "b_n", "envs", "tol", "gamma_subsample",
      "lambda_max", "env_seed"}},
    {"clusters",
     {"a_p_fit", "fit_samples", "m_lo", "m_hi", "r2_min", "a_p_gamma",
      "gamma_samples", "b_n_grid", "thetas", "stability_band", "tol",
      "env_seed"}},
    {"qfclt",
     {"n", "t", "walkers", "seeds", "n_ladder", "control", "control_ks_max",
      "sigma_n", "sigma_walkers", "sigma_envs", "sigma_t", "env_seed",
      "trend_fraction"}},
    {"report", {"inputs"}},
};

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("config: " + msg);
}

void check_keys(const nlohmann::json& obj, const KeySet& allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      fail("unknown key \"" + it.key() + "\" in " + where);
  }
}

double num_of(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) fail("key \"" + key + "\" must be a number");
  return v.get<double>();
}

}  // namespace

TailLaw law_from_config(const LawConfig& law) {
  if (law.uniform > 0.0)
    fail("law_from_config called for a uniform (constant) law");
  return make_tail_law(law.d, law.tail_c, law.alpha, law.rho);
}

bool RunConfig::has_block(const std::string& name) const {
  return doc.contains(name);
}

nlohmann::json RunConfig::block(const std::string& name) const {
  if (!doc.contains(name)) return nlohmann::json::object();
  return doc.at(name);
}

std::string canonical_config_dump(const nlohmann::json& doc) {
  nlohmann::json trimmed = doc;  // nlohmann::json orders keys alphabetically
  trimmed.erase("threads");
  trimmed.erase("out_dir");
  return trimmed.dump();
}

std::string config_hash_of(const nlohmann::json& doc) {
  std::string dump = canonical_config_dump(doc);
  uint64_t h = 0x243f6a8885a308d3ULL;  // arbitrary fixed starting point
  for (unsigned char c : dump) h = hash_fold(h, c);
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return std::string(buf);
}

RunConfig parse_config_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail("top level must be a JSON object");
  check_keys(doc, kTopKeys, "the top level");
  for (const auto& name : kBlockKeys) {
    if (doc.contains(name.first)) {
      const auto& blk = doc.at(name.first);
      if (!blk.is_object()) fail("block \"" + name.first + "\" must be an object");
      check_keys(blk, name.second, "block \"" + name.first + "\"");
    }
  }
  if (!doc.contains("law")) fail("missing required block \"law\"");
  const auto& law = doc.at("law");
  if (!law.is_object()) fail("block \"law\" must be an object");
  check_keys(law, kLawKeys, "block \"law\"");
  if (!law.contains("d")) fail("missing required key \"d\" in block \"law\"");

  RunConfig cfg;
  cfg.doc = doc;
  cfg.law.d = int(num_of(law.at("d"), "law.d"));
  if (cfg.law.d < 1 || cfg.law.d > kMaxDim)
    fail("law.d must be between 1 and " + std::to_string(kMaxDim));
  if (law.contains("tail_c")) cfg.law.tail_c = num_of(law.at("tail_c"), "law.tail_c");
  if (law.contains("alpha")) cfg.law.alpha = num_of(law.at("alpha"), "law.alpha");
  if (law.contains("rho")) cfg.law.rho = num_of(law.at("rho"), "law.rho");
  if (law.contains("uniform"))
    cfg.law.uniform = num_of(law.at("uniform"), "law.uniform");
  if (law.contains("a_p")) cfg.law.a_p = num_of(law.at("a_p"), "law.a_p");

  if (doc.contains("seed")) {
    const auto& s = doc.at("seed");
    if (!s.is_number_integer() && !s.is_number_unsigned())
      fail("key \"seed\" must be an integer");
    cfg.seed = s.get<uint64_t>();
  }
  if (doc.contains("threads")) {
    const auto& t = doc.at("threads");
    if (!t.is_number_integer() && !t.is_number_unsigned())
      fail("key \"threads\" must be an integer");
    cfg.threads = t.get<int>();
  }
  if (doc.contains("out_dir")) {
    if (!doc.at("out_dir").is_string()) fail("key \"out_dir\" must be a string");
    cfg.out_dir = doc.at("out_dir").get<std::string>();
  }
  cfg.config_hash = config_hash_of(doc);
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file \"" + path + "\"");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    fail("cannot parse \"" + path + "\": " + e.what());
  }
  return parse_config_json(doc);
}

double require_num(const nlohmann::json& block, const std::string& key,
                   const std::string& block_name) {
  if (!block.contains(key))
    fail("missing required key \"" + key + "\" in block \"" + block_name +
         "\"");
  return num_of(block.at(key), key);
}

int64_t require_int(const nlohmann::json& block, const std::string& key,
                    const std::string& block_name) {
  double v = require_num(block, key, block_name);
  int64_t i = int64_t(v);
  if (double(i) != v) fail("key \"" + key + "\" must be an integer");
  return i;
}

double param_num(const nlohmann::json& block, const std::string& key,
                 double dflt) {
  if (!block.contains(key)) return dflt;
  return num_of(block.at(key), key);
}

int64_t param_int(const nlohmann::json& block, const std::string& key,
                  int64_t dflt) {
  if (!block.contains(key)) return dflt;
  double v = num_of(block.at(key), key);
  int64_t i = int64_t(v);
  if (double(i) != v) fail("key \"" + key + "\" must be an integer");
  return i;
}

bool param_flag(const nlohmann::json& block, const std::string& key,
                bool dflt) {
  if (!block.contains(key)) return dflt;
  if (!block.at(key).is_boolean()) fail("key \"" + key + "\" must be a boolean");
  return block.at(key).get<bool>();
}

std::string param_str(const nlohmann::json& block, const std::string& key,
                      const std::string& dflt) {
  if (!block.contains(key)) return dflt;
  if (!block.at(key).is_string()) fail("key \"" + key + "\" must be a string");
  return block.at(key).get<std::string>();
}

std::vector<double> param_num_list(const nlohmann::json& block,
                                   const std::string& key,
                                   const std::vector<double>& dflt) {
  if (!block.contains(key)) return dflt;
  const auto& v = block.at(key);
  if (!v.is_array()) fail("key \"" + key + "\" must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(num_of(e, key));
  return out;
}

std::vector<int64_t> param_int_list(const nlohmann::json& block,
                                    const std::string& key,
                                    const std::vector<int64_t>& dflt) {
  if (!block.contains(key)) return dflt;
  const auto& v = block.at(key);
  if (!v.is_array()) fail("key \"" + key + "\" must be an array of integers");
  std::vector<int64_t> out;
  for (const auto& e : v) {
    double x = num_of(e, key);
    int64_t i = int64_t(x);
    if (double(i) != x) fail("key \"" + key + "\" must hold integers");
    out.push_back(i);
  }
  return out;
}

std::vector<std::string> param_str_list(const nlohmann::json& block,
                                        const std::string& key,
                                        const std::vector<std::string>& dflt) {
  if (!block.contains(key)) return dflt;
  const auto& v = block.at(key);
  if (!v.is_array()) fail("key \"" + key + "\" must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) fail("key \"" + key + "\" must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

LawConfig parse_law_string(const std::string& text) {
  LawConfig law;
  bool have_d = false;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos)
      fail("law string entries must look like key=value, got \"" + item +
           "\"");
    std::string key = item.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      fail("law string value for \"" + key + "\" is not a number");
    }
    if (key == "d") {
      law.d = int(value);
      have_d = true;
    } else if (key == "tail_c") {
      law.tail_c = value;
    } else if (key == "alpha") {
      law.alpha = value;
    } else if (key == "rho") {
      law.rho = value;
    } else if (key == "uniform") {
      law.uniform = value;
    } else if (key == "a_p") {
      law.a_p = value;
    } else {
      fail("unknown law string key \"" + key + "\"");
    }
  }
  if (!have_d) fail("law string must set d");
  return law;
}

}  // namespace rcmlab
