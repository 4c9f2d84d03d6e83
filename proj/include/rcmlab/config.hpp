#pragma once
// Configuration: a single JSON document with strict key validation (unknown
// keys are rejected by name), a canonical hash embedded into every output
// file, and typed parameter lookups.  Physics-bearing parameters (law,
// dimension, scales) have no silent defaults; tolerances and thresholds do,
// and their effective values are echoed into the reports.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "rcmlab/tail_law.hpp"

namespace rcmlab {

// Conductance-law parameters as they appear under the "law" config block.
struct LawConfig {
  int d = 0;             // required
  double tail_c = -1.0;  // negative: use the default 1/(2d)
  double alpha = 1.0;
  double rho = 0.0;
  double uniform = 0.0;  // > 0: constant edge conductance, no randomness
  double a_p = 0.0;      // optional percolation threshold rider (> 0 to use)
};

TailLaw law_from_config(const LawConfig& law);  // throws in uniform mode

struct RunConfig {
  nlohmann::json doc;  // validated document (threads/out_dir excluded in hash)
  LawConfig law;
  uint64_t seed = 1;
  int threads = 0;  // 0: library default
  std::string out_dir = "out";
  std::string config_hash;  // 16 hex digits of the canonical dump

  bool has_block(const std::string& name) const;
  nlohmann::json block(const std::string& name) const;  // object ({} if absent)
};

// Parse + validate.  Throws std::runtime_error naming the offending key on
// unknown keys, wrong types, or a missing/invalid law block.
RunConfig parse_config_json(const nlohmann::json& doc);
RunConfig parse_config_file(const std::string& path);

// Canonical serialization (sorted keys, no whitespace) of the document with
// the non-physical keys ("threads", "out_dir") removed, and its 64-bit hash.
std::string canonical_config_dump(const nlohmann::json& doc);
std::string config_hash_of(const nlohmann::json& doc);

// Typed lookups into a config block.  The require_* forms throw a
// runtime_error naming the key and block when absent; the param_* forms
// return the default.  All throw on a present-but-wrong-type value.
double require_num(const nlohmann::json& block, const std::string& key,
                   const std::string& block_name);
int64_t require_int(const nlohmann::json& block, const std::string& key,
                    const std::string& block_name);
double param_num(const nlohmann::json& block, const std::string& key,
                 double dflt);
int64_t param_int(const nlohmann::json& block, const std::string& key,
                  int64_t dflt);
bool param_flag(const nlohmann::json& block, const std::string& key, bool dflt);
std::string param_str(const nlohmann::json& block, const std::string& key,
                      const std::string& dflt);
std::vector<double> param_num_list(const nlohmann::json& block,
                                   const std::string& key,
                                   const std::vector<double>& dflt);
std::vector<int64_t> param_int_list(const nlohmann::json& block,
                                    const std::string& key,
                                    const std::vector<int64_t>& dflt);
std::vector<std::string> param_str_list(const nlohmann::json& block,
                                        const std::string& key,
                                        const std::vector<std::string>& dflt);

// Parse "d=3,rho=0,uniform=1"-style law strings (CLI --law flag).
LawConfig parse_law_string(const std::string& text);

}  // namespace rcmlab
