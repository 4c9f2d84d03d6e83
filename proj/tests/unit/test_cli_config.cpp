#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "rcmlab/config.hpp"
#include "rcmlab/experiments.hpp"
#include "rcmlab/io.hpp"
#include "rcmlab/parallel.hpp"
#include "rcmlab/report.hpp"

using namespace rcmlab;
using nlohmann::json;

namespace {

std::string thrown_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("minimal config gets defaults; the law block is mandatory") {
  RunConfig cfg = parse_config_json(json{{"law", {{"d", 3}}}});
  CHECK(cfg.seed == 1);
  CHECK(cfg.threads == 0);
  CHECK(cfg.out_dir == "out");
  CHECK(cfg.law.d == 3);
  CHECK(cfg.law.tail_c == -1.0);  // marker for the 1/(2d) default
  CHECK(law_from_config(cfg.law).tail_c == doctest::Approx(1.0 / 6.0));
  CHECK(cfg.config_hash.size() == 16);
  CHECK(!cfg.has_block("walk"));
  CHECK(cfg.block("walk").is_object());

  CHECK_THROWS_AS(parse_config_json(json::object()), std::runtime_error);
  CHECK_THROWS_AS(parse_config_json(json{{"law", {{"tail_c", 0.2}}}}),
                  std::runtime_error);
  CHECK_THROWS_AS(parse_config_json(json{{"law", {{"d", 0}}}}),
                  std::runtime_error);
  CHECK_THROWS_AS(parse_config_json(json{{"law", {{"d", 6}}}}),
                  std::runtime_error);
  CHECK_THROWS_AS(parse_config_json(json::array()), std::runtime_error);
}

TEST_CASE("unknown keys are rejected by name") {
  std::string msg = thrown_message([] {
    parse_config_json(json{{"law", {{"d", 3}}}, {"walk", {{"walkerz", 5}}}});
  });
  CHECK(msg.find("walkerz") != std::string::npos);
  CHECK(msg.find("walk") != std::string::npos);

  msg = thrown_message(
      [] { parse_config_json(json{{"law", {{"d", 3}}}, {"wallk", json::object()}}); });
  CHECK(msg.find("wallk") != std::string::npos);

  msg = thrown_message(
      [] { parse_config_json(json{{"law", {{"d", 3}, {"fat_tail", 1}}}}); });
  CHECK(msg.find("fat_tail") != std::string::npos);
}

TEST_CASE("type errors name the offending key") {
  std::string msg = thrown_message([] {
    parse_config_json(json{{"law", {{"d", 3}}}, {"seed", "abc"}});
  });
  CHECK(msg.find("seed") != std::string::npos);
  CHECK_THROWS_AS(
      parse_config_json(json{{"law", {{"d", 3}}}, {"walk", 5}}),
      std::runtime_error);
  CHECK_THROWS_AS(
      parse_config_json(json{{"law", {{"d", "three"}}}}),
      std::runtime_error);
  CHECK_THROWS_AS(
      parse_config_json(json{{"law", {{"d", 3}}}, {"out_dir", 4}}),
      std::runtime_error);
}

TEST_CASE("uniform laws parse but refuse to build a tail law") {
  RunConfig cfg =
      parse_config_json(json{{"law", {{"d", 2}, {"uniform", 1.5}}}});
  CHECK(cfg.law.uniform == 1.5);
  CHECK_THROWS_AS(law_from_config(cfg.law), std::runtime_error);
}

TEST_CASE("the config hash ignores exactly the non-physical keys") {
  json base = {{"law", {{"d", 3}}}, {"seed", 4}};
  json moved = base;
  moved["threads"] = 7;
  moved["out_dir"] = "elsewhere";
  CHECK(config_hash_of(base) == config_hash_of(moved));
  CHECK(canonical_config_dump(moved) == canonical_config_dump(base));
  CHECK(canonical_config_dump(base) == "{\"law\":{\"d\":3},\"seed\":4}");

  json reseeded = base;
  reseeded["seed"] = 5;
  CHECK(config_hash_of(base) != config_hash_of(reseeded));
  json relawed = base;
  relawed["law"]["tail_c"] = 0.3;
  CHECK(config_hash_of(base) != config_hash_of(relawed));
}

TEST_CASE("law strings") {
  LawConfig a = parse_law_string("d=3");
  CHECK(a.d == 3);
  CHECK(a.tail_c == -1.0);
  CHECK(a.uniform == 0.0);
  LawConfig b = parse_law_string("d=2,tail_c=0.2,alpha=0.5,rho=-1,a_p=1.2");
  CHECK(b.d == 2);
  CHECK(b.tail_c == 0.2);
  CHECK(b.alpha == 0.5);
  CHECK(b.rho == -1.0);
  CHECK(b.a_p == 1.2);
  LawConfig c = parse_law_string("d=2,uniform=1");
  CHECK(c.uniform == 1.0);

  CHECK_THROWS_AS(parse_law_string("tail_c=0.2"), std::runtime_error);  // no d
  CHECK_THROWS_AS(parse_law_string("d=2,spice=1"), std::runtime_error);
  CHECK_THROWS_AS(parse_law_string("d=two"), std::runtime_error);
  CHECK_THROWS_AS(parse_law_string("d2"), std::runtime_error);
}

TEST_CASE("typed block lookups: defaults, coercions, and named failures") {
  json block = {{"n", 16},       {"t", 1.5},           {"flag", true},
                {"name", "abc"}, {"xs", {1.0, 2.5}},   {"ks", {2, 4}},
                {"bad_int", 1.5}, {"strs", {"a", "b"}}};
  CHECK(require_int(block, "n", "blk") == 16);
  CHECK(require_num(block, "t", "blk") == 1.5);
  std::string msg = thrown_message([&] { require_num(block, "missing", "blk"); });
  CHECK(msg.find("missing") != std::string::npos);
  CHECK(msg.find("blk") != std::string::npos);
  CHECK_THROWS_AS(require_int(block, "bad_int", "blk"), std::runtime_error);

  CHECK(param_int(block, "n", 0) == 16);
  CHECK(param_int(block, "absent", 7) == 7);
  CHECK(param_num(block, "absent", 2.5) == 2.5);
  CHECK(param_flag(block, "flag", false));
  CHECK(param_flag(block, "absent", true));
  CHECK(param_str(block, "name", "z") == "abc");
  CHECK(param_num_list(block, "xs", {}) == std::vector<double>{1.0, 2.5});
  CHECK(param_int_list(block, "ks", {}) == std::vector<int64_t>{2, 4});
  CHECK(param_int_list(block, "absent", {9}) == std::vector<int64_t>{9});
  CHECK(param_str_list(block, "strs", {}) ==
        std::vector<std::string>{"a", "b"});
  CHECK_THROWS_AS(param_int_list(block, "xs", {}), std::runtime_error);
  CHECK_THROWS_AS(param_flag(block, "n", false), std::runtime_error);
  CHECK_THROWS_AS(param_str(block, "n", ""), std::runtime_error);
}

TEST_CASE("reports: pass logic, serialization round-trip, aggregation") {
  ExperimentReport rep;
  rep.experiment = "demo";
  rep.seed = 12;
  rep.config_hash = "abcdef0123456789";
  rep.add("plain", 1.5, 0.1, 100);
  rep.add_check("good", 0.5, true, "within band");
  CHECK(rep.passed());
  rep.add_check("bad", 9.0, false, "out of band", 0.3, 50);
  CHECK(!rep.passed());
  REQUIRE(rep.find("bad") != nullptr);
  CHECK(rep.find("bad")->std_error == 0.3);
  CHECK(rep.find("nothere") == nullptr);

  json doc = report_to_json(rep);
  ExperimentReport back = report_from_json(doc);
  CHECK(back.experiment == rep.experiment);
  CHECK(back.seed == rep.seed);
  CHECK(back.config_hash == rep.config_hash);
  REQUIRE(back.stats.size() == rep.stats.size());
  CHECK(back.stats[2].key == "bad");
  CHECK(back.stats[2].checked);
  CHECK(!back.stats[2].pass);
  CHECK(back.stats[0].value == 1.5);
  CHECK(!back.passed());

  std::ostringstream os;
  print_report(rep, os);
  CHECK(os.str().find("demo") != std::string::npos);
  CHECK(os.str().find("[FAIL]") != std::string::npos);

  ExperimentReport ok;
  ok.experiment = "fine";
  ok.add_check("x", 1.0, true, "always");
  json agg = aggregate_reports({rep, ok});
  CHECK(!agg.at("pass").get<bool>());
  json agg_ok = aggregate_reports({ok});
  CHECK(agg_ok.at("pass").get<bool>());
  CHECK_THROWS_AS(aggregate_reports({}), std::runtime_error);
  std::ostringstream os2;
  print_aggregate(agg, os2);
  CHECK(os2.str().find("overall: FAIL") != std::string::npos);
}

TEST_CASE("g17 formatting round-trips doubles exactly") {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-308, 1.7e300, -0.0, 12345.6789,
                   0.09517738508487991}) {
    CHECK(std::stod(format_g17(v)) == v);
  }
}

TEST_CASE("csv files open with the provenance line") {
  const char* path = "unit_csv_probe.csv";
  {
    CsvWriter csv(path, "00ff00ff00ff00ff", 9, {"a", "b"});
    csv.row({1.0, 0.5});
    csv.row({2.0, 0.25});
  }
  std::ifstream in(path);
  std::string line0, line1, line2;
  std::getline(in, line0);
  std::getline(in, line1);
  std::getline(in, line2);
  CHECK(line0 == "# config_hash=00ff00ff00ff00ff seed=9");
  CHECK(line1 == "a,b");
  CHECK(line2.substr(0, 2) == "1,");
  std::filesystem::remove(path);
}

TEST_CASE("driver outputs are byte-identical across thread counts") {
  namespace fs = std::filesystem;
  auto run_once = [](const std::string& dir, int threads) {
    fs::remove_all(dir);
    json doc = {{"law", {{"d", 2}}},
                {"seed", 11},
                {"out_dir", dir},
                {"env_sample",
                 {{"half_side", 12}, {"n", 4}, {"write_csv", true}}}};
    RunConfig cfg = parse_config_json(doc);
    set_threads(threads);
    return run_env_sample(cfg);
  };
  ExperimentReport r1 = run_once("unit_threads_a", 1);
  ExperimentReport r2 = run_once("unit_threads_b", 3);
  set_threads(2);
  CHECK(r1.passed());
  CHECK(r2.passed());

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator("unit_threads_a"))
    names.push_back(entry.path().filename().string());
  CHECK(names.size() >= 3);  // binary + csv + summary json
  for (const std::string& name : names) {
    CAPTURE(name);
    CHECK(slurp("unit_threads_a/" + name) == slurp("unit_threads_b/" + name));
  }
  fs::remove_all("unit_threads_a");
  fs::remove_all("unit_threads_b");
}
