#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ncsynth/errors.hpp"
#include "ncsynth/pipeline.hpp"

using namespace ncsynth;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json toy() {
  return json::parse(R"({
    "plant": {"name": "toy", "explicit": {"states": 4, "inputs": 2,
      "transitions": [[0,0,0],[0,1,1],[1,0,1],[1,1,2],[2,0,2],[2,1,3],[3,0,3],[3,1,0]]}},
    "delays": {"nsc_min": 2, "nsc_max": 2, "nca_min": 2, "nca_max": 2},
    "spec": {"kind": "safety", "safe": {"lb": [0], "ub": [2]}},
    "codegen": {"name": "toy_ctl", "targets": ["c", "verilog"]}
  })");
}

// x' = x + u on [0, 20]
json line() {
  return json::parse(R"({
    "plant": {"name": "robot", "params": {"dim": 1}, "tau": 1,
      "grid": {"lb": [0], "ub": [20], "eta": [1]}, "input_grid": {"lb": [-1], "ub": [1], "eta": [1]}},
    "spec": {"kind": "safety", "safe": {"lb": [0], "ub": [5]}},
    "sim": {"steps": 30, "x0": [3], "seed": 1}
  })");
}

fs::path scratch(const std::string &tag) {
  auto d = fs::temp_directory_path() / ("ncsynth_pipeline_" + tag);
  fs::remove_all(d);
  return d;
}

json manifest(const fs::path &dir) {
  std::ifstream in(dir / "manifest.json");
  return json::parse(in);
}

std::string write_config(const json &j, const fs::path &dir) {
  fs::create_directories(dir);
  auto p = dir / "config.json";
  std::ofstream(p) << j.dump();
  return p.string();
}

int cli(const std::string &args) {
  auto cmd = std::string(NCSYNTH_CLI) + " " + args + " > /dev/null 2>&1 < /dev/null";
  FILE *p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  int status = pclose(p);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("toy pipeline reports the expanded state count and generates code") {
  auto dir = scratch("toy");
  Pipeline p(parse_config(toy()), dir);
  auto reports = p.run_all();
  REQUIRE(reports.size() == 4);
  auto m = manifest(dir);
  CHECK(m["stages"]["expand"]["sizes"]["states"] == 100);
  CHECK(m["stages"]["abstract"]["sizes"]["deterministic"] == true);
  for (const char *f : {"plant.bdd", "ncs.bdd", "controller.bdd", "controller.json", "toy_ctl.c", "toy_ctl.h", "toy_ctl.v"})
    CHECK(fs::exists(dir / f));
  CHECK(m["stages"]["codegen"]["inputs"].contains("controller.bdd"));
}

TEST_CASE("same config gives the same output hashes") {
  auto a = scratch("det_a"), b = scratch("det_b");
  auto cfg = parse_config(toy());
  Pipeline(cfg, a).run_all();
  Pipeline(cfg, b).run_all();
  auto ma = manifest(a), mb = manifest(b);
  for (const auto &[stage, st] : ma["stages"].items())
    CHECK(st["outputs"] == mb["stages"][stage]["outputs"]);
  CHECK(ma["config"] == mb["config"]);
}

TEST_CASE("codegen refuses non-prolonged delays") {
  auto j = toy();
  j["delays"] = {{"nsc_min", 1}, {"nsc_max", 2}, {"nca_min", 1}, {"nca_max", 1}};
  Pipeline p(parse_config(j), scratch("varying"));
  p.abstract();
  p.expand();
  p.synth();
  try {
    p.codegen();
    FAIL("codegen accepted varying delays");
  } catch (const ConfigError &e) {
    CHECK(std::string(e.what()).find("prolonged") != std::string::npos);
  }
}

TEST_CASE("unrealizable specifications raise EmptyController") {
  auto j = toy();
  j["plant"]["explicit"] = {{"states", 2}, {"inputs", 1}, {"transitions", {{0, 0, 1}, {1, 0, 1}}}};
  j["spec"]["safe"] = {{"lb", {0}}, {"ub", {0}}};
  Pipeline p(parse_config(j), scratch("empty"));
  p.abstract();
  p.expand();
  CHECK_THROWS_AS(p.synth(), EmptyController);
}

TEST_CASE("config errors") {
  auto bad = [](auto edit) {
    auto j = toy();
    edit(j);
    CHECK_THROWS_AS(parse_config(j), ConfigError);
  };
  bad([](json &j) { j.erase("plant"); });
  bad([](json &j) { j["spec"]["kind"] = "liveness"; });
  bad([](json &j) { j["spec"]["safe"] = {{"lb", {0, 0}}, {"ub", {1, 1}}}; });
  bad([](json &j) { j["spec"] = {{"kind", "reach"}}; });
  bad([](json &j) { j["delays"]["nsc_min"] = 3; });
  bad([](json &j) { j["codegen"]["targets"] = {"vhdl"}; });
  bad([](json &j) { j["plant"]["explicit"]["transitions"] = {{0, 5, 0}}; });
  bad([](json &j) { j["plant"]["tau"] = -1; });
  auto l = line();
  l["sim"]["x0"] = {1, 2};
  CHECK_THROWS_AS(parse_config(l), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);

  Pipeline p(parse_config(toy()), scratch("order"));
  CHECK_THROWS_AS(p.synth(), ConfigError);
  CHECK_THROWS_AS(p.simulate(), ConfigError);
}

TEST_CASE("nondeterministic plant: the loop stays in the safe set") {
  auto j = json::parse(std::ifstream(fs::path(NCSYNTH_CONFIG_DIR) / "di.json"));
  auto cfg = parse_config(j);
  auto dir = scratch("di");
  Pipeline p(cfg, dir);
  p.run_all();
  std::ifstream in(dir / "trace.csv");
  auto trace = read_trace_csv(in);
  REQUIRE(trace.size() == cfg.sim->steps);
  // safe box [-3, 3] x [-1.5, 1.5] on a 0.25 grid: quantize and compare
  const auto &safe = cfg.spec->safe.front();
  const double lb[2] = {-4, -2};
  for (const auto &r : trace)
    for (std::size_t d = 0; d < 2; ++d) {
      double centre = lb[d] + 0.25 * std::round((r.x[d] - lb[d]) / 0.25);
      CHECK(centre >= safe.lb[d]);
      CHECK(centre <= safe.ub[d]);
    }
}

TEST_CASE("command line exit codes") {
  auto dir = scratch("cli");
  auto good = write_config(toy(), dir / "good");
  CHECK(cli("run --config " + good + " --out " + (dir / "good").string()) == 0);
  CHECK(cli("dump " + (dir / "good" / "ncs.bdd").string()) == 0);
  CHECK(cli("fsm " + (dir / "good" / "plant.bdd").string() + " -o " + (dir / "plant.fsm").string()) == 0);
  CHECK(fs::file_size(dir / "plant.fsm") > 0);
  CHECK(cli("codegen --out " + dir.string()) == 2);

  auto j = toy();
  j["spec"]["kind"] = "gen_buchi";
  auto broken = write_config(j, dir / "broken");
  CHECK(cli("run --config " + broken + " --out " + (dir / "broken").string()) == 2);

  j = toy();
  j["plant"]["explicit"] = {{"states", 2}, {"inputs", 1}, {"transitions", {{0, 0, 1}, {1, 0, 1}}}};
  j["spec"]["safe"] = {{"lb", {0}}, {"ub", {0}}};
  auto empty = write_config(j, dir / "empty");
  CHECK(cli("run --config " + empty + " --out " + (dir / "empty").string()) == 3);

  auto l = line();
  l["sim"]["x0"] = {15};
  auto outside = write_config(l, dir / "outside");
  CHECK(cli("run --config " + outside + " --out " + (dir / "outside").string()) == 4);
  // the partial trace is kept for diagnosis
  CHECK(fs::exists(dir / "outside" / "trace.csv"));

  l["sim"]["x0"] = {3};
  auto inside = write_config(l, dir / "inside");
  CHECK(cli("run --config " + inside + " --out " + (dir / "inside").string() + " --seed 9") == 0);
  CHECK(manifest(dir / "inside")["stages"]["sim"]["seed"] == 9);
}
