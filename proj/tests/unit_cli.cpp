// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "c4sim/config.hpp"
#include "c4sim/report.hpp"

using namespace c4sim;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"cfg(
[topology]
nodes = 8
leaves = 4
spines = 4
nodes_per_leaf_pair = 4
port_gbps = 200

[job]
name = tiny
nodes = 0,4
ranks_per_node = 4
channels = 2
qps_per_channel = 1
collective_mib = 16
chunk_mib = 1
compute_s = 0.001
iterations = 4
checkpoint_interval_iters = 2

[policies]
c4p = on
dynamic_lb = on
c4d = on
hang_timeout_iters = 1.5

[run]
seed = 3
duration_s = 5
sample_interval_s = 0.01
trace = on
)cfg";

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / ("c4sim_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, std::string* out = nullptr) {
  const fs::path bin = C4SIM_BIN;
  const fs::path tmp = temp_dir() / "cli_out.txt";
  const std::string cmd = bin.string() + " " + args + " > " + tmp.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (out) {
    std::ifstream is(tmp);
    std::stringstream buf;
    buf << is.rdbuf();
    *out = buf.str();
  }
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("config: parses sections and rejects unknown keys") {
  RawConfig raw = parse_config_text(kTinyConfig);
  ScenarioConfig cfg = build_scenario(raw);
  REQUIRE(cfg.sim.has_value());
  CHECK(cfg.sim->jobs.size() == 1);
  CHECK(cfg.sim->jobs[0].rank_count() == 8);
  CHECK(cfg.sim->policies.c4d);
  CHECK(cfg.sim->seed == 3);

  CHECK_THROWS_WITH_AS(parse_config_text("[topology]\nbogus_key = 1\n"),
                       doctest::Contains("line 2"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("[nonsense]\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("key_outside = 1\n"), ValidationError);
}

TEST_CASE("config: validation catches bad scenarios") {
  {
    RawConfig raw = parse_config_text(kTinyConfig);
    apply_override(raw, "job.0.nodes=0,99");
    CHECK_THROWS_AS(build_scenario(raw), ValidationError);
  }
  {
    RawConfig raw = parse_config_text(kTinyConfig);
    // No [fault] section exists to index.
    CHECK_THROWS_AS(apply_override(raw, "fault.0.kind=rank_crash"), ValidationError);
  }
}

TEST_CASE("config: overrides reach nested sections") {
  RawConfig raw = parse_config_text(kTinyConfig);
  apply_override(raw, "policies.c4p=off");
  apply_override(raw, "run.seed=99");
  apply_override(raw, "job.0.compute_s=0.004");
  ScenarioConfig cfg = build_scenario(raw);
  CHECK_FALSE(cfg.sim->policies.c4p);
  CHECK(cfg.sim->seed == 99);
  CHECK(cfg.sim->jobs[0].compute_s == doctest::Approx(0.004));
  CHECK_THROWS_AS(apply_override(raw, "policies.bogus=1"), ValidationError);
}

TEST_CASE("presets: all six parse and classify correctly") {
  for (const std::string& name : preset_names()) {
    ScenarioConfig cfg = load_config(name, {});
    if (name.rfind("downtime", 0) == 0) {
      CHECK(cfg.downtime.has_value());
    } else {
      REQUIRE(cfg.sim.has_value());
      CHECK(!cfg.sim->jobs.empty());
    }
  }
  CHECK(preset_names().size() == 6);
  CHECK_THROWS_AS(load_config("no_such_preset", {}), ValidationError);
}

TEST_CASE("cli: malformed config exits 2 and writes nothing") {
  auto dir = temp_dir();
  auto bad = dir / "bad.cfg";
  std::ofstream(bad) << "[topology]\nnot_a_key = 1\n";
  std::string out;
  const int rc = run_cli("run --config " + bad.string() + " --out " + (dir / "b").string(), &out);
  CHECK(rc == 2);
  CHECK(!fs::exists(dir / "b" / "iters.csv"));
}

TEST_CASE("cli: run produces the bundle and exits 0") {
  auto dir = temp_dir();
  auto cfgp = dir / "tiny.cfg";
  std::ofstream(cfgp) << kTinyConfig;
  std::string out;
  const int rc = run_cli("run --config " + cfgp.string() + " --out " + (dir / "r").string(), &out);
  CHECK(rc == 0);
  for (const char* f : {"iters.csv", "flows.csv", "ports.csv", "events.csv",
                        "diagnosis.csv", "downtime.csv", "allocation.csv", "trace.tsv",
                        "topology.txt", "pathtable.txt", "incidents.csv"})
    CHECK(fs::exists(dir / "r" / f));
}

TEST_CASE("cli: diagnose on the run's trace reproduces diagnosis.csv exactly") {
  auto dir = temp_dir();
  auto cfgp = dir / "tiny2.cfg";
  std::ofstream(cfgp) << kTinyConfig;
  REQUIRE(run_cli("run --config " + cfgp.string() + " --set fault.x=y --out x") == 2);

  const auto rdir = dir / "rt";
  REQUIRE(run_cli("run --config " + cfgp.string() + " --out " + rdir.string()) == 0);
  const auto ddir = dir / "dg";
  REQUIRE(run_cli("diagnose --trace " + (rdir / "trace.tsv").string() +
                  " --set policies.hang_timeout_iters=1.5 --out " + ddir.string()) == 0);
  CHECK(slurp(rdir / "diagnosis.csv") == slurp(ddir / "diagnosis.csv"));
}

TEST_CASE("cli: diagnose rejects malformed traces with the line number") {
  auto dir = temp_dir();
  auto tp = dir / "bad_trace.tsv";
  std::ofstream(tp) << "T\t0.5\tbroken\n";
  std::string out;
  const int rc = run_cli("diagnose --trace " + tp.string() + " --out " + dir.string(), &out);
  CHECK(rc == 2);
  CHECK(out.find("line 1") != std::string::npos);
}

TEST_CASE("cli: probe prints the path table") {
  std::string out;
  const int rc = run_cli("probe --config eight_jobs_1to1", &out);
  CHECK(rc == 0);
  int lines = 0;
  std::istringstream is(out);
  std::string line;
  while (std::getline(is, line))
    if (line.rfind("P ", 0) == 0) ++lines;
  CHECK(lines == 64);
  // One downed uplink: 63 reachable.
  std::string out2;
  REQUIRE(run_cli("probe --config eight_jobs_1to1 --set fault.0.kind=link_down", &out2) == 2);
}

TEST_CASE("cli: report summarizes a bundle and fails cleanly when missing") {
  auto dir = temp_dir();
  auto cfgp = dir / "tiny3.cfg";
  std::ofstream(cfgp) << kTinyConfig;
  const auto rdir = dir / "rb";
  REQUIRE(run_cli("run --config " + cfgp.string() + " --out " + rdir.string()) == 0);
  std::string out;
  CHECK(run_cli("report --bundle " + rdir.string(), &out) == 0);
  CHECK(out.find("busbw per job") != std::string::npos);
  CHECK(fs::exists(rdir / "report_busbw.csv"));
  CHECK(fs::exists(rdir / "report_ports.csv"));
  CHECK(run_cli("report --bundle " + (dir / "missing").string(), &out) == 2);
}

TEST_CASE("sweep: serial and parallel fan-out agree; bundles reproducible") {
  ScenarioConfig cfg = load_config("eight_jobs_1to1", {"job.0.iterations=2",
                                                      "job.1.iterations=2",
                                                      "job.2.iterations=2",
                                                      "job.3.iterations=2",
                                                      "job.4.iterations=2",
                                                      "job.5.iterations=2",
                                                      "job.6.iterations=2",
                                                      "job.7.iterations=2"});
  REQUIRE(cfg.sim.has_value());
  auto serial = run_sweep(*cfg.sim, 1, 4, "", false, 0, false);
  auto parallel = run_sweep(*cfg.sim, 1, 4, "", true, 0, false);
  REQUIRE(serial.size() == parallel.size());
  for (size_t i = 0; i < serial.size(); ++i)
    CHECK(serial[i].job_busbw == parallel[i].job_busbw);
}

TEST_CASE("downtime presets run through the model api") {
  ScenarioConfig cfg = load_config("downtime_jun", {"downtime.trials=50"});
  REQUIRE(cfg.downtime.has_value());
  DowntimeRun run = run_downtime_model(*cfg.downtime, cfg.seed);
  CHECK(run.trials.size() == 50);
  CHECK(run.mean.total() > 0.2);
  CHECK(run.analytic.total() == doctest::Approx(0.3119).epsilon(0.005));
}
