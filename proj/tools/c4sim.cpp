// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "c4sim/config.hpp"
#include "c4sim/report.hpp"
#include "c4sim/text.hpp"

namespace fs = std::filesystem;
using namespace c4sim;

namespace {

std::string default_out() {
  const char* env = std::getenv("C4SIM_OUT");
  return env && *env ? env : "out";
}

std::pair<uint64_t, uint64_t> parse_seed_range(const std::string& s) {
  auto dots = s.find("..");
  if (dots == std::string::npos) {
    const uint64_t v = static_cast<uint64_t>(parse_i64(s, "--seeds"));
    return {v, v};
  }
  return {static_cast<uint64_t>(parse_i64(s.substr(0, dots), "--seeds")),
          static_cast<uint64_t>(parse_i64(s.substr(dots + 2), "--seeds"))};
}

int cmd_run(const std::string& config, const std::vector<std::string>& sets,
            const std::string& seeds, const std::string& out, bool parallel) {
  ScenarioConfig cfg = load_config(config, sets);
  if (cfg.downtime) {
    DowntimeRun run = run_downtime_model(*cfg.downtime, cfg.seed);
    write_downtime_bundle(out, run);
    std::cout << "downtime trials=" << run.trials.size()
              << " mean_total=" << fmt_double(run.mean.total())
              << " analytic_total=" << fmt_double(run.analytic.total()) << "\n"
              << "bundle: " << out << "\n";
    return 0;
  }
  Scenario& sc = *cfg.sim;
  if (!seeds.empty()) {
    auto [lo, hi] = parse_seed_range(seeds);
    auto rows = run_sweep(sc, lo, hi, out, parallel);
    write_sweep_csv(out, rows);
    std::cout << "sweep seeds " << lo << ".." << hi << " -> " << out << "/sweep.csv\n";
    return 0;
  }
  RunReport rep = run(sc);
  write_bundle(out, sc, rep);
  for (size_t j = 0; j < sc.jobs.size(); ++j)
    std::cout << "job " << j << " mean busbw " << fmt_double(rep.mean_busbw(j))
              << " Gbps\n";
  std::cout << "bundle: " << out << "\n";
  return 0;
}

int cmd_probe(const std::string& config, const std::vector<std::string>& sets) {
  ScenarioConfig cfg = load_config(config, sets);
  if (!cfg.sim) throw ValidationError("probe: config has no simulator sections");
  Topology topo = build_initial_topology(*cfg.sim);
  c4p::PathTable table = c4p::probe_paths(topo, cfg.sim->seed);
  table.dump(std::cout);
  return 0;
}

int cmd_diagnose(const std::string& trace_path, const std::vector<std::string>& sets,
                 const std::string& out) {
  c4d::DetectorParams params;
  for (const std::string& s : sets) {
    RawConfig raw;
    raw.sections.push_back({"policies", 0, {}});
    apply_override(raw, s);
    for (const auto& [k, v, line] : raw.sections[0].entries) {
      if (k == "k_mad") params.k_mad = parse_double(v, k);
      else if (k == "rho") params.rho = parse_double(v, k);
      else if (k == "rel_floor") params.rel_floor = parse_double(v, k);
      else if (k == "hang_timeout_iters") params.hang_timeout_iters = parse_double(v, k);
    }
  }
  std::ifstream is(trace_path);
  if (!is) throw ValidationError("cannot open trace: " + trace_path);
  auto records = read_trace(is);
  auto diagnoses = c4d::replay_trace(records, params);

  fs::create_directories(out);
  std::ofstream os(fs::path(out) / "diagnosis.csv", std::ios::binary);
  os << "window,verdict,targets,evidence\n";
  int unhealthy = 0;
  for (const auto& d : diagnoses) {
    os << d.window_token() << ',' << c4d::verdict_name(d.verdict) << ','
       << d.targets_token() << ',' << d.cells_token() << '\n';
    if (d.verdict != c4d::Verdict::healthy) ++unhealthy;
    std::cout << d.to_line() << "\n";
  }
  std::cout << "windows=" << diagnoses.size() << " anomalies=" << unhealthy << "\n";
  return 0;
}

int cmd_report(const std::string& bundle, double resample) {
  std::cout << summarize_bundle(bundle, resample);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"c4sim: Clos-fabric GPU training cluster simulator"};
  app.require_subcommand(1);

  std::string config, seeds, out = default_out(), trace, bundle;
  std::vector<std::string> sets;
  bool serial = false;
  double resample = 0.05;

  auto* run_cmd = app.add_subcommand("run", "run a scenario or preset");
  run_cmd->add_option("--config", config, "config file path or preset name")->required();
  run_cmd->add_option("--set", sets, "override: section.key=value");
  run_cmd->add_option("--seeds", seeds, "seed sweep: a..b");
  run_cmd->add_option("--out", out, "output bundle directory");
  run_cmd->add_flag("--serial", serial, "disable parallel seed fan-out");
  std::string fmt = "csv";
  run_cmd->add_option("--format", fmt, "output format (csv)");

  auto* probe_cmd = app.add_subcommand("probe", "probe and dump the path table");
  probe_cmd->add_option("--config", config, "config file path or preset name")->required();
  probe_cmd->add_option("--set", sets, "override: section.key=value");

  auto* diag_cmd = app.add_subcommand("diagnose", "offline analysis of a trace");
  diag_cmd->add_option("--trace", trace, "trace file (tsv)")->required();
  diag_cmd->add_option("--set", sets, "override: policies.key=value");
  diag_cmd->add_option("--out", out, "output directory");

  auto* report_cmd = app.add_subcommand("report", "summarize a bundle");
  report_cmd->add_option("--bundle", bundle, "bundle directory")->required();
  report_cmd->add_option("--resample", resample, "port series resample interval (s)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      if (fmt != "csv") throw ValidationError("unsupported --format: " + fmt);
      return cmd_run(config, sets, seeds, out, !serial);
    }
    if (*probe_cmd) return cmd_probe(config, sets);
    if (*diag_cmd) return cmd_diagnose(trace, sets, out);
    if (*report_cmd) return cmd_report(bundle, resample);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
