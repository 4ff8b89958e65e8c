// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

// Compares serial vs OpenMP seed-sweep throughput on a preset and checks
// the two produce identical results.

#include <chrono>
#include <iostream>

#include "c4sim/config.hpp"
#include "c4sim/report.hpp"

using namespace c4sim;

namespace {

double wall_seconds(bool parallel, const Scenario& sc, uint64_t seeds,
                    std::vector<SweepRow>* rows) {
  const auto t0 = std::chrono::steady_clock::now();
  *rows = run_sweep(sc, 1, seeds, "", parallel, 0, /*write_bundles=*/false);
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const std::string preset = argc > 1 ? argv[1] : "eight_jobs_1to1";
  const uint64_t seeds = argc > 2 ? std::stoull(argv[2]) : 16;

  ScenarioConfig cfg = load_config(preset, {});
  if (!cfg.sim) {
    std::cerr << "preset has no simulator scenario\n";
    return 2;
  }

  std::vector<SweepRow> serial_rows, parallel_rows;
  const double ts = wall_seconds(false, *cfg.sim, seeds, &serial_rows);
  const double tp = wall_seconds(true, *cfg.sim, seeds, &parallel_rows);

  bool identical = serial_rows.size() == parallel_rows.size();
  for (size_t i = 0; identical && i < serial_rows.size(); ++i)
    identical = serial_rows[i].job_busbw == parallel_rows[i].job_busbw;

  std::cout << "preset=" << preset << " seeds=" << seeds << "\n"
            << "serial:   " << ts << " s\n"
            << "parallel: " << tp << " s  (speedup " << (tp > 0 ? ts / tp : 0) << "x)\n"
            << "results identical: " << (identical ? "yes" : "NO") << "\n";
  return identical ? 0 : 1;
}
