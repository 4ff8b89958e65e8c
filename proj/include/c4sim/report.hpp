// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "c4sim/c4d.hpp"
#include "c4sim/config.hpp"
#include "c4sim/simengine.hpp"

namespace c4sim {

// Writes the full CSV bundle (flows, ports, iters, events, diagnosis,
// downtime, allocation, topology, path table, optional trace).
void write_bundle(const std::string& dir, const Scenario& sc, const RunReport& report);

struct DowntimeRun {
  c4d::DowntimeModelParams params;
  std::vector<c4d::DowntimeTrial> trials;
  c4d::DowntimeAggregate mean;
  c4d::DowntimeAggregate analytic;
};

DowntimeRun run_downtime_model(const c4d::DowntimeModelParams& p, uint64_t seed);
void write_downtime_bundle(const std::string& dir, const DowntimeRun& run);

// Seed sweep: one bundle per seed under <out>/seed_<n>/ plus sweep.csv.
// Scenarios are independent; `parallel` fans them out over OpenMP threads
// with bit-identical per-seed outputs either way.
struct SweepRow {
  uint64_t seed = 0;
  std::vector<double> job_busbw;  // mean busbw per job over measured iters
  double min_busbw = 0, max_busbw = 0;
};

std::vector<SweepRow> run_sweep(const Scenario& base, uint64_t seed_lo, uint64_t seed_hi,
                                const std::string& out_dir, bool parallel,
                                int measure_from_iter = 0, bool write_bundles = true);

void write_sweep_csv(const std::string& dir, const std::vector<SweepRow>& rows);

// Summaries for `report`: per-job busbw stats, resampled port series,
// downtime passthrough. Returns human-readable text; CSVs land in dir.
std::string summarize_bundle(const std::string& bundle_dir, double resample_interval_s);

}  // namespace c4sim
