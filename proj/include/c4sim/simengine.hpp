// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "c4sim/c4d.hpp"
#include "c4sim/c4p.hpp"
#include "c4sim/collective.hpp"
#include "c4sim/monitor.hpp"
#include "c4sim/topology.hpp"

namespace c4sim {

enum class FaultKind {
  link_down,
  link_up,
  link_degraded,
  slow_connection,
  slow_compute,
  nic_degraded,
  rank_crash,
  comm_hang,
  noncomm_hang,
};

std::string fault_kind_name(FaultKind k);

struct FaultEvent {
  double time_s = 0.0;
  FaultKind kind = FaultKind::link_down;
  int link = -1;           // link_* faults
  double factor = 1.0;     // capacity factor in (0,1), or slowdown multiplier >= 1
  int job = -1;
  int rank = -1;           // rank faults (communicator rank within job)
  int src_rank = -1;       // slow_connection
  int dst_rank = -1;
  int node = -1, nic = -1, side = -1;  // nic_degraded port
};

struct JobSpec {
  int job_id = 0;
  std::string name;
  std::vector<int> nodes;
  int ranks_per_node = 8;
  int channels = 1;
  int qps_per_channel = 2;
  int64_t collective_bytes = 256ll << 20;
  int64_t chunk_bytes = 4ll << 20;
  int queue_capacity = 8;
  double compute_s = 0.01;
  int iterations = 3;
  int checkpoint_interval_iters = 0;  // 0 disables checkpointing

  int rank_count() const { return static_cast<int>(nodes.size()) * ranks_per_node; }
};

struct Policies {
  bool c4p = true;
  bool dynamic_lb = true;
  bool c4d = false;
  c4d::DetectorParams detector;
  double isolation_s = 30.0;  // master: verdict -> node isolated
  double reinit_s = 60.0;     // isolation -> job running again
};

struct Scenario {
  FatTreeParams topology;
  std::vector<JobSpec> jobs;
  std::vector<FaultEvent> faults;
  Policies policies;
  uint64_t seed = 1;
  double duration_s = 60.0;
  double sample_interval_s = 0.01;
  std::vector<int> backup_nodes;
  bool emit_trace = false;
};

void validate_scenario(const Scenario& sc);

struct IterRecord {
  int job = 0;
  int iter = 0;
  int attempt = 0;  // increments when an iteration re-runs after restart
  double start_s = 0.0;
  double compute_s = 0.0;
  double comm_s = 0.0;
  double busbw_gbps = 0.0;
};

struct FlowRecord {
  int64_t qp_uid = 0;
  int job = 0;
  std::string src, dst;
  std::string path;
  double start_s = 0.0;
  double end_s = 0.0;
  int64_t bytes = 0;
  double mean_gbps = 0.0;
};

struct PortSample {
  double t = 0.0;
  int link_id = 0;
  int dir = 0;  // 0: host->leaf / leaf->spine, 1: reverse
  double gbps = 0.0;
};

struct SimEventRecord {
  double t = 0.0;
  std::string kind;
  std::string detail;
};

struct RunReport {
  double wall_s = 0.0;
  std::vector<IterRecord> iters;
  std::vector<FlowRecord> flows;
  std::vector<PortSample> ports;
  std::vector<SimEventRecord> events;
  std::vector<c4d::Diagnosis> diagnoses;
  std::vector<c4d::Incident> incidents;
  c4d::DowntimeAggregate downtime;
  int64_t bytes_scheduled = 0;
  int64_t bytes_delivered = 0;
  std::vector<MonitorRecord> trace;  // populated when Scenario::emit_trace
  std::string pathtable_dump;
  std::string allocation_dump;
  std::string topology_dump;

  double mean_busbw(int job, int from_iter = 0) const;
  std::string port_name(const PortSample& s, const Topology* topo = nullptr) const;
};

// Deterministic discrete-event run; identical scenario + seed reproduces the
// report bit for bit.
RunReport run(const Scenario& sc);

// Topology with every fault scripted at time <= 0 already applied (probe and
// setup-time views).
Topology build_initial_topology(const Scenario& sc);

}  // namespace c4sim
