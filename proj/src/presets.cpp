// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "c4sim/config.hpp"

namespace c4sim {

namespace {

// Testbed shape: 16 nodes x 8 GPUs, dual-port NICs over 8 leaves, 8 spines.
// One ring over all 128 GPUs; receive-port balance decides whether the ring
// runs at the NVLink ceiling or at a single shared 200G port.
const char* kBondedBalance = R"cfg(
[topology]
nodes = 16
leaves = 8
spines = 8
nodes_per_leaf_pair = 4
port_gbps = 200

[job]
name = ring128
nodes = 0..15
ranks_per_node = 8
channels = 1
qps_per_channel = 2
collective_mib = 1024
chunk_mib = 4
compute_s = 0.005
iterations = 3

[policies]
c4p = on
dynamic_lb = on
c4d = off

[run]
seed = 1
duration_s = 30
sample_interval_s = 0.005
)cfg";

// Eight two-node allreduce jobs, each spanning distinct leaf pairs so every
// ring crosses the spine tier; full-bisection uplinks.
const char* kEightJobs1to1 = R"cfg(
[topology]
nodes = 16
leaves = 8
spines = 8
nodes_per_leaf_pair = 4
port_gbps = 200

[job]
name = j0
nodes = 0,8
[job]
name = j1
nodes = 1,9
[job]
name = j2
nodes = 2,10
[job]
name = j3
nodes = 3,11
[job]
name = j4
nodes = 4,12
[job]
name = j5
nodes = 5,13
[job]
name = j6
nodes = 6,14
[job]
name = j7
nodes = 7,15

[policies]
c4p = on
dynamic_lb = on
c4d = off

[run]
seed = 1
duration_s = 30
sample_interval_s = 0.002
)cfg";

// Same jobs with half the spine switches active (uplink capacity of the
// full fabric retained per link): a 2:1 oversubscribed core.
const char* kEightJobs2to1 = R"cfg(
[topology]
nodes = 16
leaves = 8
spines = 4
nodes_per_leaf_pair = 4
port_gbps = 200
uplink_gbps = 800

[job]
name = j0
nodes = 0,8
[job]
name = j1
nodes = 1,9
[job]
name = j2
nodes = 2,10
[job]
name = j3
nodes = 3,11
[job]
name = j4
nodes = 4,12
[job]
name = j5
nodes = 5,13
[job]
name = j6
nodes = 6,14
[job]
name = j7
nodes = 7,15

[policies]
c4p = on
dynamic_lb = on
c4d = off

[run]
seed = 1
duration_s = 30
sample_interval_s = 0.002
)cfg";

// Mid-run loss of one of the 8 uplinks a leaf offers. Narrow uplinks make
// the spine tier the binding resource so the lost link costs exactly 1/8 of
// path capacity; the fluid model has no congestion-control dynamics to
// reproduce the same loss on a full-bisection fabric.
const char* kLinkfailLb = R"cfg(
[topology]
nodes = 16
leaves = 8
spines = 8
nodes_per_leaf_pair = 4
port_gbps = 200
uplink_gbps = 90

[job]
name = j0
nodes = 0,8
qps_per_channel = 4
collective_mib = 512
chunk_mib = 2
iterations = 12
[job]
name = j1
nodes = 1,9
qps_per_channel = 4
collective_mib = 512
chunk_mib = 2
iterations = 12
[job]
name = j2
nodes = 2,10
qps_per_channel = 4
collective_mib = 512
chunk_mib = 2
iterations = 12
[job]
name = j3
nodes = 3,11
qps_per_channel = 4
collective_mib = 512
chunk_mib = 2
iterations = 12
[job]
name = j4
nodes = 4,12
qps_per_channel = 4
collective_mib = 512
chunk_mib = 2
iterations = 12
[job]
name = j5
nodes = 5,13
qps_per_channel = 4
collective_mib = 512
chunk_mib = 2
iterations = 12
[job]
name = j6
nodes = 6,14
qps_per_channel = 4
collective_mib = 512
chunk_mib = 2
iterations = 12
[job]
name = j7
nodes = 7,15
qps_per_channel = 4
collective_mib = 512
chunk_mib = 2
iterations = 12

[fault]
time_s = 0.12
kind = link_down
link = uplink:0:0

[policies]
c4p = on
dynamic_lb = on
c4d = off

[run]
seed = 1
duration_s = 5
sample_interval_s = 0.002
)cfg";

// June-2023 regime: infrequent checkpoints, half-hour human detection,
// hours of diagnosis, roughly 40 incidents a month.
const char* kDowntimeJun = R"cfg(
[downtime]
incident_rate_per_month = 40
checkpoint_interval_h = 2.710
detection_h = 0.6138
diagnosis_h = 3.537
reinit_h = 0.108
month_h = 720
trials = 1000

[run]
seed = 1
)cfg";

// December-2023 regime: ~10-minute checkpoints, automated detection in
// seconds-to-minutes, incident rate down 3.33x.
const char* kDowntimeDec = R"cfg(
[downtime]
incident_rate_per_month = 12.012
checkpoint_interval_h = 0.2758
detection_h = 0.030
diagnosis_h = 0.4376
reinit_h = 0.090
month_h = 720
trials = 1000

[run]
seed = 1
)cfg";

const std::vector<std::pair<std::string, const char*>>& table() {
  static const std::vector<std::pair<std::string, const char*>> t = {
      {"bonded_balance", kBondedBalance}, {"eight_jobs_1to1", kEightJobs1to1},
      {"eight_jobs_2to1", kEightJobs2to1}, {"linkfail_lb", kLinkfailLb},
      {"downtime_jun", kDowntimeJun},     {"downtime_dec", kDowntimeDec},
  };
  return t;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [n, t] : table()) out.push_back(n);
    return out;
  }();
  return names;
}

std::optional<std::string> preset_text(const std::string& name) {
  for (const auto& [n, t] : table())
    if (n == name) return std::string(t);
  return std::nullopt;
}

}  // namespace c4sim
