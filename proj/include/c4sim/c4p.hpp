// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "c4sim/topology.hpp"

namespace c4sim::c4p {

struct PathTableEntry {
  bool reachable = false;
  int witness_port = 0;  // src_udp_port that steered the prober's flow there
};

// Probed (leaf, spine) reachability with the witness source ports found by
// enumerating ports from the per-leaf prober.
struct PathTable {
  int leaf_count = 0;
  int spine_count = 0;
  std::vector<PathTableEntry> entries;
  std::vector<int> probers;  // leaf -> prober node
  std::set<int> excluded_links;
  int version = 0;

  PathTableEntry& at(int leaf, int spine) {
    return entries.at(static_cast<size_t>(leaf) * spine_count + spine);
  }
  const PathTableEntry& at(int leaf, int spine) const {
    return entries.at(static_cast<size_t>(leaf) * spine_count + spine);
  }
  int reachable_count() const;
  void dump(std::ostream& os) const;  // P <leaf> <spine> <reachable> <witness>
};

// Bounded witness-port enumeration per leaf pair.
inline constexpr int kProbePortBudget = 4096;

// Full-mesh probing from one (seeded) random server per leaf. Equals graph
// reachability over up links: (leaf, spine) is reachable iff the uplink is
// up and the spine still reaches some other leaf.
PathTable probe_paths(const Topology& topo, uint64_t seed);

// Adds the link to the exclusion set and re-probes the slice it touches.
// Returns false when the link was already excluded (repeated reports).
bool exclude_link(PathTable& table, const Topology& topo, int link_id);

struct QpSetupRequest {
  int job = 0;
  int comm_id = 0;
  int channel = 0;
  int qp_index = 0;  // index within the channel
  int src_node = 0;
  int src_nic = 0;
  int src_side = 0;  // left/right physical port class
  int dst_node = 0;
  int dst_nic = 0;
};

struct QpAssignment {
  int spine = -1;  // -1 for leaf-local paths
  int src_udp_port = 0;
  Path path;
  int src_leaf = -1;
  int dst_leaf = -1;
};

// Global allocation bookkeeping; one instance serves every job.
class AllocationState {
 public:
  // Picks the spine (QP index mod reachable count, least-outstanding ties),
  // then searches the source port that actually steers this flow's hash to it
  // while keeping the receive side in the same port class. Throws SimError
  // when no reachable spine serves the leaf pair.
  QpAssignment allocate(const PathTable& table, const Topology& topo,
                        const QpSetupRequest& req, uint64_t ecmp_seed,
                        int64_t qp_uid);

  void release(int64_t qp_uid);

  struct Reassignment {
    int64_t qp_uid = 0;
    QpSetupRequest request;
    QpAssignment assignment;
  };

  // Excludes the link, re-probes the affected table slice, and re-allocates
  // every QP whose path crossed it. Idempotent on repeated reports.
  std::vector<Reassignment> on_link_fault(PathTable& table, const Topology& topo,
                                          int link_id, uint64_t ecmp_seed);

  int spine_load(int src_leaf, int dst_leaf, int spine) const;
  int nic_side_count(int node, int nic, int side) const;
  const std::map<int64_t, std::pair<QpSetupRequest, QpAssignment>>& assignments() const {
    return live_;
  }
  void dump_allocation_log(std::ostream& os) const;  // A <job> <qp> <spine> <srcport>

 private:
  QpAssignment allocate_impl(const PathTable& table, const Topology& topo,
                             const QpSetupRequest& req, uint64_t ecmp_seed,
                             std::optional<int> preferred_index);

  std::map<std::tuple<int, int, int>, int> spine_load_;  // (src_leaf, dst_leaf, spine)
  std::map<std::tuple<int, int, int>, int> nic_side_;    // (node, nic, side)
  std::map<int64_t, std::pair<QpSetupRequest, QpAssignment>> live_;
};

struct QpLoadView {
  int64_t queue_bytes = 0;
  double rate_estimate = 1.0;  // recent completion rate, EWMA
  bool full = false;
};

// Drain-time QP choice: smallest queue_bytes/rate among non-full queues,
// ties to the lowest index. Returns -1 when every queue is full.
int select_qp(const std::vector<QpLoadView>& qps);

// Per-QP completion-rate tracker, horizon of about the last 8 chunks.
class EwmaRate {
 public:
  explicit EwmaRate(double initial = 1.0) : rate_(initial) {}
  void observe(double bytes, double duration_s) {
    if (duration_s <= 0) return;
    const double sample = bytes / duration_s;
    rate_ += kAlpha * (sample - rate_);
  }
  double rate() const { return rate_; }

 private:
  static constexpr double kAlpha = 2.0 / 9.0;
  double rate_;
};

}  // namespace c4sim::c4p
