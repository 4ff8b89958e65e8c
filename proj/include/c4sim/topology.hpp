// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "c4sim/error.hpp"

namespace c4sim {

// NVLink busbw ceiling per rank; the intra-node fabric is not modeled in
// detail, only this aggregate per-GPU send/receive bound.
inline constexpr double kNvlinkGbps = 362.0;

inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;

struct NodeSpec {
  int id = 0;
  int gpus = 8;
  int nics = 8;  // ports_per_nic fixed at 2 (left/right)
  double port_gbps = 200.0;
};

enum class Tier { leaf, spine };

struct SwitchSpec {
  int id = 0;
  Tier tier = Tier::leaf;
  int radix = 0;
};

enum class LinkState { up, down, degraded };

enum class LinkKind { host, uplink };

struct Link {
  int id = 0;
  LinkKind kind = LinkKind::host;
  // host link: node/nic/side <-> leaf; uplink: leaf <-> spine.
  int node = -1;
  int nic = -1;
  int side = -1;  // kLeft / kRight
  int leaf = -1;
  int spine = -1;
  double capacity_gbps = 0.0;
  LinkState state = LinkState::up;
  double degrade_factor = 1.0;  // in (0,1) when degraded

  bool up() const { return state != LinkState::down; }
  double effective_gbps() const {
    if (state == LinkState::down) return 0.0;
    if (state == LinkState::degraded) return capacity_gbps * degrade_factor;
    return capacity_gbps;
  }
};

// Identifies one RDMA flow for ECMP hashing. dst side is not part of the
// hash input: the fabric chooses the receive leaf, and with it the port.
struct FlowKey {
  int src_node = 0;
  int dst_node = 0;
  int src_nic = 0;
  int src_side = 0;
  int dst_nic = 0;
  int src_udp_port = 0;  // [1, 65535]
  int dst_udp_port = 4791;
};

struct PathHop {
  int switch_id = 0;  // switch making the forwarding decision
  int link_id = 0;    // egress link chosen there
};

struct Path {
  int src_host_link = -1;
  std::vector<PathHop> hops;  // leaf [-> spine -> leaf]
  int dst_host_link = -1;
  int dst_side = -1;  // receive port side, decided by routing
  int spine = -1;     // -1 for leaf-local paths

  std::vector<int> link_ids() const;
};

struct FatTreeParams {
  int node_count = 16;
  int leaf_count = 8;
  int spine_count = 8;
  int nodes_per_leaf_pair = 4;
  double capacity_gbps = 200.0;
  // Uplink capacity per (leaf, spine) link. Defaults to the value that makes
  // the fabric exactly 1:1; passing the 1:1 value with fewer spines models
  // deactivated spine switches (a 2:1 fabric).
  std::optional<double> uplink_gbps;
  int gpus_per_node = 8;
  int nics_per_node = 8;
};

class Topology {
 public:
  std::vector<NodeSpec> nodes;
  std::vector<SwitchSpec> leaves;
  std::vector<SwitchSpec> spines;
  std::vector<Link> links;
  double oversubscription = 1.0;
  double nvlink_gbps = kNvlinkGbps;

  const Link& link(int id) const { return links.at(id); }
  int host_link(int node, int nic, int side) const;
  int uplink(int leaf, int spine) const;
  int leaf_pair_of(int node) const;           // pair index p; leaves 2p, 2p+1
  int leaf_of(int node, int side) const;      // 2p + side
  std::vector<int> up_uplinks_of_leaf(int leaf) const;

  void set_link_state(int link_id, LinkState state, double degrade_factor = 1.0);

  void write_edge_list(std::ostream& os) const;

 private:
  friend Topology build_fat_tree(const FatTreeParams&);
  std::vector<int> host_link_index_;  // (node, nic, side) -> link id
  std::vector<int> uplink_index_;     // (leaf, spine) -> link id
  int nics_ = 8;
};

Topology build_fat_tree(const FatTreeParams& params);

// Deterministic hash-based pick among candidate links (sorted by id before
// reduction so set insertion order does not matter). Throws SimError on an
// empty candidate set: that is a routing black hole.
int ecmp_select(const FlowKey& flow, uint64_t switch_seed, std::vector<int> candidates);

// Fat-tree up/down routing: host -> leaf [-> spine -> leaf] -> host.
Path route(const Topology& topo, const FlowKey& flow, uint64_t seed);

uint64_t switch_seed(uint64_t scenario_seed, int switch_id);

std::string link_state_name(LinkState s);

}  // namespace c4sim
