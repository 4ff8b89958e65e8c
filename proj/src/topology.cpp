// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include "c4sim/topology.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

#include "c4sim/rng.hpp"

namespace c4sim {

std::vector<int> Path::link_ids() const {
  std::vector<int> ids;
  ids.push_back(src_host_link);
  for (const auto& h : hops) ids.push_back(h.link_id);
  // The last hop's egress link already is the destination host link.
  return ids;
}

int Topology::host_link(int node, int nic, int side) const {
  return host_link_index_.at((static_cast<size_t>(node) * nics_ + nic) * 2 + side);
}

int Topology::uplink(int leaf, int spine) const {
  return uplink_index_.at(static_cast<size_t>(leaf) * spines.size() + spine);
}

int Topology::leaf_pair_of(int node) const {
  const Link& l = links.at(host_link(node, 0, kLeft));
  return l.leaf / 2;
}

int Topology::leaf_of(int node, int side) const { return 2 * leaf_pair_of(node) + side; }

std::vector<int> Topology::up_uplinks_of_leaf(int leaf) const {
  std::vector<int> out;
  for (size_t s = 0; s < spines.size(); ++s) {
    int id = uplink(leaf, static_cast<int>(s));
    if (links[id].up()) out.push_back(id);
  }
  return out;
}

void Topology::set_link_state(int link_id, LinkState state, double degrade_factor) {
  if (link_id < 0 || link_id >= static_cast<int>(links.size()))
    throw ValidationError("set_link_state: unknown link id " + std::to_string(link_id));
  if (state == LinkState::degraded && !(degrade_factor > 0.0 && degrade_factor < 1.0))
    throw ValidationError("set_link_state: degraded factor must be in (0,1)");
  links[link_id].state = state;
  links[link_id].degrade_factor = state == LinkState::degraded ? degrade_factor : 1.0;
}

std::string link_state_name(LinkState s) {
  switch (s) {
    case LinkState::up: return "up";
    case LinkState::down: return "down";
    case LinkState::degraded: return "degraded";
  }
  return "?";
}

void Topology::write_edge_list(std::ostream& os) const {
  for (const Link& l : links) {
    os << "link " << l.id << ' ';
    if (l.kind == LinkKind::host)
      os << "node" << l.node << ":nic" << l.nic << (l.side == kLeft ? ":L" : ":R")
         << ' ' << "leaf" << l.leaf;
    else
      os << "leaf" << l.leaf << ' ' << "spine" << l.spine;
    os << ' ' << l.effective_gbps() << ' ' << link_state_name(l.state) << '\n';
  }
}

Topology build_fat_tree(const FatTreeParams& p) {
  if (p.leaf_count < 2 || p.leaf_count % 2 != 0)
    throw ValidationError("build_fat_tree: leaf_count must be even and >= 2");
  if (p.spine_count < 1) throw ValidationError("build_fat_tree: spine_count must be >= 1");
  if (p.nodes_per_leaf_pair < 1)
    throw ValidationError("build_fat_tree: nodes_per_leaf_pair must be >= 1");
  const int pairs = p.leaf_count / 2;
  if (p.node_count != pairs * p.nodes_per_leaf_pair)
    throw ValidationError(
        "build_fat_tree: node_count (" + std::to_string(p.node_count) +
        ") not evenly distributable over " + std::to_string(pairs) +
        " leaf pairs of " + std::to_string(p.nodes_per_leaf_pair) + " nodes");

  Topology t;
  t.nics_ = p.nics_per_node;
  const int host_ports_per_leaf = p.nodes_per_leaf_pair * p.nics_per_node;
  const double downlink_per_leaf = host_ports_per_leaf * p.capacity_gbps;
  const double uplink_gbps =
      p.uplink_gbps.value_or(downlink_per_leaf / p.spine_count);

  for (int n = 0; n < p.node_count; ++n)
    t.nodes.push_back({n, p.gpus_per_node, p.nics_per_node, p.capacity_gbps});
  for (int l = 0; l < p.leaf_count; ++l)
    t.leaves.push_back({l, Tier::leaf, host_ports_per_leaf + p.spine_count});
  for (int s = 0; s < p.spine_count; ++s)
    t.spines.push_back({s, Tier::spine, p.leaf_count});

  t.host_link_index_.assign(
      static_cast<size_t>(p.node_count) * p.nics_per_node * 2, -1);
  t.uplink_index_.assign(static_cast<size_t>(p.leaf_count) * p.spine_count, -1);

  // Every NIC's left port lands on the even leaf of the node's pair, the
  // right port on the odd leaf.
  for (int n = 0; n < p.node_count; ++n) {
    const int pair = n / p.nodes_per_leaf_pair;
    for (int nic = 0; nic < p.nics_per_node; ++nic) {
      for (int side = 0; side < 2; ++side) {
        Link l;
        l.id = static_cast<int>(t.links.size());
        l.kind = LinkKind::host;
        l.node = n;
        l.nic = nic;
        l.side = side;
        l.leaf = 2 * pair + side;
        l.capacity_gbps = p.capacity_gbps;
        t.host_link_index_[(static_cast<size_t>(n) * p.nics_per_node + nic) * 2 + side] =
            l.id;
        t.links.push_back(l);
      }
    }
  }
  for (int leaf = 0; leaf < p.leaf_count; ++leaf) {
    for (int spine = 0; spine < p.spine_count; ++spine) {
      Link l;
      l.id = static_cast<int>(t.links.size());
      l.kind = LinkKind::uplink;
      l.leaf = leaf;
      l.spine = spine;
      l.capacity_gbps = uplink_gbps;
      t.uplink_index_[static_cast<size_t>(leaf) * p.spine_count + spine] = l.id;
      t.links.push_back(l);
    }
  }

  t.oversubscription = downlink_per_leaf / (uplink_gbps * p.spine_count);
  return t;
}

uint64_t switch_seed(uint64_t scenario_seed, int switch_id) {
  return mix64(mix64(scenario_seed, hash_str("ecmp")), static_cast<uint64_t>(switch_id));
}

int ecmp_select(const FlowKey& flow, uint64_t seed, std::vector<int> candidates) {
  if (candidates.empty()) throw SimError("ecmp_select: empty candidate set (black hole)");
  std::sort(candidates.begin(), candidates.end());
  uint64_t h = seed;
  h = mix64(h, static_cast<uint64_t>(flow.src_node));
  h = mix64(h, static_cast<uint64_t>(flow.dst_node));
  h = mix64(h, static_cast<uint64_t>(flow.src_nic * 2 + flow.src_side));
  h = mix64(h, static_cast<uint64_t>(flow.dst_nic));
  h = mix64(h, static_cast<uint64_t>(flow.src_udp_port));
  h = mix64(h, static_cast<uint64_t>(flow.dst_udp_port));
  return candidates[h % candidates.size()];
}

Path route(const Topology& topo, const FlowKey& flow, uint64_t seed) {
  Path path;
  const int src_link = topo.host_link(flow.src_node, flow.src_nic, flow.src_side);
  if (!topo.links[src_link].up())
    throw SimError("route: source host link " + std::to_string(src_link) + " is down");
  path.src_host_link = src_link;
  const int src_leaf = topo.links[src_link].leaf;

  auto deliver_from_leaf = [&](int leaf) -> bool {
    // The destination is attached to this leaf iff the leaf's side matches
    // one of the node's ports; side equals leaf parity.
    const int side = leaf % 2;
    if (topo.leaf_of(flow.dst_node, side) != leaf) return false;
    const int dst_link = topo.host_link(flow.dst_node, flow.dst_nic, side);
    if (!topo.links[dst_link].up()) return false;
    path.hops.push_back({leaf, dst_link});
    path.dst_host_link = dst_link;
    path.dst_side = side;
    return true;
  };

  if (deliver_from_leaf(src_leaf)) return path;

  // Up to a spine.
  std::vector<int> ups = topo.up_uplinks_of_leaf(src_leaf);
  if (ups.empty())
    throw SimError("route: no up uplink at leaf " + std::to_string(src_leaf));
  const int up = ecmp_select(flow, switch_seed(seed, src_leaf), ups);
  path.hops.push_back({src_leaf, up});
  const int spine = topo.links[up].spine;
  path.spine = spine;

  // Down to whichever destination leaf still has an up chain.
  std::vector<int> downs;
  for (int side = 0; side < 2; ++side) {
    const int leaf = topo.leaf_of(flow.dst_node, side);
    const int down = topo.uplink(leaf, spine);
    const int host = topo.host_link(flow.dst_node, flow.dst_nic, side);
    if (topo.links[down].up() && topo.links[host].up()) downs.push_back(down);
  }
  if (downs.empty())
    throw SimError("route: no up downlink at spine " + std::to_string(spine) +
                   " toward node " + std::to_string(flow.dst_node));
  const int down = ecmp_select(flow, switch_seed(seed, 1000 + spine), downs);
  const int dst_leaf = topo.links[down].leaf;
  path.hops.push_back({1000 + spine, down});
  if (!deliver_from_leaf(dst_leaf))
    throw SimError("route: destination host link down at leaf " + std::to_string(dst_leaf));
  return path;
}

}  // namespace c4sim
