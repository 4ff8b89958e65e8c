// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include "c4sim/c4p.hpp"

#include <algorithm>
#include <ostream>

#include "c4sim/rng.hpp"

namespace c4sim::c4p {

int PathTable::reachable_count() const {
  int n = 0;
  for (const auto& e : entries) n += e.reachable ? 1 : 0;
  return n;
}

void PathTable::dump(std::ostream& os) const {
  for (int l = 0; l < leaf_count; ++l)
    for (int s = 0; s < spine_count; ++s) {
      const auto& e = at(l, s);
      os << "P " << l << ' ' << s << ' ' << (e.reachable ? 1 : 0) << ' '
         << e.witness_port << '\n';
    }
}

PathTable probe_paths(const Topology& topo, uint64_t seed) {
  PathTable table;
  table.leaf_count = static_cast<int>(topo.leaves.size());
  table.spine_count = static_cast<int>(topo.spines.size());
  table.entries.assign(static_cast<size_t>(table.leaf_count) * table.spine_count, {});
  table.probers.assign(table.leaf_count, -1);

  // One random server per leaf. Both leaves of a pair share the pair's
  // nodes, so a prober exists iff the pair hosts at least one node.
  std::vector<std::vector<int>> nodes_of_pair((table.leaf_count + 1) / 2);
  for (const auto& n : topo.nodes) nodes_of_pair[topo.leaf_pair_of(n.id)].push_back(n.id);
  Rng rng(seed, "probers");
  for (int leaf = 0; leaf < table.leaf_count; ++leaf) {
    const auto& pool = nodes_of_pair[leaf / 2];
    if (pool.empty())
      throw SimError("probe_paths: leaf " + std::to_string(leaf) + " has no prober server");
    table.probers[leaf] = pool[rng.next_below(pool.size())];
  }

  for (int leaf = 0; leaf < table.leaf_count; ++leaf) {
    const int prober = table.probers[leaf];
    const int side = leaf % 2;
    std::vector<int> selectable;  // spines the leaf's hash can still pick
    for (int s = 0; s < table.spine_count; ++s)
      if (topo.link(topo.uplink(leaf, s)).up()) selectable.push_back(s);
    if (selectable.empty()) continue;

    // Full mesh over the other pairs' probers. Enumerating source ports
    // sweeps the uplink hash; whether a probe lands is fixed per
    // (spine, peer), so one hit per pair suffices.
    int confirmed = 0;
    for (int other = 0; other < table.leaf_count; other += 2) {
      if (other / 2 == leaf / 2) continue;
      const int peer = table.probers[other];
      FlowKey flow;
      flow.src_node = prober;
      flow.dst_node = peer;
      flow.src_nic = 0;
      flow.src_side = side;
      flow.dst_nic = 0;
      std::set<int> seen;
      for (int port = 1; port <= kProbePortBudget; ++port) {
        flow.src_udp_port = port;
        const int up =
            ecmp_select(flow, switch_seed(seed, leaf), topo.up_uplinks_of_leaf(leaf));
        const int spine = topo.link(up).spine;
        if (!seen.insert(spine).second) continue;
        auto& entry = table.at(leaf, spine);
        if (!entry.reachable) {
          try {
            Path p = route(topo, flow, seed);
            if (p.spine == spine) {
              entry.reachable = true;
              entry.witness_port = port;
              ++confirmed;
            }
          } catch (const SimError&) {
            // No egress from this spine toward this pair; another peer may
            // still confirm it.
          }
        }
        if (seen.size() == selectable.size()) break;
      }
      if (confirmed == static_cast<int>(selectable.size())) break;
    }
  }
  return table;
}

QpAssignment AllocationState::allocate_impl(const PathTable& table, const Topology& topo,
                                            const QpSetupRequest& req, uint64_t ecmp_seed,
                                            std::optional<int> preferred_index) {
  const int src_leaf = topo.leaf_of(req.src_node, req.src_side);
  const int dst_leaf = topo.leaf_of(req.dst_node, req.src_side);

  QpAssignment out;
  out.src_leaf = src_leaf;
  out.dst_leaf = dst_leaf;
  if (src_leaf == dst_leaf) {
    // Leaf-local: the port class constraint is satisfied topologically.
    FlowKey flow{req.src_node, req.dst_node, req.src_nic, req.src_side,
                 req.dst_nic,  1,            4791};
    out.path = route(topo, flow, ecmp_seed);
    out.src_udp_port = 1;
    out.spine = -1;
    return out;
  }

  std::vector<int> candidates;
  for (int s = 0; s < table.spine_count; ++s)
    if (table.at(src_leaf, s).reachable && table.at(dst_leaf, s).reachable)
      candidates.push_back(s);
  if (candidates.empty())
    throw SimError("allocate: no reachable spine for leaf pair " +
                   std::to_string(src_leaf) + "->" + std::to_string(dst_leaf));

  const int m = static_cast<int>(candidates.size());
  int min_load = spine_load(src_leaf, dst_leaf, candidates[0]);
  for (int s : candidates)
    min_load = std::min(min_load, spine_load(src_leaf, dst_leaf, s));
  int chosen = -1;
  if (preferred_index) {
    const int preferred = candidates[*preferred_index % m];
    if (spine_load(src_leaf, dst_leaf, preferred) == min_load) chosen = preferred;
  }
  if (chosen < 0) {
    for (int s : candidates)
      if (spine_load(src_leaf, dst_leaf, s) == min_load) { chosen = s; break; }
  }

  // The switch hash covers the whole flow key, so the witness port has to be
  // rediscovered per flow: enumerate ascending until the route lands on the
  // chosen spine with the receive side in the same port class.
  FlowKey flow{req.src_node, req.dst_node, req.src_nic, req.src_side,
               req.dst_nic,  0,            4791};
  for (int port = 1; port <= kProbePortBudget; ++port) {
    flow.src_udp_port = port;
    Path p;
    try {
      p = route(topo, flow, ecmp_seed);
    } catch (const SimError&) {
      continue;
    }
    bool excluded = false;
    for (int id : p.link_ids())
      if (table.excluded_links.count(id)) excluded = true;
    if (excluded) continue;
    if (p.spine == chosen && p.dst_side == req.src_side) {
      out.path = p;
      out.src_udp_port = port;
      out.spine = chosen;
      return out;
    }
  }
  throw SimError("allocate: witness port search exhausted for spine " +
                 std::to_string(chosen));
}

QpAssignment AllocationState::allocate(const PathTable& table, const Topology& topo,
                                       const QpSetupRequest& req, uint64_t ecmp_seed,
                                       int64_t qp_uid) {
  QpAssignment a = allocate_impl(table, topo, req, ecmp_seed, req.qp_index);
  if (a.spine >= 0) ++spine_load_[{a.src_leaf, a.dst_leaf, a.spine}];
  ++nic_side_[{req.src_node, req.src_nic, req.src_side}];
  live_[qp_uid] = {req, a};
  return a;
}

void AllocationState::release(int64_t qp_uid) {
  auto it = live_.find(qp_uid);
  if (it == live_.end()) return;
  const QpSetupRequest& req = it->second.first;
  const QpAssignment& a = it->second.second;
  if (a.spine >= 0) --spine_load_[{a.src_leaf, a.dst_leaf, a.spine}];
  --nic_side_[{req.src_node, req.src_nic, req.src_side}];
  live_.erase(it);
}

int AllocationState::spine_load(int src_leaf, int dst_leaf, int spine) const {
  auto it = spine_load_.find({src_leaf, dst_leaf, spine});
  return it == spine_load_.end() ? 0 : it->second;
}

int AllocationState::nic_side_count(int node, int nic, int side) const {
  auto it = nic_side_.find({node, nic, side});
  return it == nic_side_.end() ? 0 : it->second;
}

bool exclude_link(PathTable& table, const Topology& topo, int link_id) {
  if (table.excluded_links.count(link_id)) return false;  // idempotent
  table.excluded_links.insert(link_id);
  ++table.version;

  // Re-probe the slice the link touches: for an uplink that is its own
  // (leaf, spine) entry plus the spine's column (its egress set changed).
  const Link& l = topo.link(link_id);
  if (l.kind == LinkKind::uplink) {
    for (int leaf = 0; leaf < table.leaf_count; ++leaf) {
      auto& e = table.at(leaf, l.spine);
      const int up = topo.uplink(leaf, l.spine);
      bool reach = topo.link(up).up() && !table.excluded_links.count(up);
      if (reach) {
        bool egress = false;
        for (int other = 0; other < table.leaf_count; ++other) {
          if (other / 2 == leaf / 2) continue;
          const int down = topo.uplink(other, l.spine);
          if (topo.link(down).up() && !table.excluded_links.count(down)) egress = true;
        }
        reach = egress;
      }
      if (!reach) e.reachable = false;
    }
  }
  return true;
}

std::vector<AllocationState::Reassignment> AllocationState::on_link_fault(
    PathTable& table, const Topology& topo, int link_id, uint64_t ecmp_seed) {
  std::vector<Reassignment> out;
  if (!exclude_link(table, topo, link_id)) return out;

  // Re-allocate QPs whose paths crossed the link.
  std::vector<int64_t> hit;
  for (const auto& [uid, entry] : live_) {
    const auto& ids = entry.second.path.link_ids();
    if (std::find(ids.begin(), ids.end(), link_id) != ids.end()) hit.push_back(uid);
  }
  for (int64_t uid : hit) {
    const QpSetupRequest req = live_[uid].first;
    const QpAssignment old = live_[uid].second;
    if (old.spine >= 0) --spine_load_[{old.src_leaf, old.dst_leaf, old.spine}];
    // Least-loaded spine, no index preference: keeps max-min spread <= 1.
    QpAssignment fresh = allocate_impl(table, topo, req, ecmp_seed, std::nullopt);
    if (fresh.spine >= 0) ++spine_load_[{fresh.src_leaf, fresh.dst_leaf, fresh.spine}];
    live_[uid].second = fresh;
    out.push_back({uid, req, fresh});
  }
  return out;
}

void AllocationState::dump_allocation_log(std::ostream& os) const {
  for (const auto& [uid, entry] : live_)
    os << "A " << entry.first.job << ' ' << uid << ' ' << entry.second.spine << ' '
       << entry.second.src_udp_port << '\n';
}

int select_qp(const std::vector<QpLoadView>& qps) {
  int best = -1;
  double best_drain = 0.0;
  for (size_t i = 0; i < qps.size(); ++i) {
    if (qps[i].full) continue;
    const double rate = qps[i].rate_estimate > 0 ? qps[i].rate_estimate : 1e-9;
    const double drain = static_cast<double>(qps[i].queue_bytes) / rate;
    if (best < 0 || drain < best_drain) {
      best = static_cast<int>(i);
      best_drain = drain;
    }
  }
  return best;
}

}  // namespace c4sim::c4p
