// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations the tests compare the simulator
// against. Kept deliberately naive; nothing here shares code with the
// library paths it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "c4sim/collective.hpp"
#include "c4sim/topology.hpp"

namespace oracle {

// Water-filling max-min fairness, O(F^2 * L): raise every unfrozen flow at
// unit speed, freeze the flows on the first resource that fills, repeat.
inline std::vector<double> waterfill(const std::vector<double>& capacity,
                                     const std::vector<std::vector<int>>& flows) {
  const size_t nf = flows.size();
  std::vector<double> rate(nf, 0.0);
  std::vector<bool> frozen(nf, false);
  for (size_t f = 0; f < nf; ++f)
    for (int l : flows[f])
      if (capacity[l] <= 0.0) frozen[f] = true;

  while (true) {
    std::vector<size_t> open;
    for (size_t f = 0; f < nf; ++f)
      if (!frozen[f]) open.push_back(f);
    if (open.empty()) break;

    // Headroom per resource given current rates.
    double delta = std::numeric_limits<double>::infinity();
    for (size_t l = 0; l < capacity.size(); ++l) {
      double used = 0;
      int active = 0;
      for (size_t f = 0; f < nf; ++f)
        for (int x : flows[f]) {
          if (static_cast<size_t>(x) != l) continue;
          used += rate[f];
          if (!frozen[f]) ++active;
        }
      if (active > 0) delta = std::min(delta, (capacity[l] - used) / active);
    }
    if (!std::isfinite(delta)) break;
    if (delta < 0) delta = 0;
    for (size_t f : open) rate[f] += delta;

    bool any = false;
    for (size_t l = 0; l < capacity.size(); ++l) {
      double used = 0;
      int active = 0;
      for (size_t f = 0; f < nf; ++f)
        for (int x : flows[f]) {
          if (static_cast<size_t>(x) != l) continue;
          used += rate[f];
          if (!frozen[f]) ++active;
        }
      if (active > 0 && capacity[l] - used <= 1e-9 * std::max(1.0, capacity[l])) {
        for (size_t f = 0; f < nf; ++f)
          if (!frozen[f])
            for (int x : flows[f])
              if (static_cast<size_t>(x) == l) {
                frozen[f] = true;
                any = true;
              }
      }
    }
    if (!any) break;
  }
  return rate;
}

// Max-min optimality certificate: feasibility plus, for every flow, some
// saturated bottleneck resource where it holds a maximal rate.
inline bool is_max_min(const std::vector<double>& capacity,
                       const std::vector<std::vector<int>>& flows,
                       const std::vector<double>& rate, double tol = 1e-9) {
  std::vector<double> used(capacity.size(), 0.0);
  for (size_t f = 0; f < flows.size(); ++f)
    for (int l : flows[f]) used[l] += rate[f];
  for (size_t l = 0; l < capacity.size(); ++l)
    if (used[l] > capacity[l] + tol * std::max(1.0, capacity[l])) return false;
  for (size_t f = 0; f < flows.size(); ++f) {
    bool zero_cap = false;
    for (int l : flows[f])
      if (capacity[l] <= 0) zero_cap = true;
    if (zero_cap) {
      if (rate[f] != 0.0) return false;
      continue;
    }
    bool has_bottleneck = false;
    for (int l : flows[f]) {
      if (capacity[l] - used[l] > tol * std::max(1.0, capacity[l])) continue;
      double max_on_link = 0;
      for (size_t g = 0; g < flows.size(); ++g)
        for (int x : flows[g])
          if (x == l) max_on_link = std::max(max_on_link, rate[g]);
      if (rate[f] >= max_on_link - tol * std::max(1.0, max_on_link)) {
        has_bottleneck = true;
        break;
      }
    }
    if (!has_bottleneck) return false;
  }
  return true;
}

// Does the fabric connect `leaf` to `spine` on up links, with the spine able
// to exit toward some other leaf pair? Plain graph reachability.
inline bool leaf_spine_reachable(const c4sim::Topology& topo, int leaf, int spine) {
  const int up = topo.uplink(leaf, spine);
  if (!topo.link(up).up()) return false;
  for (size_t other = 0; other < topo.leaves.size(); ++other) {
    if (static_cast<int>(other) / 2 == leaf / 2) continue;
    if (topo.link(topo.uplink(static_cast<int>(other), spine)).up()) return true;
  }
  return false;
}

// Replays a transfer schedule over symbolic data: every rank starts with its
// own contribution per segment; sends move the sender's current segment
// contents. All ranks must end holding the full set for every segment.
inline bool allreduce_schedule_correct(const c4sim::TransferSchedule& sched) {
  const int n = sched.ranks;
  std::vector<std::vector<std::set<int>>> have(n, std::vector<std::set<int>>(n));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) have[r][c] = {r};

  for (const auto& step : sched.steps) {
    // All sends in a step read pre-step state.
    std::vector<std::pair<int, std::pair<int, std::set<int>>>> moves;
    std::set<int> senders, receivers;
    for (const auto& t : step) {
      if (!senders.insert(t.sender).second) return false;    // one send per rank
      if (!receivers.insert(t.receiver).second) return false;
      moves.push_back({t.receiver, {t.chunk, have[t.sender][t.chunk]}});
    }
    if (static_cast<int>(step.size()) != n) return false;
    for (auto& [recv, payload] : moves) {
      auto& [chunk, contribution] = payload;
      have[recv][chunk].insert(contribution.begin(), contribution.end());
    }
  }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (static_cast<int>(have[r][c].size()) != n) return false;
  return true;
}

}  // namespace oracle
