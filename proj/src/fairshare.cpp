// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include "c4sim/fairshare.hpp"

#include <algorithm>
#include <limits>

namespace c4sim {

std::vector<double> fair_share(const FairShareInput& in) {
  const size_t nf = in.flows.size();
  const size_t nl = in.capacity.size();
  std::vector<double> rate(nf, 0.0);
  if (nf == 0) return rate;

  std::vector<char> frozen(nf, 0);
  std::vector<double> used(nl, 0.0);
  std::vector<int> active(nl, 0);
  for (size_t f = 0; f < nf; ++f)
    for (int l : in.flows[f]) ++active[l];

  size_t remaining = nf;
  // Zero-capacity resources freeze their flows at 0 immediately.
  for (size_t f = 0; f < nf; ++f) {
    for (int l : in.flows[f]) {
      if (in.capacity[l] <= 0.0) {
        frozen[f] = 1;
        --remaining;
        for (int m : in.flows[f]) --active[m];
        break;
      }
    }
  }

  double level = 0.0;
  while (remaining > 0) {
    // Smallest uniform increment that saturates some resource.
    double delta = std::numeric_limits<double>::infinity();
    for (size_t l = 0; l < nl; ++l) {
      if (active[l] <= 0) continue;
      const double head = (in.capacity[l] - used[l]) / active[l];
      delta = std::min(delta, head);
    }
    if (!(delta < std::numeric_limits<double>::infinity())) break;
    if (delta < 0) delta = 0;
    level += delta;
    for (size_t l = 0; l < nl; ++l)
      if (active[l] > 0) used[l] += delta * active[l];

    // Freeze flows on saturated resources.
    const double eps = 1e-12;
    std::vector<char> saturated(nl, 0);
    for (size_t l = 0; l < nl; ++l)
      if (active[l] > 0 && in.capacity[l] - used[l] <= eps * std::max(1.0, in.capacity[l]))
        saturated[l] = 1;
    bool any = false;
    for (size_t f = 0; f < nf; ++f) {
      if (frozen[f]) continue;
      bool hit = false;
      for (int l : in.flows[f])
        if (saturated[l]) { hit = true; break; }
      if (hit) {
        frozen[f] = 1;
        rate[f] = level;
        --remaining;
        any = true;
        for (int l : in.flows[f]) --active[l];
      }
    }
    if (!any) break;  // numeric stall; everything left keeps `level`
  }
  for (size_t f = 0; f < nf; ++f)
    if (!frozen[f]) rate[f] = level;
  return rate;
}

}  // namespace c4sim
