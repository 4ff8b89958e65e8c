// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace c4sim {

// Progressive-filling max-min fairness over capacitated resources. Callers
// flatten whatever they share (directed link halves, per-rank NVLink caps,
// per-flow rate caps) into one resource vector; a flow is a set of resource
// indices it traverses.
struct FairShareInput {
  std::vector<double> capacity;          // resource index -> capacity (Gbps)
  std::vector<std::vector<int>> flows;   // flow -> traversed resource indices
};

// Returns one rate per flow. Flows through a zero-capacity resource get 0.
std::vector<double> fair_share(const FairShareInput& in);

}  // namespace c4sim
