// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include "c4sim/rng.hpp"

#include <cmath>

namespace c4sim {

double Rng::exponential(double mean) {
  double u = next_double();
  if (u >= 1.0) u = 0.9999999999999999;
  return -mean * std::log1p(-u);
}

int Rng::poisson(double mean) {
  // Knuth's product method; fine for the incident rates this model uses.
  const double limit = std::exp(-mean);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= next_double();
  } while (p > limit);
  return k - 1;
}

}  // namespace c4sim
