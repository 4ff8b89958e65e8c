// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "c4sim/fairshare.hpp"
#include "c4sim/rng.hpp"
#include "oracles.hpp"

using namespace c4sim;

TEST_CASE("fair share: two flows on one link split evenly") {
  FairShareInput in;
  in.capacity = {200.0};
  in.flows = {{0}, {0}};
  auto r = fair_share(in);
  CHECK(r[0] == doctest::Approx(100.0));
  CHECK(r[1] == doctest::Approx(100.0));
}

TEST_CASE("fair share: classic three-flow water-filling") {
  // A on {L1}, B on {L1,L2}, C on {L2}, all 200: everyone gets 100.
  FairShareInput in;
  in.capacity = {200.0, 200.0};
  in.flows = {{0}, {0, 1}, {1}};
  auto r = fair_share(in);
  for (double x : r) CHECK(x == doctest::Approx(100.0));
}

TEST_CASE("fair share: reroute concentration leaves other ports idle") {
  // 4 flows forced onto one 200G port share 50 each.
  FairShareInput in;
  in.capacity = {200.0, 200.0};
  in.flows = {{0}, {0}, {0}, {0}};
  auto r = fair_share(in);
  for (double x : r) CHECK(x == doctest::Approx(50.0));
}

TEST_CASE("fair share: zero-capacity resource starves its flows") {
  FairShareInput in;
  in.capacity = {0.0, 200.0};
  in.flows = {{0, 1}, {1}};
  auto r = fair_share(in);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == doctest::Approx(200.0));
}

TEST_CASE("fair share: matches brute-force water-filling on random instances") {
  Rng rng(77, "fairshare");
  for (int trial = 0; trial < 500; ++trial) {
    const int nl = rng.next_int(2, 30);
    const int nf = rng.next_int(1, 20);
    FairShareInput in;
    for (int l = 0; l < nl; ++l) in.capacity.push_back(rng.uniform(10, 400));
    for (int f = 0; f < nf; ++f) {
      const int paths = rng.next_int(1, 4);
      std::vector<int> path;
      for (int p = 0; p < paths; ++p) path.push_back(rng.next_int(0, nl - 1));
      std::sort(path.begin(), path.end());
      path.erase(std::unique(path.begin(), path.end()), path.end());
      in.flows.push_back(path);
    }
    auto got = fair_share(in);
    auto want = oracle::waterfill(in.capacity, in.flows);
    for (size_t f = 0; f < got.size(); ++f)
      CHECK(got[f] == doctest::Approx(want[f]).epsilon(1e-9));
    CHECK(oracle::is_max_min(in.capacity, in.flows, got));
  }
}

TEST_CASE("fair share: work conservation") {
  // Any flow with headroom on its whole path must have positive rate.
  Rng rng(88, "conserve");
  for (int trial = 0; trial < 200; ++trial) {
    const int nl = rng.next_int(2, 12);
    const int nf = rng.next_int(1, 10);
    FairShareInput in;
    for (int l = 0; l < nl; ++l) in.capacity.push_back(rng.uniform(1, 300));
    for (int f = 0; f < nf; ++f)
      in.flows.push_back({rng.next_int(0, nl - 1)});
    auto r = fair_share(in);
    for (size_t f = 0; f < r.size(); ++f) CHECK(r[f] > 0.0);
  }
}
