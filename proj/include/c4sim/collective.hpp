// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "c4sim/error.hpp"

namespace c4sim {

struct RankId {
  int node = 0;
  int gpu = 0;
};

struct Communicator {
  int comm_id = 0;
  std::vector<RankId> ranks;  // communicator rank r -> placement
  int channels = 1;
  int qps_per_channel = 2;
};

struct TransferStep {
  int sender = 0;    // communicator ranks
  int receiver = 0;
  int chunk = 0;     // ring segment index
  int64_t bytes = 0;
};

// Ring allreduce: reduce-scatter then allgather, 2(n-1) steps, every rank
// sends and receives exactly one segment per step.
struct TransferSchedule {
  int ranks = 0;
  int64_t total_bytes = 0;
  std::vector<std::vector<TransferStep>> steps;

  void write(std::ostream& os) const;
};

TransferSchedule ring_allreduce_schedule(int ranks, int64_t total_bytes);

// Size of ring segment `chunk` when total_bytes splits into n segments of
// ceil size with a short tail.
int64_t ring_segment_bytes(int64_t total_bytes, int ranks, int chunk);

// Static chunk-to-QP policy: chunk i -> QP i mod N. The dynamic policy lives
// in c4p::select_qp.
std::vector<int> split_round_robin(int chunk_count, int qp_count);

// Wire chunks for one ring segment: chunk_bytes-sized pieces, short tail.
std::vector<int64_t> split_chunks(int64_t segment_bytes, int64_t chunk_bytes);

double busbw_factor(int ranks);  // 2(n-1)/n for allreduce
double algbw_gbps(int64_t total_bytes, double elapsed_s);
double busbw_gbps(int64_t total_bytes, double elapsed_s, int ranks);

}  // namespace c4sim
