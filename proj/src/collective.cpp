// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include "c4sim/collective.hpp"

#include <algorithm>
#include <ostream>

namespace c4sim {

int64_t ring_segment_bytes(int64_t total_bytes, int ranks, int chunk) {
  const int64_t per = (total_bytes + ranks - 1) / ranks;  // ceil
  const int64_t start = per * chunk;
  if (start >= total_bytes) return 0;
  return std::min(per, total_bytes - start);
}

TransferSchedule ring_allreduce_schedule(int n, int64_t total_bytes) {
  if (n < 2) throw ValidationError("ring_allreduce_schedule: need at least 2 ranks");
  if (total_bytes < n)
    throw ValidationError("ring_allreduce_schedule: total_bytes must be >= rank count");

  TransferSchedule sched;
  sched.ranks = n;
  sched.total_bytes = total_bytes;
  sched.steps.reserve(2 * (n - 1));

  auto mod = [n](int x) { return ((x % n) + n) % n; };

  // Reduce-scatter: step s, rank r sends segment (r - s) mod n to r+1.
  for (int s = 0; s <= n - 2; ++s) {
    std::vector<TransferStep> step;
    step.reserve(n);
    for (int r = 0; r < n; ++r) {
      const int chunk = mod(r - s);
      step.push_back({r, mod(r + 1), chunk, ring_segment_bytes(total_bytes, n, chunk)});
    }
    sched.steps.push_back(std::move(step));
  }
  // Allgather: step s, rank r sends segment (r + 1 - s) mod n to r+1.
  for (int s = 0; s <= n - 2; ++s) {
    std::vector<TransferStep> step;
    step.reserve(n);
    for (int r = 0; r < n; ++r) {
      const int chunk = mod(r + 1 - s);
      step.push_back({r, mod(r + 1), chunk, ring_segment_bytes(total_bytes, n, chunk)});
    }
    sched.steps.push_back(std::move(step));
  }
  return sched;
}

void TransferSchedule::write(std::ostream& os) const {
  for (size_t s = 0; s < steps.size(); ++s)
    for (const TransferStep& t : steps[s])
      os << "step " << s << " send " << t.sender << "→" << t.receiver << " chunk "
         << t.chunk << " bytes " << t.bytes << '\n';
}

std::vector<int> split_round_robin(int chunk_count, int qp_count) {
  if (qp_count < 1) throw ValidationError("split_round_robin: need at least one QP");
  std::vector<int> assignment(chunk_count);
  for (int i = 0; i < chunk_count; ++i) assignment[i] = i % qp_count;
  return assignment;
}

std::vector<int64_t> split_chunks(int64_t segment_bytes, int64_t chunk_bytes) {
  std::vector<int64_t> out;
  if (segment_bytes <= 0) return out;
  int64_t left = segment_bytes;
  while (left > 0) {
    const int64_t b = std::min(left, chunk_bytes);
    out.push_back(b);
    left -= b;
  }
  return out;
}

double busbw_factor(int n) { return 2.0 * (n - 1) / n; }

double algbw_gbps(int64_t total_bytes, double elapsed_s) {
  if (elapsed_s <= 0) throw ValidationError("algbw: elapsed time must be positive");
  return static_cast<double>(total_bytes) * 8.0 / elapsed_s / 1e9;
}

double busbw_gbps(int64_t total_bytes, double elapsed_s, int n) {
  return algbw_gbps(total_bytes, elapsed_s) * busbw_factor(n);
}

}  // namespace c4sim
