// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "c4sim/error.hpp"

namespace c4sim {

// Three-layer telemetry from the instrumented CCL. A message produces one
// record when it is posted to the wire (complete_s unset) and one when it
// finishes; a torn-down connection yields a failed record (complete_s < 0).
// Operation records follow the same begin/finish pattern.

enum class MonitorLayer { communicator, operation, transport };

inline constexpr double kPending = -1.0;  // serialized as '-'
inline constexpr double kFailed = -2.0;   // serialized as '-1'

struct CommRecord {
  double ts = 0.0;
  int comm_id = 0;
  int rank_count = 0;
  std::vector<std::pair<int, int>> assignment;  // rank -> (node, gpu)
};

struct OpRecord {
  double ts = 0.0;
  int rank = 0;
  int comm_id = 0;
  int op_seq = 0;
  std::string kind = "allreduce";
  std::string algo = "ring";
  int64_t element_count = 0;
  double start_s = 0.0;
  double end_s = kPending;
};

struct TransportRecord {
  double ts = 0.0;
  int rank = 0;  // sender's communicator rank
  int comm_id = 0;
  int64_t qp_id = 0;
  int peer = 0;  // receiver's communicator rank
  int64_t message_seq = 0;
  int64_t bytes = 0;
  double post_s = 0.0;
  double receiver_ready_s = 0.0;
  double complete_s = kPending;
  int op_seq = 0;
};

struct MonitorRecord {
  MonitorLayer layer = MonitorLayer::transport;
  CommRecord comm;
  OpRecord op;
  TransportRecord transport;

  double ts() const;
  std::string to_line() const;  // tab-separated trace line
};

MonitorRecord make_comm_record(const CommRecord& c);
MonitorRecord make_op_record(const OpRecord& o);
MonitorRecord make_transport_record(const TransportRecord& t);

// Parses one trace line; throws ValidationError naming the offending line
// number on malformed input.
MonitorRecord parse_trace_line(const std::string& line, int line_no);

class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& os) : os_(os) {}
  void write(const MonitorRecord& r);

 private:
  std::ostream& os_;
};

std::vector<MonitorRecord> read_trace(std::istream& is);

}  // namespace c4sim
