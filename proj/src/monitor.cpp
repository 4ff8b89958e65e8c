// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include "c4sim/monitor.hpp"

#include <ostream>
#include <sstream>

#include "c4sim/text.hpp"

namespace c4sim {

namespace {

std::string fmt_time_field(double v) {
  if (v == kPending) return "-";
  if (v == kFailed) return "-1";
  return fmt_double(v);
}

double parse_time_field(std::string_view s, const std::string& what) {
  if (s == "-") return kPending;
  if (s == "-1") return kFailed;
  return parse_double(s, what);
}

}  // namespace

double MonitorRecord::ts() const {
  switch (layer) {
    case MonitorLayer::communicator: return comm.ts;
    case MonitorLayer::operation: return op.ts;
    case MonitorLayer::transport: return transport.ts;
  }
  return 0.0;
}

std::string MonitorRecord::to_line() const {
  std::ostringstream os;
  switch (layer) {
    case MonitorLayer::communicator: {
      os << "C\t" << fmt_double(comm.ts) << '\t' << comm.comm_id << '\t' << comm.rank_count;
      for (const auto& [node, gpu] : comm.assignment) os << '\t' << node << ':' << gpu;
      break;
    }
    case MonitorLayer::operation: {
      os << "O\t" << fmt_double(op.ts) << '\t' << op.rank << '\t' << op.comm_id << '\t'
         << op.op_seq << '\t' << op.kind << '\t' << op.algo << '\t' << op.element_count
         << '\t' << fmt_double(op.start_s) << '\t' << fmt_time_field(op.end_s);
      break;
    }
    case MonitorLayer::transport: {
      const TransportRecord& t = transport;
      os << "T\t" << fmt_double(t.ts) << '\t' << t.rank << '\t' << t.qp_id << '\t' << t.peer
         << '\t' << t.message_seq << '\t' << t.bytes << '\t' << fmt_double(t.post_s) << '\t'
         << fmt_double(t.receiver_ready_s) << '\t' << fmt_time_field(t.complete_s);
      break;
    }
  }
  return os.str();
}

MonitorRecord make_comm_record(const CommRecord& c) {
  MonitorRecord r;
  r.layer = MonitorLayer::communicator;
  r.comm = c;
  return r;
}

MonitorRecord make_op_record(const OpRecord& o) {
  MonitorRecord r;
  r.layer = MonitorLayer::operation;
  r.op = o;
  return r;
}

MonitorRecord make_transport_record(const TransportRecord& t) {
  MonitorRecord r;
  r.layer = MonitorLayer::transport;
  r.transport = t;
  return r;
}

MonitorRecord parse_trace_line(const std::string& line, int line_no) {
  const std::string where = "trace line " + std::to_string(line_no);
  auto fields = split_ws(line);
  if (fields.empty()) throw ValidationError(where + ": empty line");
  const std::string_view tag = fields[0];
  try {
    if (tag == "C") {
      if (fields.size() < 4) throw ValidationError("short C record");
      CommRecord c;
      c.ts = parse_double(fields[1], "ts");
      c.comm_id = parse_int(fields[2], "comm");
      c.rank_count = parse_int(fields[3], "nranks");
      for (size_t i = 4; i < fields.size(); ++i) {
        auto pos = fields[i].find(':');
        if (pos == std::string_view::npos) throw ValidationError("bad assignment token");
        c.assignment.emplace_back(parse_int(fields[i].substr(0, pos), "node"),
                                  parse_int(fields[i].substr(pos + 1), "gpu"));
      }
      if (static_cast<int>(c.assignment.size()) != c.rank_count)
        throw ValidationError("assignment count mismatch");
      return make_comm_record(c);
    }
    if (tag == "O") {
      if (fields.size() != 10) throw ValidationError("O record needs 10 fields");
      OpRecord o;
      o.ts = parse_double(fields[1], "ts");
      o.rank = parse_int(fields[2], "rank");
      o.comm_id = parse_int(fields[3], "comm");
      o.op_seq = parse_int(fields[4], "opseq");
      o.kind = std::string(fields[5]);
      o.algo = std::string(fields[6]);
      o.element_count = parse_i64(fields[7], "count");
      o.start_s = parse_double(fields[8], "start");
      o.end_s = parse_time_field(fields[9], "end");
      return make_op_record(o);
    }
    if (tag == "T") {
      if (fields.size() != 10) throw ValidationError("T record needs 10 fields");
      TransportRecord t;
      t.ts = parse_double(fields[1], "ts");
      t.rank = parse_int(fields[2], "rank");
      t.qp_id = parse_i64(fields[3], "qp");
      t.peer = parse_int(fields[4], "peer");
      t.message_seq = parse_i64(fields[5], "seq");
      t.bytes = parse_i64(fields[6], "bytes");
      t.post_s = parse_double(fields[7], "post");
      t.receiver_ready_s = parse_double(fields[8], "ready");
      t.complete_s = parse_time_field(fields[9], "complete");
      // QP identifiers are namespaced by communicator: uid = comm * 1e6 + index.
      t.comm_id = static_cast<int>(t.qp_id / 1000000);
      return make_transport_record(t);
    }
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
  throw ValidationError(where + ": unknown record tag '" + std::string(tag) + "'");
}

void TraceWriter::write(const MonitorRecord& r) { os_ << r.to_line() << '\n'; }

std::vector<MonitorRecord> read_trace(std::istream& is) {
  std::vector<MonitorRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.push_back(parse_trace_line(std::string(t), line_no));
  }
  return out;
}

}  // namespace c4sim
