// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include "c4sim/c4d.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "c4sim/error.hpp"

namespace c4sim::c4d {

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::healthy: return "healthy";
    case Verdict::connection_slow: return "connection_slow";
    case Verdict::source_slow: return "source_slow";
    case Verdict::destination_slow: return "destination_slow";
    case Verdict::node_slow: return "node_slow";
    case Verdict::noncomm_slow: return "noncomm_slow";
    case Verdict::comm_hang: return "comm_hang";
    case Verdict::noncomm_hang: return "noncomm_hang";
    case Verdict::crash: return "crash";
  }
  return "?";
}

std::string Diagnosis::window_token() const {
  std::ostringstream os;
  os << comm_id << ':' << epoch << ':' << window;
  return os.str();
}

std::string Diagnosis::targets_token() const {
  if (targets.empty()) return "-";
  std::ostringstream os;
  for (size_t i = 0; i < targets.size(); ++i) os << (i ? "," : "") << targets[i];
  return os.str();
}

std::string Diagnosis::cells_token() const {
  if (cells.empty()) return "-";
  std::ostringstream os;
  for (size_t i = 0; i < cells.size(); ++i)
    os << (i ? "," : "") << cells[i].first << '>' << cells[i].second;
  return os.str();
}

std::string Diagnosis::to_line() const {
  return "D " + window_token() + ' ' + verdict_name(verdict) + ' ' + targets_token() +
         ' ' + cells_token();
}

void LatencyMatrix::add(int i, int j, double delay_per_byte) {
  const size_t idx = static_cast<size_t>(i) * n + j;
  const int c = count[idx];
  mean[idx] = (mean[idx] * c + delay_per_byte) / (c + 1);
  count[idx] = c + 1;
}

int LatencyMatrix::present_cells() const {
  int c = 0;
  for (int v : count) c += v > 0 ? 1 : 0;
  return c;
}

LatencyMatrix build_latency_matrix(const std::vector<TransportRecord>& records, int n,
                                   int op_seq_lo, int op_seq_hi) {
  LatencyMatrix m;
  m.n = n;
  m.mean.assign(static_cast<size_t>(n) * n, 0.0);
  m.count.assign(static_cast<size_t>(n) * n, 0);
  for (const TransportRecord& r : records) {
    if (r.op_seq < op_seq_lo || r.op_seq > op_seq_hi) continue;
    if (r.complete_s < 0 || r.bytes <= 0) continue;  // pending or torn down
    if (r.rank == r.peer || r.rank >= n || r.peer >= n) continue;
    m.add(r.rank, r.peer, (r.complete_s - r.post_s) / static_cast<double>(r.bytes));
  }
  return m;
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

struct FlagRule {
  double median = 0.0;
  double threshold = 0.0;
  double floor = 0.0;
  bool flagged(double x) const { return x > threshold && x > floor; }
};

FlagRule mad_rule(const std::vector<double>& values, const DetectorParams& p) {
  FlagRule rule;
  rule.median = median_of(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double x : values) dev.push_back(std::fabs(x - rule.median));
  const double mad = median_of(dev);
  rule.threshold = rule.median + p.k_mad * 1.4826 * mad;
  rule.floor = rule.median * (1.0 + p.rel_floor);
  return rule;
}

}  // namespace

MatrixClassification classify_matrix(const LatencyMatrix& m, const DetectorParams& p) {
  MatrixClassification out;
  if (m.present_cells() < 4) return out;

  std::vector<double> values;
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j)
      if (m.present(i, j)) values.push_back(m.at(i, j));
  const FlagRule rule = mad_rule(values, p);

  std::vector<std::pair<int, int>> flagged;
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j)
      if (m.present(i, j) && rule.flagged(m.at(i, j))) flagged.push_back({i, j});
  if (flagged.empty()) return out;

  // Row / column votes need at least two present cells to attribute an
  // endpoint; a lone pair can only ever accuse the connection itself.
  std::set<int> sources, destinations;
  for (int i = 0; i < m.n; ++i) {
    int present = 0, hot = 0;
    for (int j = 0; j < m.n; ++j)
      if (m.present(i, j)) {
        ++present;
        hot += rule.flagged(m.at(i, j)) ? 1 : 0;
      }
    if (present >= 2 && hot >= p.rho * present) sources.insert(i);
  }
  for (int j = 0; j < m.n; ++j) {
    int present = 0, hot = 0;
    for (int i = 0; i < m.n; ++i)
      if (m.present(i, j)) {
        ++present;
        hot += rule.flagged(m.at(i, j)) ? 1 : 0;
      }
    if (present >= 2 && hot >= p.rho * present) destinations.insert(j);
  }

  std::set<int> node_level;
  for (int r : sources)
    if (destinations.count(r)) node_level.insert(r);
  for (int r : node_level) {
    sources.erase(r);
    destinations.erase(r);
  }

  // Cells not absorbed by a row/column verdict: an in+out pattern meeting on
  // one rank is that rank's NIC speaking, the rest are single connections.
  auto covered = [&](const std::pair<int, int>& c) {
    return sources.count(c.first) || destinations.count(c.second) ||
           node_level.count(c.first) || node_level.count(c.second);
  };
  std::set<int> cell_out, cell_in;
  for (const auto& c : flagged)
    if (!covered(c)) {
      cell_out.insert(c.first);
      cell_in.insert(c.second);
    }
  for (int r : cell_out)
    if (cell_in.count(r)) node_level.insert(r);

  auto assign = [&](Verdict v, std::set<int> targets) {
    out.verdict = v;
    out.targets.assign(targets.begin(), targets.end());
    for (const auto& c : flagged)
      if (targets.count(c.first) || targets.count(c.second) ||
          v == Verdict::connection_slow)
        out.cells.push_back(c);
  };

  if (!node_level.empty()) {
    assign(Verdict::node_slow, node_level);
  } else if (!sources.empty()) {
    assign(Verdict::source_slow, sources);
  } else if (!destinations.empty()) {
    assign(Verdict::destination_slow, destinations);
  } else {
    out.verdict = Verdict::connection_slow;
    out.cells = flagged;
    std::set<int> t;
    for (const auto& c : flagged) {
      t.insert(c.first);
      t.insert(c.second);
    }
    out.targets.assign(t.begin(), t.end());
  }
  return out;
}

std::map<std::pair<int, int>, double> entry_lags(
    const std::vector<TransportRecord>& records, int op_seq_lo, int op_seq_hi) {
  std::map<std::pair<int, int>, const TransportRecord*> first;
  for (const TransportRecord& r : records) {
    if (r.op_seq < op_seq_lo || r.op_seq > op_seq_hi) continue;
    if (r.complete_s < 0 || r.bytes <= 0) continue;
    auto key = std::make_pair(r.rank, r.peer);
    auto it = first.find(key);
    if (it == first.end() || r.post_s < it->second->post_s ||
        (r.post_s == it->second->post_s && r.message_seq < it->second->message_seq))
      first[key] = &r;
  }
  std::map<std::pair<int, int>, double> lags;
  for (const auto& [key, rec] : first)
    lags[key] = rec->complete_s - rec->receiver_ready_s;
  return lags;
}

MatrixClassification classify_entry_lags(
    const std::map<std::pair<int, int>, double>& lags, int n, const DetectorParams& p) {
  MatrixClassification out;
  if (static_cast<int>(lags.size()) < 4) return out;
  std::vector<double> values;
  for (const auto& [k, v] : lags) values.push_back(v);
  const FlagRule rule = mad_rule(values, p);

  std::vector<int> out_present(n, 0), out_hot(n, 0), in_hot(n, 0);
  std::vector<std::pair<int, int>> flagged;
  for (const auto& [k, v] : lags) {
    ++out_present[k.first];
    if (rule.flagged(v)) {
      ++out_hot[k.first];
      ++in_hot[k.second];
      flagged.push_back(k);
    }
  }
  std::set<int> targets;
  for (int r = 0; r < n; ++r)
    if (out_present[r] > 0 && out_hot[r] >= p.rho * out_present[r] && in_hot[r] == 0)
      targets.insert(r);
  if (targets.empty()) return out;
  out.verdict = Verdict::noncomm_slow;
  out.targets.assign(targets.begin(), targets.end());
  for (const auto& c : flagged)
    if (targets.count(c.first)) out.cells.push_back(c);
  return out;
}

// --- Analyzer ---

Analyzer::Analyzer(DetectorParams params) : params_(params) {}

double Analyzer::timeout_s(const CommState& c) const {
  if (static_cast<int>(c.closed_durations.size()) < params_.min_history_windows)
    return std::numeric_limits<double>::infinity();
  std::vector<double> d(c.closed_durations.begin(), c.closed_durations.end());
  return params_.hang_timeout_iters * median_of(std::move(d));
}

void Analyzer::emit(Diagnosis d, double now) {
  d.t_emitted = now;
  emitted_.push_back(std::move(d));
}

void Analyzer::classify_closed_window(int comm_id, CommState& c, int op_seq, double now) {
  auto& w = c.windows.at(op_seq);
  Diagnosis d;
  d.comm_id = comm_id;
  d.epoch = c.epoch;
  d.window = op_seq;

  LatencyMatrix m = build_latency_matrix(w.completed, c.rank_count, op_seq, op_seq);
  MatrixClassification mc = classify_matrix(m, params_);
  if (mc.verdict == Verdict::healthy) {
    auto lags = entry_lags(w.completed, op_seq, op_seq);
    mc = classify_entry_lags(lags, c.rank_count, params_);
  }
  d.verdict = mc.verdict;
  d.targets = mc.targets;
  d.cells = mc.cells;
  emit(std::move(d), now);
}

void Analyzer::ingest(const MonitorRecord& rec) {
  switch (rec.layer) {
    case MonitorLayer::communicator: {
      auto it = comms_.find(rec.comm.comm_id);
      if (it == comms_.end()) {
        CommState c;
        c.rank_count = rec.comm.rank_count;
        comms_.emplace(rec.comm.comm_id, std::move(c));
      } else {
        // Re-initialization after a restart: new epoch, clean slate.
        const int epoch = it->second.epoch + 1;
        CommState c;
        c.rank_count = rec.comm.rank_count;
        c.epoch = epoch;
        it->second = std::move(c);
      }
      return;
    }
    case MonitorLayer::operation: {
      auto it = comms_.find(rec.op.comm_id);
      if (it == comms_.end())
        throw ValidationError("trace references undeclared communicator " +
                              std::to_string(rec.op.comm_id));
      CommState& c = it->second;
      if (c.halted) return;
      auto& w = c.windows[rec.op.op_seq];
      if (rec.op.end_s == kPending) {
        c.open_op[rec.op.rank] = rec.op.op_seq;
        w.started.insert(rec.op.rank);
        w.first_start = std::min(w.first_start, rec.op.start_s);
      } else {
        w.ended.insert(rec.op.rank);
        w.last_end = std::max(w.last_end, rec.op.end_s);
        auto oit = c.open_op.find(rec.op.rank);
        if (oit != c.open_op.end() && oit->second == rec.op.op_seq) c.open_op.erase(oit);
        if (static_cast<int>(w.ended.size()) == c.rank_count) {
          // Iteration period: cadence between consecutive window closes;
          // the first window contributes its own collective span.
          const double period = c.prev_window_end >= 0
                                    ? w.last_end - c.prev_window_end
                                    : w.last_end - w.first_start;
          c.prev_window_end = w.last_end;
          c.closed_durations.push_back(period);
          while (c.closed_durations.size() > 5) c.closed_durations.pop_front();
          classify_closed_window(rec.op.comm_id, c, rec.op.op_seq, rec.op.ts);
          c.windows.erase(rec.op.op_seq);
        }
      }
      return;
    }
    case MonitorLayer::transport: {
      const TransportRecord& t = rec.transport;
      auto it = comms_.find(t.comm_id);
      if (it == comms_.end())
        throw ValidationError("trace references undeclared communicator " +
                              std::to_string(t.comm_id));
      CommState& c = it->second;
      if (c.halted) return;
      if (t.complete_s == kFailed) {
        // Connection torn down: the peer process is gone.
        if (!c.crashed.count(t.peer)) {
          c.crashed.insert(t.peer);
          Diagnosis d;
          d.comm_id = t.comm_id;
          d.epoch = c.epoch;
          d.window = c.windows.empty() ? 0 : c.windows.rbegin()->first;
          d.verdict = Verdict::crash;
          d.targets = {t.peer};
          emit(std::move(d), t.ts);
          c.halted = true;
        }
        return;
      }
      if (t.complete_s == kPending) {
        auto oit = c.open_op.find(t.rank);
        if (oit == c.open_op.end()) return;  // sender outside any op; drop
        TransportRecord stored = t;
        stored.op_seq = oit->second;
        c.windows[stored.op_seq].open_msgs[{t.qp_id, t.message_seq}] = stored;
        return;
      }
      // Completion: match the pending record to find its window.
      for (auto& [op, w] : c.windows) {
        auto mit = w.open_msgs.find({t.qp_id, t.message_seq});
        if (mit != w.open_msgs.end()) {
          TransportRecord done = t;
          done.op_seq = op;
          w.completed.push_back(done);
          w.open_msgs.erase(mit);
          return;
        }
      }
      // No pending seen (trace truncated at the front); attribute to the
      // sender's open op if any.
      auto oit = c.open_op.find(t.rank);
      if (oit != c.open_op.end()) {
        TransportRecord done = t;
        done.op_seq = oit->second;
        c.windows[done.op_seq].completed.push_back(done);
      }
      return;
    }
  }
}

void Analyzer::check_hangs(int comm_id, CommState& c, double now) {
  if (c.halted) return;
  const double timeout = timeout_s(c);
  if (!std::isfinite(timeout)) return;

  // Stalled senders: posted to the wire, never completed. The deadline
  // comparison mirrors next_deadline() exactly so firing cannot stall on
  // rounding.
  std::set<int> stalled;
  int stall_op = -1;
  for (const auto& [op, w] : c.windows)
    for (const auto& [key, msg] : w.open_msgs)
      if (now >= msg.post_s + timeout) {
        stalled.insert(msg.rank);
        if (stall_op < 0) stall_op = op;
      }
  if (!stalled.empty()) {
    Diagnosis d;
    d.comm_id = comm_id;
    d.epoch = c.epoch;
    d.window = stall_op;
    d.verdict = Verdict::comm_hang;
    d.targets.assign(stalled.begin(), stalled.end());
    emit(std::move(d), now);
    c.halted = true;
    return;
  }

  // Stragglers that never entered the operation their peers are in.
  for (const auto& [op, w] : c.windows) {
    if (w.started.empty() || static_cast<int>(w.started.size()) == c.rank_count) continue;
    if (now < w.first_start + timeout) continue;
    std::vector<int> missing;
    for (int r = 0; r < c.rank_count; ++r)
      if (!w.started.count(r) && !c.crashed.count(r)) missing.push_back(r);
    if (missing.empty()) continue;
    Diagnosis d;
    d.comm_id = comm_id;
    d.epoch = c.epoch;
    d.window = op;
    d.verdict = Verdict::noncomm_hang;
    d.targets = missing;
    emit(std::move(d), now);
    c.halted = true;
    return;
  }
}

double Analyzer::next_deadline() const {
  double deadline = std::numeric_limits<double>::infinity();
  for (const auto& [id, c] : comms_) {
    if (c.halted) continue;
    const double timeout = timeout_s(c);
    if (!std::isfinite(timeout)) continue;
    for (const auto& [op, w] : c.windows) {
      for (const auto& [key, msg] : w.open_msgs)
        deadline = std::min(deadline, msg.post_s + timeout);
      if (!w.started.empty() && static_cast<int>(w.started.size()) < c.rank_count)
        deadline = std::min(deadline, w.first_start + timeout);
    }
  }
  return deadline;
}

void Analyzer::advance(double now) {
  for (auto& [id, c] : comms_) check_hangs(id, c, now);
}

void Analyzer::finish(double now) {
  while (next_deadline() <= now) advance(next_deadline());
  advance(now);
}

std::vector<Diagnosis> Analyzer::take_diagnoses() {
  std::vector<Diagnosis> out(emitted_.begin() + drained_, emitted_.end());
  drained_ = emitted_.size();
  return out;
}

std::vector<Diagnosis> replay_trace(const std::vector<MonitorRecord>& records,
                                    DetectorParams params) {
  Analyzer analyzer(params);
  for (const MonitorRecord& rec : records) {
    const double ts = rec.ts();
    while (analyzer.next_deadline() <= ts) analyzer.advance(analyzer.next_deadline());
    analyzer.ingest(rec);
  }
  // Run the remaining timeout deadlines out; the trace carries no horizon.
  while (std::isfinite(analyzer.next_deadline()))
    analyzer.advance(analyzer.next_deadline());
  return analyzer.take_diagnoses();
}

// --- master ---

bool verdict_is_node_attributable(Verdict v) {
  switch (v) {
    case Verdict::source_slow:
    case Verdict::destination_slow:
    case Verdict::node_slow:
    case Verdict::noncomm_slow:
    case Verdict::comm_hang:
    case Verdict::noncomm_hang:
    case Verdict::crash:
      return true;
    default:
      return false;
  }
}

MasterAction master_step(const Diagnosis& d, int target_node, ClusterState& cluster) {
  MasterAction action;
  if (!verdict_is_node_attributable(d.verdict)) return action;
  if (cluster.isolated_nodes.count(target_node)) return action;  // idempotent
  cluster.isolated_nodes.insert(target_node);
  action.node = target_node;
  if (cluster.backup_pool.empty()) {
    action.kind = MasterAction::Kind::hold;
    return action;
  }
  action.kind = MasterAction::Kind::isolate_restart;
  action.replacement = cluster.backup_pool.front();
  cluster.backup_pool.erase(cluster.backup_pool.begin());
  return action;
}

// --- downtime ---

DowntimeAggregate downtime_breakdown(const std::vector<Incident>& incidents,
                                     double wall_time_s) {
  if (wall_time_s <= 0) throw ValidationError("downtime_breakdown: wall time must be positive");
  std::vector<int> bad;
  DowntimeAggregate agg;
  for (const Incident& inc : incidents) {
    const bool ok = inc.t_last_checkpoint <= inc.t_error && inc.t_error <= inc.t_detect &&
                    inc.t_detect <= inc.t_diagnose && inc.t_diagnose <= inc.t_isolated &&
                    inc.t_isolated <= inc.t_restart_done;
    if (!ok) {
      bad.push_back(inc.id);
      continue;
    }
    agg.post_checkpoint += inc.t_error - inc.t_last_checkpoint;
    agg.detection += inc.t_detect - inc.t_error;
    agg.diagnosis_isolation += inc.t_isolated - inc.t_detect;
    agg.re_initialization += inc.t_restart_done - inc.t_isolated;
  }
  if (!bad.empty()) {
    std::ostringstream os;
    os << "downtime_breakdown: incident lifecycle out of order for";
    for (int id : bad) os << ' ' << id;
    throw ValidationError(os.str());
  }
  agg.post_checkpoint /= wall_time_s;
  agg.detection /= wall_time_s;
  agg.diagnosis_isolation /= wall_time_s;
  agg.re_initialization /= wall_time_s;
  return agg;
}

DowntimeTrial run_month_trial(const DowntimeModelParams& p, Rng rng) {
  DowntimeTrial t;
  t.incidents = rng.poisson(p.incident_rate_per_month);
  for (int i = 0; i < t.incidents; ++i) {
    t.frac.post_checkpoint += rng.uniform(0.0, p.checkpoint_interval_h);
    t.frac.detection += rng.exponential(p.detection_mean_h);
    t.frac.diagnosis_isolation += rng.exponential(p.diagnosis_mean_h);
    t.frac.re_initialization += rng.exponential(p.reinit_mean_h);
  }
  t.frac.post_checkpoint /= p.month_h;
  t.frac.detection /= p.month_h;
  t.frac.diagnosis_isolation /= p.month_h;
  t.frac.re_initialization /= p.month_h;
  return t;
}

DowntimeAggregate closed_form_downtime(const DowntimeModelParams& p) {
  DowntimeAggregate agg;
  const double scale = p.incident_rate_per_month / p.month_h;
  agg.post_checkpoint = scale * p.checkpoint_interval_h / 2.0;
  agg.detection = scale * p.detection_mean_h;
  agg.diagnosis_isolation = scale * p.diagnosis_mean_h;
  agg.re_initialization = scale * p.reinit_mean_h;
  return agg;
}

}  // namespace c4sim::c4d
