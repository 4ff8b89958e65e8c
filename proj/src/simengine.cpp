// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include "c4sim/simengine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include "c4sim/fairshare.hpp"
#include "c4sim/rng.hpp"
#include "c4sim/text.hpp"

namespace c4sim {

namespace {
constexpr double kBytesPerGbpsSec = 0.125e9;  // bytes/s carried by 1 Gbps
constexpr double kDoneEpsBytes = 1e-3;
}  // namespace

std::string fault_kind_name(FaultKind k) {
  switch (k) {
    case FaultKind::link_down: return "link_down";
    case FaultKind::link_up: return "link_up";
    case FaultKind::link_degraded: return "link_degraded";
    case FaultKind::slow_connection: return "slow_connection";
    case FaultKind::slow_compute: return "slow_compute";
    case FaultKind::nic_degraded: return "nic_degraded";
    case FaultKind::rank_crash: return "rank_crash";
    case FaultKind::comm_hang: return "comm_hang";
    case FaultKind::noncomm_hang: return "noncomm_hang";
  }
  return "?";
}

void validate_scenario(const Scenario& sc) {
  const int pairs = sc.topology.leaf_count / 2;
  if (sc.topology.leaf_count < 2 || sc.topology.leaf_count % 2 ||
      sc.topology.node_count != pairs * sc.topology.nodes_per_leaf_pair)
    throw ValidationError("scenario: inconsistent topology counts");

  std::set<std::pair<int, int>> used_gpus;
  for (const JobSpec& j : sc.jobs) {
    if (j.nodes.empty()) throw ValidationError("scenario: job without nodes");
    if (j.rank_count() < 2) throw ValidationError("scenario: job needs at least 2 ranks");
    if (j.channels < 1 || j.qps_per_channel < 1)
      throw ValidationError("scenario: channels and qps_per_channel must be >= 1");
    if (j.ranks_per_node < 1 || j.ranks_per_node > sc.topology.gpus_per_node)
      throw ValidationError("scenario: ranks_per_node out of range for job " + j.name);
    if (j.collective_bytes < j.rank_count())
      throw ValidationError("scenario: collective_bytes too small for job " + j.name);
    for (int n : j.nodes) {
      if (n < 0 || n >= sc.topology.node_count)
        throw ValidationError("scenario: job " + j.name + " references missing node " +
                              std::to_string(n));
      for (int g = 0; g < j.ranks_per_node; ++g)
        if (!used_gpus.insert({n, g}).second)
          throw ValidationError("scenario: gpu shared between jobs on node " +
                                std::to_string(n));
    }
  }
  for (int n : sc.backup_nodes) {
    if (n < 0 || n >= sc.topology.node_count)
      throw ValidationError("scenario: backup node out of range");
    for (int g = 0; g < sc.topology.gpus_per_node; ++g)
      if (used_gpus.count({n, g}))
        throw ValidationError("scenario: backup node " + std::to_string(n) + " is in use");
  }
  double prev = -1e300;
  const int link_count =
      sc.topology.node_count * sc.topology.nics_per_node * 2 +
      sc.topology.leaf_count * sc.topology.spine_count;
  for (const FaultEvent& f : sc.faults) {
    if (f.time_s < prev) throw ValidationError("scenario: fault times must be nondecreasing");
    prev = f.time_s;
    switch (f.kind) {
      case FaultKind::link_down:
      case FaultKind::link_up:
      case FaultKind::link_degraded:
        if (f.link < 0 || f.link >= link_count)
          throw ValidationError("scenario: fault targets missing link");
        break;
      case FaultKind::nic_degraded:
        if (f.node < 0 || f.node >= sc.topology.node_count || f.nic < 0 ||
            f.nic >= sc.topology.nics_per_node || (f.side != 0 && f.side != 1))
          throw ValidationError("scenario: nic_degraded targets missing port");
        break;
      default: {
        if (f.job < 0 || f.job >= static_cast<int>(sc.jobs.size()))
          throw ValidationError("scenario: fault targets missing job");
        const int n = sc.jobs[f.job].rank_count();
        const int r = f.kind == FaultKind::slow_connection ? f.src_rank : f.rank;
        if (r < 0 || r >= n) throw ValidationError("scenario: fault targets missing rank");
        if (f.kind == FaultKind::slow_connection && (f.dst_rank < 0 || f.dst_rank >= n))
          throw ValidationError("scenario: fault targets missing rank");
      }
    }
    if ((f.kind == FaultKind::link_degraded || f.kind == FaultKind::nic_degraded) &&
        !(f.factor > 0.0 && f.factor < 1.0))
      throw ValidationError("scenario: degraded factor must be in (0,1)");
    if ((f.kind == FaultKind::slow_connection || f.kind == FaultKind::slow_compute) &&
        f.factor < 1.0)
      throw ValidationError("scenario: slowdown factor must be >= 1");
  }
  if (sc.duration_s <= 0) throw ValidationError("scenario: duration must be positive");
  if (sc.sample_interval_s <= 0)
    throw ValidationError("scenario: sample interval must be positive");
}

Topology build_initial_topology(const Scenario& sc) {
  Topology topo = build_fat_tree(sc.topology);
  for (const FaultEvent& f : sc.faults) {
    if (f.time_s > 0) break;
    if (f.kind == FaultKind::link_down) topo.set_link_state(f.link, LinkState::down);
    if (f.kind == FaultKind::link_degraded)
      topo.set_link_state(f.link, LinkState::degraded, f.factor);
  }
  return topo;
}

double RunReport::mean_busbw(int job, int from_iter) const {
  double sum = 0;
  int n = 0;
  for (const IterRecord& it : iters)
    if (it.job == job && it.iter >= from_iter) {
      sum += it.busbw_gbps;
      ++n;
    }
  return n ? sum / n : 0.0;
}

std::string RunReport::port_name(const PortSample& s, const Topology* topo) const {
  std::ostringstream os;
  if (topo) {
    const Link& l = topo->link(s.link_id);
    if (l.kind == LinkKind::host)
      os << "leaf" << l.leaf << (s.dir == 0 ? "<-" : "->") << "node" << l.node << ".nic"
         << l.nic << (l.side == kLeft ? "L" : "R");
    else
      os << "leaf" << l.leaf << (s.dir == 0 ? "->" : "<-") << "spine" << l.spine;
  } else {
    os << "link" << s.link_id << ":d" << s.dir;
  }
  return os.str();
}

namespace {

struct QpState;

struct Chunk {
  int64_t id = 0;
  int job = 0, channel = 0, hop = 0, step = 0;
  int64_t bytes = 0;
  double remaining = 0;
  QpState* qp = nullptr;
  double scale = 1.0;  // progress divisor for degraded connections
  int64_t seq = -1;
  double post_t = -1, ready_t = -1;
  bool active = false;
  bool open = false;  // pending record emitted, completion not yet
  double rate = 0;
};

struct QpState {
  int64_t uid = 0;
  int job = 0, channel = 0, hop = 0, index = 0;
  bool inter = false;
  bool dead = false;
  int sender_rank = 0, receiver_rank = 0;
  c4p::QpSetupRequest req;  // inter only
  Path net_path;            // inter only
  int src_udp_port = 0;
  std::deque<Chunk*> queue;
  Chunk* active_chunk = nullptr;
  int64_t queued_bytes = 0;
  int64_t next_seq = 0;
  c4p::EwmaRate rate_est{200.0 * kBytesPerGbpsSec};
  std::vector<int> fs_path;
  // flow bookkeeping
  int64_t done_bytes = 0;
  double first_start = -1, last_end = -1;
};

struct Transfer {
  bool posted = false, released = false;
  double release_t = -1;
  int chunks_total = -1;  // -1: not yet split
  int chunks_done = 0;
  std::deque<int64_t> pending;  // undispatched chunk sizes
  int next_chunk_index = 0;     // for static round-robin
};

struct ChannelState {
  std::vector<int> ring;         // ring position -> comm rank
  std::vector<int> pos_of_rank;  // comm rank -> ring position
  std::vector<std::vector<QpState*>> hop_qps;
  std::vector<Transfer> transfers;  // hop * steps + step
  TransferSchedule schedule;
};

struct RankState {
  int node = 0, gpu = 0;
  double compute_factor = 1.0;
  bool crashed = false, frozen = false, infinite_compute = false;
  uint64_t compute_gen = 0;
  double op_start = 0;
  int done_units = 0;  // last-send + last-recv per channel
};

struct JobState {
  JobSpec spec;
  int comm_id = 0;
  std::vector<RankState> ranks;
  std::vector<ChannelState> channels;
  int iter = 0;
  int attempt = 0;
  int iters_completed_total = 0;
  int checkpoint_iter = 0;
  double t_last_checkpoint = 0;
  double iter_start = 0, coll_start = 0;
  int compute_pending = 0;
  int ranks_op_done = 0;
  bool done = false;
  bool stalled_forever = false;
  int64_t qp_counter = 0;
};

enum class EvKind { compute_done, fault, completion, sample, c4d_deadline };

struct Ev {
  double t = 0;
  uint64_t seq = 0;
  EvKind kind = EvKind::completion;
  int a = -1, b = -1;
  uint64_t gen = 0;
};

struct EvLater {
  bool operator()(const Ev& x, const Ev& y) const {
    if (x.t != y.t) return x.t > y.t;
    return x.seq > y.seq;
  }
};

class Engine {
 public:
  Engine(const Scenario& sc) : sc_(sc) {
    validate_scenario(sc);
    topo_ = build_initial_topology(sc);
    report_.topology_dump = [&] {
      std::ostringstream os;
      topo_.write_edge_list(os);
      return os.str();
    }();
  }

  RunReport run() {
    setup();
    loop();
    finalize();
    return std::move(report_);
  }

 private:
  // --- resource indexing ---
  int res_link(int link_id, int dir) const { return link_id * 2 + dir; }
  int res_egress(int job, int rank) const { return rank_res_base_[job] + 2 * rank; }
  int res_ingress(int job, int rank) const { return rank_res_base_[job] + 2 * rank + 1; }
  int res_intra_pair(int node, int gs, int gd) {
    auto key = std::make_tuple(node, gs, gd);
    auto it = intra_pair_res_.find(key);
    if (it != intra_pair_res_.end()) return it->second;
    const int idx = static_cast<int>(capacity_.size());
    intra_pair_res_.emplace(key, idx);
    capacity_.push_back(topo_.nvlink_gbps);
    load_.push_back(0.0);
    return idx;
  }

  void refresh_link_capacities() {
    for (const Link& l : topo_.links) {
      capacity_[res_link(l.id, 0)] = l.effective_gbps();
      capacity_[res_link(l.id, 1)] = l.effective_gbps();
    }
  }

  // --- record emission ---
  void emit(const MonitorRecord& rec) {
    if (sc_.emit_trace) report_.trace.push_back(rec);
    if (analyzer_) analyzer_->ingest(rec);
  }

  void emit_comm_record(JobState& job, double t) {
    CommRecord c;
    c.ts = t;
    c.comm_id = job.comm_id;
    c.rank_count = job.spec.rank_count();
    for (const RankState& r : job.ranks) c.assignment.push_back({r.node, r.gpu});
    emit(make_comm_record(c));
  }

  void emit_op_record(JobState& job, int rank, double start, double end, double ts) {
    OpRecord o;
    o.ts = ts;
    o.rank = rank;
    o.comm_id = job.comm_id;
    o.op_seq = job.iter;
    o.element_count = job.spec.collective_bytes / 4;
    o.start_s = start;
    o.end_s = end;
    emit(make_op_record(o));
  }

  void emit_transport(const QpState& qp, const Chunk* c, double ts, double complete,
                      int64_t seq, int64_t bytes, double post, double ready) {
    TransportRecord t;
    t.ts = ts;
    t.rank = qp.sender_rank;
    t.comm_id = jobs_[qp.job].comm_id;
    t.qp_id = qp.uid;
    t.peer = qp.receiver_rank;
    t.message_seq = seq;
    t.bytes = bytes;
    t.post_s = post;
    t.receiver_ready_s = ready;
    t.complete_s = complete;
    t.op_seq = c ? jobs_[qp.job].iter : 0;
    emit(make_transport_record(t));
  }

  void event_row(double t, const std::string& kind, const std::string& detail) {
    report_.events.push_back({t, kind, detail});
  }

  // --- setup ---
  void setup() {
    capacity_.assign(topo_.links.size() * 2, 0.0);
    refresh_link_capacities();
    rank_res_base_.resize(sc_.jobs.size());
    for (size_t j = 0; j < sc_.jobs.size(); ++j) {
      rank_res_base_[j] = static_cast<int>(capacity_.size());
      capacity_.insert(capacity_.end(), sc_.jobs[j].rank_count() * 2, topo_.nvlink_gbps);
    }
    load_.assign(capacity_.size(), 0.0);

    if (sc_.policies.c4p) {
      table_ = c4p::probe_paths(topo_, sc_.seed);
      std::ostringstream os;
      table_->dump(os);
      report_.pathtable_dump = os.str();
    }
    if (sc_.policies.c4d) analyzer_.emplace(sc_.policies.detector);

    cluster_.backup_pool = sc_.backup_nodes;

    jobs_.resize(sc_.jobs.size());
    for (size_t j = 0; j < sc_.jobs.size(); ++j) {
      JobState& job = jobs_[j];
      job.spec = sc_.jobs[j];
      job.comm_id = static_cast<int>(j);
      const int rpn = job.spec.ranks_per_node;
      for (int b = 0; b < static_cast<int>(job.spec.nodes.size()); ++b)
        for (int g = 0; g < rpn; ++g) job.ranks.push_back({job.spec.nodes[b], g});
      emit_comm_record(job, 0.0);
      build_channels(job);
      start_iteration(job, 0.0);
    }

    for (size_t i = 0; i < sc_.faults.size(); ++i)
      if (sc_.faults[i].time_s > 0)
        push_event({sc_.faults[i].time_s, next_seq_++, EvKind::fault, static_cast<int>(i)});
    push_event({sc_.sample_interval_s, next_seq_++, EvKind::sample});
  }

  void build_channels(JobState& job) {
    const int n = job.spec.rank_count();
    const int rpn = job.spec.ranks_per_node;
    const int steps = 2 * (n - 1);
    const int64_t per_channel =
        job.spec.collective_bytes / job.spec.channels;

    job.channels.assign(job.spec.channels, {});
    for (int c = 0; c < job.spec.channels; ++c) {
      ChannelState& ch = job.channels[c];
      int64_t bytes = per_channel;
      if (c == 0) bytes += job.spec.collective_bytes - per_channel * job.spec.channels;
      ch.schedule = ring_allreduce_schedule(n, bytes);
      ch.ring.resize(n);
      ch.pos_of_rank.assign(n, -1);
      // Rotate gpu order inside each node block so different channels cross
      // nodes through different NICs.
      int pos = 0;
      for (int b = 0; b < static_cast<int>(job.spec.nodes.size()); ++b)
        for (int k = 0; k < rpn; ++k) {
          const int rank = b * rpn + (c + k) % rpn;
          ch.ring[pos] = rank;
          ch.pos_of_rank[rank] = pos;
          ++pos;
        }
      ch.transfers.assign(static_cast<size_t>(n) * steps, {});
      ch.hop_qps.assign(n, {});
      for (int hop = 0; hop < n; ++hop) build_hop_qps(job, c, hop);
    }
  }

  void build_hop_qps(JobState& job, int c, int hop) {
    ChannelState& ch = job.channels[c];
    const int n = job.spec.rank_count();
    const int sender = ch.ring[hop];
    const int receiver = ch.ring[(hop + 1) % n];
    const RankState& s = job.ranks[sender];
    const RankState& r = job.ranks[receiver];
    auto& qps = ch.hop_qps[hop];
    qps.clear();
    if (s.node == r.node) {
      auto qp = std::make_unique<QpState>();
      qp->uid = job.comm_id * 1000000 + job.qp_counter++;
      qp->job = job.comm_id;
      qp->channel = c;
      qp->hop = hop;
      qp->inter = false;
      qp->sender_rank = sender;
      qp->receiver_rank = receiver;
      qp->fs_path = {res_egress(job.comm_id, sender),
                     res_intra_pair(s.node, s.gpu, r.gpu),
                     res_ingress(job.comm_id, receiver)};
      qps.push_back(qp.get());
      all_qps_[qp->uid] = std::move(qp);
      return;
    }
    for (int q = 0; q < job.spec.qps_per_channel; ++q) {
      auto qp = std::make_unique<QpState>();
      qp->uid = job.comm_id * 1000000 + job.qp_counter++;
      qp->job = job.comm_id;
      qp->channel = c;
      qp->hop = hop;
      qp->index = q;
      qp->inter = true;
      qp->sender_rank = sender;
      qp->receiver_rank = receiver;
      qp->req = {job.comm_id, job.comm_id, c,      q,     s.node,
                 s.gpu,       q % 2,       r.node, r.gpu};
      if (sc_.policies.c4p && table_) {
        c4p::QpAssignment a = alloc_.allocate(*table_, topo_, qp->req, sc_.seed, qp->uid);
        qp->net_path = a.path;
        qp->src_udp_port = a.src_udp_port;
      } else {
        FlowKey flow{s.node, r.node, s.gpu, q % 2, r.gpu, 0, 4791};
        Rng rng(sc_.seed, "qp_port", static_cast<uint64_t>(qp->uid));
        flow.src_udp_port = 1 + static_cast<int>(rng.next_below(65535));
        qp->src_udp_port = flow.src_udp_port;
        qp->net_path = route(topo_, flow, sc_.seed);
      }
      rebuild_qp_fs_path(job, *qp);
      qps.push_back(qp.get());
      all_qps_[qp->uid] = std::move(qp);
    }
  }

  void rebuild_qp_fs_path(JobState& job, QpState& qp) {
    qp.fs_path.clear();
    qp.fs_path.push_back(res_egress(job.comm_id, qp.sender_rank));
    qp.fs_path.push_back(res_link(qp.net_path.src_host_link, 0));
    for (size_t h = 0; h + 1 < qp.net_path.hops.size(); ++h) {
      const Link& l = topo_.link(qp.net_path.hops[h].link_id);
      // Up through the fabric on dir 0 (leaf->spine), down on dir 1.
      const int dir = (h == 0 && l.kind == LinkKind::uplink) ? 0 : 1;
      qp.fs_path.push_back(res_link(l.id, dir));
    }
    qp.fs_path.push_back(res_link(qp.net_path.dst_host_link, 1));
    qp.fs_path.push_back(res_ingress(job.comm_id, qp.receiver_rank));
  }

  // --- iteration control ---
  void start_iteration(JobState& job, double t) {
    job.iter_start = t;
    job.coll_start = -1;
    job.compute_pending = job.spec.rank_count();
    job.ranks_op_done = 0;
    for (auto& r : job.ranks) r.done_units = 0;
    for (int rank = 0; rank < job.spec.rank_count(); ++rank) {
      RankState& r = job.ranks[rank];
      if (r.crashed || r.infinite_compute) continue;
      ++r.compute_gen;
      push_event({t + job.spec.compute_s * r.compute_factor, next_seq_++,
                  EvKind::compute_done, job.comm_id, rank, r.compute_gen});
    }
  }

  void on_compute_done(JobState& job, int rank, uint64_t gen, double t) {
    RankState& r = job.ranks[rank];
    if (gen != r.compute_gen || r.crashed || r.infinite_compute || job.done) return;
    r.op_start = t;
    if (job.coll_start < 0 || t < job.coll_start) job.coll_start = t;
    emit_op_record(job, rank, t, kPending, t);
    --job.compute_pending;
    for (int c = 0; c < job.spec.channels; ++c) {
      ChannelState& ch = job.channels[c];
      const int n = job.spec.rank_count();
      const int pos = ch.pos_of_rank[rank];
      post_transfer(job, c, pos, 0, t);
      release_transfer(job, c, (pos + n - 1) % n, 0, t);
    }
  }

  Transfer& transfer_at(JobState& job, int c, int hop, int step) {
    ChannelState& ch = job.channels[c];
    const int steps = 2 * (job.spec.rank_count() - 1);
    return ch.transfers[static_cast<size_t>(hop) * steps + step];
  }

  void post_transfer(JobState& job, int c, int hop, int step, double t) {
    Transfer& tr = transfer_at(job, c, hop, step);
    if (tr.posted) return;
    tr.posted = true;
    ChannelState& ch = job.channels[c];
    const int64_t bytes = ch.schedule.steps[step][hop].bytes;
    auto chunks = split_chunks(bytes, job.spec.chunk_bytes);
    tr.chunks_total = static_cast<int>(chunks.size());
    for (int64_t b : chunks) {
      tr.pending.push_back(b);
      report_.bytes_scheduled += b;
    }
    if (tr.chunks_total == 0) {
      maybe_finish_transfer(job, c, hop, step, t);
      return;
    }
    dispatch_hop(job, c, hop, t);
  }

  void release_transfer(JobState& job, int c, int hop, int step, double t) {
    Transfer& tr = transfer_at(job, c, hop, step);
    if (tr.released) return;
    tr.released = true;
    tr.release_t = t;
    if (tr.posted && tr.chunks_total == 0) {
      maybe_finish_transfer(job, c, hop, step, t);
      return;
    }
    for (QpState* qp : job.channels[c].hop_qps[hop]) try_activate(*qp, t);
  }

  // Dispatch pending chunks of this hop's posted transfers, lowest step
  // first, into QP queues with free slots.
  void dispatch_hop(JobState& job, int c, int hop, double t) {
    ChannelState& ch = job.channels[c];
    const int steps = 2 * (job.spec.rank_count() - 1);
    auto& qps = ch.hop_qps[hop];
    for (int step = 0; step < steps; ++step) {
      Transfer& tr = ch.transfers[static_cast<size_t>(hop) * steps + step];
      if (!tr.posted) break;  // later steps cannot be posted yet
      while (!tr.pending.empty()) {
        QpState* target = nullptr;
        if (sc_.policies.dynamic_lb) {
          std::vector<c4p::QpLoadView> views;
          views.reserve(qps.size());
          for (QpState* qp : qps)
            views.push_back({qp->queued_bytes, qp->rate_est.rate(),
                             static_cast<int>(qp->queue.size()) >=
                                 job.spec.queue_capacity});
          const int pick = c4p::select_qp(views);
          if (pick < 0) return;  // every queue full; completions re-drive us
          target = qps[pick];
        } else {
          target = qps[tr.next_chunk_index % qps.size()];
          if (static_cast<int>(target->queue.size()) >= job.spec.queue_capacity)
            return;  // head-of-line: keep round-robin order
        }
        const int64_t bytes = tr.pending.front();
        tr.pending.pop_front();
        ++tr.next_chunk_index;

        auto chunk = std::make_unique<Chunk>();
        chunk->id = next_chunk_id_++;
        chunk->job = job.comm_id;
        chunk->channel = c;
        chunk->hop = hop;
        chunk->step = step;
        chunk->bytes = bytes;
        chunk->remaining = static_cast<double>(bytes);
        chunk->qp = target;
        chunk->scale = pair_scale(job.comm_id, target->sender_rank, target->receiver_rank);
        target->queue.push_back(chunk.get());
        target->queued_bytes += bytes;
        chunks_[chunk->id] = std::move(chunk);
        try_activate(*target, t);
      }
    }
  }

  double pair_scale(int job, int src, int dst) const {
    auto it = pair_scale_.find(std::make_tuple(job, src, dst));
    return it == pair_scale_.end() ? 1.0 : it->second;
  }

  void try_activate(QpState& qp, double t) {
    if (qp.active_chunk || qp.dead || qp.queue.empty()) return;
    Chunk* c = qp.queue.front();
    JobState& job = jobs_[qp.job];
    Transfer& tr = transfer_at(job, qp.channel, qp.hop, c->step);
    if (!tr.posted || !tr.released) return;
    c->post_t = t;
    c->ready_t = tr.release_t;
    c->seq = qp.next_seq++;
    c->open = true;
    qp.active_chunk = c;
    emit_transport(qp, c, t, kPending, c->seq, c->bytes, c->post_t, c->ready_t);
    if (job.ranks[qp.sender_rank].frozen || job.ranks[qp.sender_rank].crashed) return;
    c->active = true;
    active_.emplace(c->id, c);
    rates_dirty_ = true;
    if (qp.first_start < 0) qp.first_start = t;
  }

  void maybe_finish_transfer(JobState& job, int c, int hop, int step, double t) {
    Transfer& tr = transfer_at(job, c, hop, step);
    if (!tr.posted || !tr.released) return;
    if (tr.chunks_done < tr.chunks_total || !tr.pending.empty()) return;
    on_transfer_done(job, c, hop, step, t);
  }

  void on_transfer_done(JobState& job, int c, int hop, int step, double t) {
    ChannelState& ch = job.channels[c];
    const int n = job.spec.rank_count();
    const int steps = 2 * (n - 1);
    if (step + 1 < steps) {
      release_transfer(job, c, hop, step + 1, t);
      post_transfer(job, c, (hop + 1) % n, step + 1, t);
    } else {
      rank_unit_done(job, ch.ring[hop], t);
      rank_unit_done(job, ch.ring[(hop + 1) % n], t);
    }
  }

  void rank_unit_done(JobState& job, int rank, double t) {
    RankState& r = job.ranks[rank];
    if (++r.done_units != 2 * job.spec.channels) return;
    emit_op_record(job, rank, r.op_start, t, t);
    if (++job.ranks_op_done == job.spec.rank_count()) collective_complete(job, t);
  }

  void collective_complete(JobState& job, double t) {
    IterRecord rec;
    rec.job = job.comm_id;
    rec.iter = job.iter;
    rec.attempt = job.attempt;
    rec.start_s = job.iter_start;
    rec.compute_s = job.coll_start - job.iter_start;
    rec.comm_s = t - job.coll_start;
    rec.busbw_gbps = busbw_gbps(job.spec.collective_bytes, rec.comm_s, job.spec.rank_count());
    report_.iters.push_back(rec);

    ++job.iter;
    ++job.iters_completed_total;
    reset_channel_progress(job);
    if (job.spec.checkpoint_interval_iters > 0 &&
        job.iter % job.spec.checkpoint_interval_iters == 0) {
      job.checkpoint_iter = job.iter;
      job.t_last_checkpoint = t;
      event_row(t, "checkpoint", "job=" + std::to_string(job.comm_id) +
                                     " iter=" + std::to_string(job.iter));
    }
    if (job.iter >= job.spec.iterations) {
      job.done = true;
      event_row(t, "job_done", "job=" + std::to_string(job.comm_id));
      return;
    }
    start_iteration(job, t);
  }

  void reset_channel_progress(JobState& job) {
    const int steps = 2 * (job.spec.rank_count() - 1);
    for (auto& ch : job.channels)
      ch.transfers.assign(ch.transfers.size(), Transfer{});
    (void)steps;
  }

  // --- fair share ---
  void advance_to(double t) {
    if (t <= last_advance_) {
      last_advance_ = t;
      return;
    }
    const double dt = t - last_advance_;
    for (auto& [id, c] : active_)
      c->remaining -= dt * c->rate * kBytesPerGbpsSec / c->scale;
    last_advance_ = t;
  }

  void recompute_rates(double t) {
    rates_dirty_ = false;
    ++rate_gen_;
    std::fill(load_.begin(), load_.end(), 0.0);
    if (active_.empty()) return;
    FairShareInput in;
    in.capacity = capacity_;
    in.flows.reserve(active_.size());
    std::vector<Chunk*> order;
    order.reserve(active_.size());
    for (auto& [id, c] : active_) {
      order.push_back(c);
      in.flows.push_back(c->qp->fs_path);
    }
    const std::vector<double> rates = fair_share(in);
    double first = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < order.size(); ++i) {
      order[i]->rate = rates[i];
      for (int rsc : order[i]->qp->fs_path) load_[rsc] += rates[i];
      if (rates[i] > 0) {
        const double done_at =
            t + order[i]->remaining / (rates[i] * kBytesPerGbpsSec / order[i]->scale);
        first = std::min(first, done_at);
      }
    }
    if (std::isfinite(first))
      push_event({std::max(first, t), next_seq_++, EvKind::completion, -1, -1, rate_gen_});
  }

  void on_completion_event(double t, uint64_t gen) {
    if (gen != rate_gen_) return;
    std::vector<Chunk*> done;
    for (auto& [id, c] : active_)
      if (c->remaining <= kDoneEpsBytes) done.push_back(c);
    for (Chunk* c : done) complete_chunk(*c, t);
    if (!active_.empty()) rates_dirty_ = true;
  }

  void complete_chunk(Chunk& c, double t) {
    QpState& qp = *c.qp;
    JobState& job = jobs_[qp.job];
    active_.erase(c.id);
    c.active = false;
    c.open = false;
    qp.active_chunk = nullptr;
    qp.queue.pop_front();
    qp.queued_bytes -= c.bytes;
    qp.done_bytes += c.bytes;
    qp.last_end = t;
    report_.bytes_delivered += c.bytes;
    qp.rate_est.observe(static_cast<double>(c.bytes), t - c.post_t);
    emit_transport(qp, &c, t, t, c.seq, c.bytes, c.post_t, c.ready_t);

    Transfer& tr = transfer_at(job, c.channel, c.hop, c.step);
    ++tr.chunks_done;
    const int hop = c.hop, channel = c.channel, step = c.step;
    chunks_.erase(c.id);
    if (tr.chunks_done == tr.chunks_total && tr.pending.empty())
      on_transfer_done(job, channel, hop, step, t);
    dispatch_hop(job, channel, hop, t);
    try_activate(qp, t);
    rates_dirty_ = true;
  }

  // --- faults ---
  void on_fault(const FaultEvent& f, double t) {
    event_row(t, fault_kind_name(f.kind), fault_detail(f));
    switch (f.kind) {
      case FaultKind::link_down: {
        topo_.set_link_state(f.link, LinkState::down);
        refresh_link_capacities();
        handle_link_down(f.link, t);
        break;
      }
      case FaultKind::link_up: {
        topo_.set_link_state(f.link, LinkState::up);
        refresh_link_capacities();
        break;
      }
      case FaultKind::link_degraded: {
        topo_.set_link_state(f.link, LinkState::degraded, f.factor);
        refresh_link_capacities();
        break;
      }
      case FaultKind::nic_degraded: {
        const int link = topo_.host_link(f.node, f.nic, f.side);
        topo_.set_link_state(link, LinkState::degraded, f.factor);
        refresh_link_capacities();
        record_node_onset(f.node, t);
        break;
      }
      case FaultKind::slow_connection: {
        pair_scale_[{f.job, f.src_rank, f.dst_rank}] = f.factor;
        for (auto& [id, c] : active_) {
          QpState& qp = *c->qp;
          if (qp.job == f.job && qp.sender_rank == f.src_rank &&
              qp.receiver_rank == f.dst_rank)
            c->scale = f.factor;
        }
        break;
      }
      case FaultKind::slow_compute: {
        JobState& job = jobs_[f.job];
        RankState& r = job.ranks[f.rank];
        record_node_onset(r.node, t);
        const double old_factor = r.compute_factor;
        r.compute_factor = f.factor;
        const double scheduled_end = job.iter_start + job.spec.compute_s * old_factor;
        if (!job.done && !r.crashed && !r.infinite_compute && scheduled_end > t) {
          // Stretch the remainder of the in-flight compute phase.
          const double done_frac = (t - job.iter_start) / (job.spec.compute_s * old_factor);
          const double new_end = t + job.spec.compute_s * (1.0 - done_frac) * f.factor;
          ++r.compute_gen;
          push_event({new_end, next_seq_++, EvKind::compute_done, job.comm_id, f.rank,
                      r.compute_gen});
        }
        break;
      }
      case FaultKind::rank_crash: {
        apply_crash(jobs_[f.job], f.rank, t);
        break;
      }
      case FaultKind::comm_hang: {
        JobState& job = jobs_[f.job];
        RankState& r = job.ranks[f.rank];
        record_node_onset(r.node, t);
        r.frozen = true;
        freeze_sends(job, f.rank);
        break;
      }
      case FaultKind::noncomm_hang: {
        JobState& job = jobs_[f.job];
        RankState& r = job.ranks[f.rank];
        record_node_onset(r.node, t);
        r.infinite_compute = true;
        ++r.compute_gen;  // cancels a pending compute completion
        break;
      }
    }
    rates_dirty_ = true;
  }

  std::string fault_detail(const FaultEvent& f) const {
    std::ostringstream os;
    if (f.link >= 0) os << "link=" << f.link;
    if (f.job >= 0) os << " job=" << f.job;
    if (f.rank >= 0) os << " rank=" << f.rank;
    if (f.src_rank >= 0) os << " pair=" << f.src_rank << ">" << f.dst_rank;
    if (f.node >= 0) os << " port=node" << f.node << ":nic" << f.nic << ":" << f.side;
    if (f.factor != 1.0) os << " factor=" << fmt_double(f.factor);
    return os.str();
  }

  void record_node_onset(int node, double t) {
    if (!node_fault_onset_.count(node)) node_fault_onset_[node] = t;
  }

  void freeze_sends(JobState& job, int rank) {
    for (auto& ch : job.channels)
      for (auto& qps : ch.hop_qps)
        for (QpState* qp : qps) {
          if (qp->sender_rank != rank) continue;
          if (qp->active_chunk && qp->active_chunk->active) {
            active_.erase(qp->active_chunk->id);
            qp->active_chunk->active = false;
          }
        }
  }

  void apply_crash(JobState& job, int rank, double t) {
    RankState& r = job.ranks[rank];
    record_node_onset(r.node, t);
    r.crashed = true;
    ++r.compute_gen;
    freeze_sends(job, rank);
    // Peers observe the torn-down connections; in-flight inbound transfers
    // fail, idle queue pairs report a zero-byte reset.
    for (auto& ch : job.channels)
      for (auto& qps : ch.hop_qps)
        for (QpState* qp : qps) {
          if (qp->receiver_rank != rank || qp->dead) continue;
          qp->dead = true;
          if (qp->active_chunk) {
            Chunk* c = qp->active_chunk;
            if (c->active) active_.erase(c->id);
            c->active = false;
            emit_transport(*qp, c, t, kFailed, c->seq, c->bytes, c->post_t, c->ready_t);
          }
          emit_transport(*qp, nullptr, t, kFailed, qp->next_seq++, 0, t, t);
        }
    job.stalled_forever = !sc_.policies.c4d;
  }

  void handle_link_down(int link, double t) {
    // C4P excludes the link from future allocations either way; only the
    // dynamic load balancer re-plans live QPs. Without it the switch hash
    // re-resolves each flow over the shrunken candidate set.
    std::vector<QpState*> affected;
    for (auto& [uid, qp] : all_qps_) {
      if (!qp->inter || qp->dead) continue;
      const auto ids = qp->net_path.link_ids();
      if (std::find(ids.begin(), ids.end(), link) != ids.end()) affected.push_back(qp.get());
    }
    if (sc_.policies.c4p && table_ && sc_.policies.dynamic_lb) {
      auto reassigned = alloc_.on_link_fault(*table_, topo_, link, sc_.seed);
      for (const auto& ra : reassigned) {
        auto it = all_qps_.find(ra.qp_uid);
        if (it == all_qps_.end()) continue;
        QpState& qp = *it->second;
        qp.net_path = ra.assignment.path;
        qp.src_udp_port = ra.assignment.src_udp_port;
        rebuild_qp_fs_path(jobs_[qp.job], qp);
        event_row(t, "reroute", "qp=" + std::to_string(qp.uid) +
                                    " spine=" + std::to_string(ra.assignment.spine));
      }
      return;
    }
    if (sc_.policies.c4p && table_) c4p::exclude_link(*table_, topo_, link);
    for (QpState* qp : affected) {
      const RankState& s = jobs_[qp->job].ranks[qp->sender_rank];
      const RankState& d = jobs_[qp->job].ranks[qp->receiver_rank];
      FlowKey flow{s.node, d.node, s.gpu, qp->req.src_side, d.gpu, qp->src_udp_port, 4791};
      try {
        qp->net_path = route(topo_, flow, sc_.seed);
        rebuild_qp_fs_path(jobs_[qp->job], *qp);
        event_row(t, "reroute", "qp=" + std::to_string(qp->uid) + " hash");
      } catch (const SimError& e) {
        qp->dead = true;
        if (qp->active_chunk && qp->active_chunk->active) {
          active_.erase(qp->active_chunk->id);
          qp->active_chunk->active = false;
        }
        event_row(t, "flow_failure", "qp=" + std::to_string(qp->uid) + " " + e.what());
      }
    }
  }

  // --- c4d master ---
  void process_diagnoses(double t) {
    if (!analyzer_) return;
    for (const c4d::Diagnosis& d : analyzer_->take_diagnoses()) {
      report_.diagnoses.push_back(d);
      event_row(d.t_emitted, "diagnosis", d.to_line());
      if (!c4d::verdict_is_node_attributable(d.verdict) || d.targets.empty()) continue;
      JobState& job = jobs_.at(d.comm_id);
      std::set<int> nodes;
      for (int r : d.targets) nodes.insert(job.ranks[r].node);
      for (int node : nodes) {
        c4d::MasterAction act = c4d::master_step(d, node, cluster_);
        if (act.kind == c4d::MasterAction::Kind::none) continue;
        c4d::Incident inc;
        inc.id = static_cast<int>(report_.incidents.size());
        inc.error_class = c4d::verdict_name(d.verdict);
        inc.t_last_checkpoint = job.t_last_checkpoint;
        auto onset = node_fault_onset_.find(node);
        inc.t_error = onset != node_fault_onset_.end() ? onset->second : d.t_emitted;
        inc.t_detect = d.t_emitted;
        inc.t_diagnose = d.t_emitted;
        inc.t_isolated = d.t_emitted + sc_.policies.isolation_s;
        if (act.kind == c4d::MasterAction::Kind::isolate_restart) {
          inc.t_restart_done = inc.t_isolated + sc_.policies.reinit_s;
          push_event({inc.t_restart_done, next_seq_++, EvKind::fault, -1000 - d.comm_id,
                      act.replacement});
          event_row(t, "isolate", "node=" + std::to_string(node) + " replacement=" +
                                      std::to_string(act.replacement));
        } else {
          // Held: no backup available; downtime runs to the horizon.
          inc.t_restart_done = std::max(sc_.duration_s, inc.t_isolated);
          event_row(t, "hold", "node=" + std::to_string(node) + " pool_empty");
          job.stalled_forever = true;
        }
        report_.incidents.push_back(inc);
      }
    }
  }

  void restart_job(JobState& job, int replacement, double t) {
    // Swap the isolated node out, tear down QPs, resume from checkpoint.
    std::set<int> bad_nodes;
    for (const auto& r : job.ranks)
      if (cluster_.isolated_nodes.count(r.node)) bad_nodes.insert(r.node);
    for (int& n : job.spec.nodes)
      if (bad_nodes.count(n) && replacement >= 0) n = replacement;

    for (auto& ch : job.channels)
      for (auto& qps : ch.hop_qps)
        for (QpState* qp : qps) {
          if (qp->active_chunk && qp->active_chunk->active) active_.erase(qp->active_chunk->id);
          for (Chunk* c : qp->queue) chunks_.erase(c->id);
          alloc_.release(qp->uid);
          all_qps_.erase(qp->uid);
        }
    job.channels.clear();
    job.ranks.clear();
    for (int b = 0; b < static_cast<int>(job.spec.nodes.size()); ++b)
      for (int g = 0; g < job.spec.ranks_per_node; ++g)
        job.ranks.push_back({job.spec.nodes[b], g});
    job.qp_counter = 0;
    ++job.attempt;
    job.iter = job.checkpoint_iter;
    job.done = false;
    job.stalled_forever = false;
    emit_comm_record(job, t);
    build_channels(job);
    event_row(t, "restart", "job=" + std::to_string(job.comm_id) +
                                " iter=" + std::to_string(job.iter));
    start_iteration(job, t);
  }

  // --- sampling ---
  void on_sample(double t) {
    for (size_t rsc = 0; rsc < topo_.links.size() * 2; ++rsc)
      if (load_[rsc] > 0) ever_active_.insert(static_cast<int>(rsc));
    for (int rsc : ever_active_)
      report_.ports.push_back({t, rsc / 2, rsc % 2, load_[rsc]});
    bool all_done = true;
    for (const JobState& j : jobs_)
      if (!j.done) all_done = false;
    if (!all_done && t + sc_.sample_interval_s <= sc_.duration_s + 1e-12)
      push_event({t + sc_.sample_interval_s, next_seq_++, EvKind::sample});
  }

  // --- main loop ---
  void push_event(Ev ev) { queue_.push(ev); }

  void maybe_schedule_c4d(double t) {
    if (!analyzer_) return;
    const double nd = analyzer_->next_deadline();
    if (std::isfinite(nd) && nd < c4d_scheduled_ - 1e-12 && nd <= sc_.duration_s) {
      c4d_scheduled_ = nd;
      push_event({std::max(nd, t), next_seq_++, EvKind::c4d_deadline});
    }
  }

  void loop() {
    double t = 0.0;
    while (!queue_.empty()) {
      Ev ev = queue_.top();
      queue_.pop();
      if (ev.t > sc_.duration_s) break;
      t = ev.t;
      advance_to(t);
      switch (ev.kind) {
        case EvKind::compute_done:
          on_compute_done(jobs_.at(ev.a), ev.b, ev.gen, t);
          break;
        case EvKind::fault:
          if (ev.a <= -1000)
            restart_job(jobs_.at(-1000 - ev.a), ev.b, t);
          else
            on_fault(sc_.faults.at(ev.a), t);
          break;
        case EvKind::completion:
          on_completion_event(t, ev.gen);
          break;
        case EvKind::sample:
          on_sample(t);
          break;
        case EvKind::c4d_deadline:
          c4d_scheduled_ = std::numeric_limits<double>::infinity();
          if (analyzer_)
            while (analyzer_->next_deadline() <= t)
              analyzer_->advance(analyzer_->next_deadline());
          break;
      }
      // Flush at batch boundaries: settle rates, diagnoses, deadlines.
      if (queue_.empty() || queue_.top().t > t) {
        if (analyzer_)
          while (analyzer_->next_deadline() <= t)
            analyzer_->advance(analyzer_->next_deadline());
        process_diagnoses(t);
        if (rates_dirty_) recompute_rates(t);
        maybe_schedule_c4d(t);
      }
      last_t_ = t;
    }
  }

  void finalize() {
    bool all_done = true;
    for (const JobState& j : jobs_)
      if (!j.done) all_done = false;
    report_.wall_s = all_done ? last_t_ : sc_.duration_s;
    if (analyzer_) {
      analyzer_->finish(report_.wall_s);
      process_diagnoses(report_.wall_s);
    }
    for (auto& [uid, qp] : all_qps_) {
      if (qp->done_bytes == 0) continue;
      FlowRecord f;
      f.qp_uid = uid;
      f.job = qp->job;
      const JobState& job = jobs_[qp->job];
      f.src = std::to_string(job.ranks[qp->sender_rank].node) + ":" +
              std::to_string(job.ranks[qp->sender_rank].gpu);
      f.dst = std::to_string(job.ranks[qp->receiver_rank].node) + ":" +
              std::to_string(job.ranks[qp->receiver_rank].gpu);
      f.path = path_string(*qp);
      f.start_s = qp->first_start;
      f.end_s = qp->last_end;
      f.bytes = qp->done_bytes;
      f.mean_gbps = qp->last_end > qp->first_start
                        ? qp->done_bytes / (qp->last_end - qp->first_start) / kBytesPerGbpsSec
                        : 0.0;
      report_.flows.push_back(f);
    }
    std::sort(report_.flows.begin(), report_.flows.end(),
              [](const FlowRecord& a, const FlowRecord& b) { return a.qp_uid < b.qp_uid; });
    if (!report_.incidents.empty())
      report_.downtime = c4d::downtime_breakdown(report_.incidents, report_.wall_s);
    std::ostringstream os;
    alloc_.dump_allocation_log(os);
    report_.allocation_dump = os.str();
  }

  std::string path_string(const QpState& qp) const {
    if (!qp.inter) return "nvlink";
    std::ostringstream os;
    const Link& src = topo_.link(qp.net_path.src_host_link);
    os << "L" << src.leaf;
    if (qp.net_path.spine >= 0) {
      os << ">S" << qp.net_path.spine;
      const Link& dst = topo_.link(qp.net_path.dst_host_link);
      os << ">L" << dst.leaf;
    }
    os << ">p" << (qp.net_path.dst_side == kLeft ? "L" : "R");
    return os.str();
  }

  const Scenario sc_;
  Topology topo_;
  RunReport report_;

  std::vector<double> capacity_;
  std::vector<double> load_;
  std::vector<int> rank_res_base_;
  std::map<std::tuple<int, int, int>, int> intra_pair_res_;
  std::map<std::tuple<int, int, int>, double> pair_scale_;

  std::optional<c4p::PathTable> table_;
  c4p::AllocationState alloc_;
  std::optional<c4d::Analyzer> analyzer_;
  c4d::ClusterState cluster_;
  std::map<int, double> node_fault_onset_;

  std::vector<JobState> jobs_;
  std::map<int64_t, std::unique_ptr<QpState>> all_qps_;
  std::map<int64_t, std::unique_ptr<Chunk>> chunks_;
  std::map<int64_t, Chunk*> active_;

  std::priority_queue<Ev, std::vector<Ev>, EvLater> queue_;
  uint64_t next_seq_ = 0;
  int64_t next_chunk_id_ = 0;
  uint64_t rate_gen_ = 0;
  bool rates_dirty_ = false;
  double last_advance_ = 0.0;
  double last_t_ = 0.0;
  double c4d_scheduled_ = std::numeric_limits<double>::infinity();
  std::set<int> ever_active_;
};

}  // namespace

RunReport run(const Scenario& sc) {
  Engine engine(sc);
  return engine.run();
}

}  // namespace c4sim
