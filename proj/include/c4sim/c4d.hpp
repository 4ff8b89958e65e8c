// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "c4sim/monitor.hpp"
#include "c4sim/rng.hpp"

namespace c4sim::c4d {

enum class Verdict {
  healthy,
  connection_slow,
  source_slow,
  destination_slow,
  node_slow,  // hot row and column meeting on one rank, e.g. a sick NIC
  noncomm_slow,
  comm_hang,
  noncomm_hang,
  crash,
};

std::string verdict_name(Verdict v);

struct Diagnosis {
  int comm_id = 0;
  int epoch = 0;  // restarts open a new epoch
  int window = 0; // op_seq
  Verdict verdict = Verdict::healthy;
  std::vector<int> targets;                  // ranks (sorted)
  std::vector<std::pair<int, int>> cells;    // flagged (src, dst) evidence
  double t_emitted = 0.0;

  std::string window_token() const;  // "<comm>:<epoch>:<opseq>"
  std::string targets_token() const;
  std::string cells_token() const;
  std::string to_line() const;  // "D <window> <verdict> <targets> <cells>"
};

// Mean seconds-per-byte delay between worker pairs over one analysis window.
struct LatencyMatrix {
  int n = 0;
  std::vector<double> mean;  // n*n, row = source
  std::vector<int> count;

  bool present(int i, int j) const { return count[static_cast<size_t>(i) * n + j] > 0; }
  double at(int i, int j) const { return mean[static_cast<size_t>(i) * n + j]; }
  void add(int i, int j, double delay_per_byte);
  int present_cells() const;
};

LatencyMatrix build_latency_matrix(const std::vector<TransportRecord>& records, int n,
                                   int op_seq_lo, int op_seq_hi);

struct DetectorParams {
  double k_mad = 5.0;
  double rho = 0.8;
  // A cell must also exceed median by this relative margin; keeps the MAD
  // rule meaningful when the dispersion collapses to ~0 in a clean fluid run.
  double rel_floor = 0.5;
  double hang_timeout_iters = 3.0;
  int min_history_windows = 3;
};

struct MatrixClassification {
  Verdict verdict = Verdict::healthy;
  std::vector<int> targets;
  std::vector<std::pair<int, int>> cells;
};

// Fig.-6 style reading of the matrix: hot cell -> connection, hot row ->
// source, hot column -> destination; row+column meeting on one rank collapse
// to a node-level attribution. Rows/columns vote only with >= 2 present
// cells, so ring traffic cannot fake a source verdict from a single pair.
MatrixClassification classify_matrix(const LatencyMatrix& m, const DetectorParams& p);

// Sender lag of the first message each directed pair posts in the window:
// how long the receiver's ready signal sat unanswered. Localizes the rank
// whose compute/data phase ran long while the wire itself stayed healthy.
std::map<std::pair<int, int>, double> entry_lags(
    const std::vector<TransportRecord>& records, int op_seq_lo, int op_seq_hi);

MatrixClassification classify_entry_lags(
    const std::map<std::pair<int, int>, double>& lags, int n, const DetectorParams& p);

// --- streaming analyzer (shared by the online engine and offline replay) ---

class Analyzer {
 public:
  explicit Analyzer(DetectorParams params = {});

  // Records must arrive in nondecreasing ts order (ties in emission order).
  void ingest(const MonitorRecord& rec);

  // Runs timeout rules up to `now`.
  void advance(double now);

  // Earliest future timeout the caller should advance() through, or +inf.
  double next_deadline() const;

  // Close out any still-open windows (end of run / end of trace).
  void finish(double now);

  std::vector<Diagnosis> take_diagnoses();
  const std::vector<Diagnosis>& all_diagnoses() const { return emitted_; }

 private:
  struct CommState {
    int rank_count = 0;
    int epoch = 0;
    bool halted = false;
    std::map<int, int> open_op;  // rank -> op_seq
    struct Window {
      std::vector<TransportRecord> completed;
      std::map<std::pair<int64_t, int64_t>, TransportRecord> open_msgs;
      std::set<int> started, ended;
      double first_start = std::numeric_limits<double>::infinity();
      double last_end = 0.0;
    };
    std::map<int, Window> windows;
    std::deque<double> closed_durations;  // trailing iteration periods
    double prev_window_end = -1.0;
    std::set<int> crashed;
  };

  double timeout_s(const CommState& c) const;
  void classify_closed_window(int comm_id, CommState& c, int op_seq, double now);
  void check_hangs(int comm_id, CommState& c, double now);
  void emit(Diagnosis d, double now);

  DetectorParams params_;
  std::map<int, CommState> comms_;
  std::vector<Diagnosis> emitted_;
  size_t drained_ = 0;
};

// Offline analysis: replay a recorded trace through the same analyzer the
// online engine feeds, firing timeout deadlines at their exact times.
std::vector<Diagnosis> replay_trace(const std::vector<MonitorRecord>& records,
                                    DetectorParams params);

// --- master: isolate-and-restart policy ---

struct ClusterState {
  std::set<int> isolated_nodes;
  std::vector<int> backup_pool;  // idle replacement nodes
};

struct MasterAction {
  enum class Kind { none, isolate_restart, hold } kind = Kind::none;
  int node = -1;
  int replacement = -1;  // -1 when holding (pool empty)
};

// Node-attributable verdicts isolate the node and restart from checkpoint;
// re-reports against an isolated node are no-ops.
MasterAction master_step(const Diagnosis& d, int target_node, ClusterState& cluster);

bool verdict_is_node_attributable(Verdict v);

// --- downtime accounting ---

struct Incident {
  int id = 0;
  std::string error_class;
  double t_last_checkpoint = 0.0;
  double t_error = 0.0;
  double t_detect = 0.0;
  double t_diagnose = 0.0;
  double t_isolated = 0.0;
  double t_restart_done = 0.0;
};

struct DowntimeAggregate {
  double post_checkpoint = 0.0;
  double detection = 0.0;
  double diagnosis_isolation = 0.0;
  double re_initialization = 0.0;
  double total() const {
    return post_checkpoint + detection + diagnosis_isolation + re_initialization;
  }
};

// Fractions of wall time per component. Throws listing offending incidents
// when the lifecycle ordering chain is violated.
DowntimeAggregate downtime_breakdown(const std::vector<Incident>& incidents,
                                     double wall_time_s);

// --- Monte-Carlo month model for the calibration presets ---

struct DowntimeModelParams {
  double incident_rate_per_month = 40.0;
  double checkpoint_interval_h = 2.710;
  double detection_mean_h = 0.6138;
  double diagnosis_mean_h = 3.537;
  double reinit_mean_h = 0.108;
  double month_h = 720.0;
  int trials = 1000;
};

struct DowntimeTrial {
  int incidents = 0;
  DowntimeAggregate frac;
};

DowntimeTrial run_month_trial(const DowntimeModelParams& p, Rng rng);

// E[fraction] = rate * (ckpt/2 + detect + diagnose + reinit) / month.
DowntimeAggregate closed_form_downtime(const DowntimeModelParams& p);

}  // namespace c4sim::c4d
