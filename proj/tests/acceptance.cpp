// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one pass/fail line per criterion. Runs everything by
// default; pass criterion numbers (1..8) to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "c4sim/config.hpp"
#include "c4sim/fairshare.hpp"
#include "c4sim/report.hpp"
#include "oracles.hpp"

using namespace c4sim;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void verdict_line(int criterion, bool pass, const std::string& name,
                  const std::string& detail) {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << "C" << criterion << " " << name << ": "
            << detail << "\n";
  if (!pass) ++g_failures;
}

Scenario preset_scenario(const std::string& name,
                         const std::vector<std::string>& overrides = {}) {
  ScenarioConfig cfg = load_config(name, overrides);
  if (!cfg.sim) throw SimError("preset has no scenario: " + name);
  return *cfg.sim;
}

std::vector<std::string> te_off() {
  return {"policies.c4p=off", "policies.dynamic_lb=off"};
}

struct SeedStats {
  double mean_busbw = 0;  // over jobs
  double min_busbw = 0, max_busbw = 0;
  int max_rx_flows = 0;            // receive-port concentration
  int max_leaf0_uplink_flows = 0;  // egress flows over leaf 0, max per spine
  int leaf0_uplink_flows_total = 0;
  double wall_s = 0;
};

// Receive-side flow concentration: QP flows per (dst node:gpu, side).
int max_rx_port_flows(const RunReport& rep) {
  std::map<std::string, int> per_port;
  for (const FlowRecord& f : rep.flows) {
    if (f.path == "nvlink") continue;
    const char side = f.path.back();  // ...>pL / ...>pR
    ++per_port[f.dst + std::string(1, side)];
  }
  int best = 0;
  for (const auto& [k, v] : per_port) best = std::max(best, v);
  return best;
}

void leaf0_uplink_histogram(const RunReport& rep, SeedStats* st) {
  std::map<int, int> per_spine;
  int total = 0;
  for (const FlowRecord& f : rep.flows) {
    if (f.path.rfind("L0>S", 0) != 0) continue;
    const int spine = std::atoi(f.path.c_str() + 4);
    ++per_spine[spine];
    ++total;
  }
  st->leaf0_uplink_flows_total = total;
  for (const auto& [s, c] : per_spine)
    st->max_leaf0_uplink_flows = std::max(st->max_leaf0_uplink_flows, c);
}

std::vector<SeedStats> sweep_stats(const Scenario& base, int seeds, int measure_from_iter) {
  std::vector<SeedStats> out(seeds);
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < seeds; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Scenario sc = base;
    sc.seed = i + 1;
    RunReport rep = run(sc);
    SeedStats st;
    double sum = 0, lo = 1e18, hi = 0;
    for (size_t j = 0; j < sc.jobs.size(); ++j) {
      const double b = rep.mean_busbw(static_cast<int>(j), measure_from_iter);
      sum += b;
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
    st.mean_busbw = sum / sc.jobs.size();
    st.min_busbw = lo;
    st.max_busbw = hi;
    st.max_rx_flows = max_rx_port_flows(rep);
    leaf0_uplink_histogram(rep, &st);
    st.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out[i] = st;
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0 : v[v.size() / 2];
}

std::string fmt(double v, int prec = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- C1
void criterion1() {
  const double ideal = kNvlinkGbps;  // min(2x200G crossing bound, NVLink cap)
  Scenario on = preset_scenario("bonded_balance");
  RunReport rep = run(on);
  const double busbw_on = rep.mean_busbw(0);

  Scenario off = preset_scenario("bonded_balance", te_off());
  const int seeds = 100;
  auto stats = sweep_stats(off, seeds, 0);
  std::vector<double> busbw;
  int collision_seeds = 0;
  double max_wall = 0;
  for (const auto& st : stats) {
    busbw.push_back(st.mean_busbw);
    if (st.max_rx_flows >= 2) ++collision_seeds;
    max_wall = std::max(max_wall, st.wall_s);
  }
  const double med = median(busbw);

  const bool pass = busbw_on >= 0.95 * ideal && med <= 0.80 * ideal &&
                    collision_seeds >= 60 && max_wall <= 10.0;
  verdict_line(1, pass, "bonded-port balance",
               "c4p_on busbw " + fmt(busbw_on) + " (>=95% of " + fmt(ideal) +
                   "), off median " + fmt(med) + " (<=80%), rx>=2-flow seeds " +
                   std::to_string(collision_seeds) + "/100 (>=60), max wall " +
                   fmt(max_wall) + "s (<=10)");
}

// ---------------------------------------------------------------- C2
void criterion2() {
  const double ideal = kNvlinkGbps;
  Scenario on = preset_scenario("eight_jobs_1to1");
  RunReport rep = run(on);
  double lo = 1e18, hi = 0;
  for (int j = 0; j < 8; ++j) {
    const double b = rep.mean_busbw(j);
    lo = std::min(lo, b);
    hi = std::max(hi, b);
  }

  Scenario off = preset_scenario("eight_jobs_1to1", te_off());
  auto stats = sweep_stats(off, 100, 0);
  double mean_off = 0, mean_ratio = 0;
  for (const auto& st : stats) {
    mean_off += st.mean_busbw;
    mean_ratio += st.max_busbw / std::max(1e-9, st.min_busbw);
  }
  mean_off /= stats.size();
  mean_ratio /= stats.size();
  const double degradation = 1.0 - mean_off / ideal;

  const bool pass =
      hi / lo <= 1.02 && lo >= 0.95 * ideal && degradation >= 0.30 && mean_ratio >= 1.3;
  verdict_line(2, pass, "eight jobs 1:1",
               "c4p_on spread " + fmt(100 * (hi / lo - 1)) + "% (<=2%), min " + fmt(lo) +
                   " (>=95% of " + fmt(ideal) + "); off degradation " +
                   fmt(100 * degradation) + "% (>=30%), max/min " + fmt(mean_ratio) +
                   " (>=1.3)");
}

// ---------------------------------------------------------------- C3
void criterion3() {
  const double ideal = kNvlinkGbps;
  Scenario on = preset_scenario("eight_jobs_2to1");
  RunReport rep = run(on);
  double lo = 1e18, hi = 0;
  for (int j = 0; j < 8; ++j) {
    const double b = rep.mean_busbw(j);
    lo = std::min(lo, b);
    hi = std::max(hi, b);
  }
  // Offered load within capacity on every sampled link.
  Topology topo = build_initial_topology(on);
  bool overload = false;
  for (const PortSample& s : rep.ports)
    if (s.gbps > topo.link(s.link_id).effective_gbps() * (1 + 1e-9)) overload = true;

  Scenario off = preset_scenario("eight_jobs_2to1", te_off());
  auto stats = sweep_stats(off, 100, 0);
  double mean_off = 0;
  for (const auto& st : stats) mean_off += st.mean_busbw;
  mean_off /= stats.size();
  const double degradation = 1.0 - mean_off / ideal;

  const bool pass = !overload && hi / lo <= 1.01 && degradation >= 0.30;
  verdict_line(3, pass, "eight jobs 2:1",
               std::string("no link over capacity: ") + (overload ? "NO" : "yes") +
                   ", c4p_on spread " + fmt(100 * (hi / lo - 1)) +
                   "% (<=1%); off degradation " + fmt(100 * degradation) + "% (>=30%)");
}

// ---------------------------------------------------------------- C4
void criterion4() {
  const double ideal = 360.0;  // min(4 QPs x 90G uplink bound, NVLink 362)
  const int measure_from = 8;  // steady state well after the fault
  Scenario on = preset_scenario("linkfail_lb");
  RunReport rep = run(on);
  double lb_on_min = 1e18;
  for (int j = 0; j < 8; ++j)
    lb_on_min = std::min(lb_on_min, rep.mean_busbw(j, measure_from));

  Scenario off = preset_scenario("linkfail_lb", {"policies.dynamic_lb=off"});
  auto stats = sweep_stats(off, 100, measure_from);
  int bad_seeds = 0;
  for (const auto& st : stats) {
    const double mean_per_port = static_cast<double>(st.leaf0_uplink_flows_total) / 8.0;
    const bool concentrated = st.max_leaf0_uplink_flows >= 2.0 * mean_per_port;
    const bool degraded = st.min_busbw <= (6.0 / 8.0) * ideal;
    if (concentrated && degraded) ++bad_seeds;
  }

  const bool pass = lb_on_min >= 0.95 * (7.0 / 8.0) * ideal && bad_seeds >= 60;
  verdict_line(4, pass, "link failure tolerance",
               "lb_on min busbw " + fmt(lb_on_min) + " (>= " +
                   fmt(0.95 * 7.0 / 8.0 * ideal) + " = 95% of 7/8 ideal); lb_off " +
                   std::to_string(bad_seeds) +
                   "/100 seeds concentrated & <=6/8 ideal (>=60)");
}

// ---------------------------------------------------------------- C5
Scenario corpus_scenario(uint64_t seed) {
  Scenario sc;
  sc.topology.node_count = 8;
  sc.topology.leaf_count = 4;
  sc.topology.spine_count = 4;
  sc.topology.nodes_per_leaf_pair = 4;
  sc.topology.capacity_gbps = 200;
  JobSpec j;
  j.nodes = {0, 1, 4, 5};
  j.ranks_per_node = 8;
  j.channels = 2;
  j.qps_per_channel = 1;
  j.collective_bytes = 64ll << 20;
  j.chunk_bytes = 512ll << 10;
  j.iterations = 10;
  j.checkpoint_interval_iters = 3;
  Rng rng(seed, "corpus_shape");
  j.compute_s = rng.uniform(0.8e-3, 1.2e-3);
  sc.jobs.push_back(j);
  sc.policies.c4d = true;
  sc.policies.detector.hang_timeout_iters = 1.5;
  sc.policies.isolation_s = 0.005;
  sc.policies.reinit_s = 0.01;
  sc.backup_nodes = {2, 3};
  sc.duration_s = 5;
  sc.sample_interval_s = 0.05;
  sc.seed = seed;
  return sc;
}

double healthy_iter(const Scenario& sc) {
  const JobSpec& j = sc.jobs[0];
  return j.compute_s +
         j.collective_bytes * 8.0 * busbw_factor(j.rank_count()) / (kNvlinkGbps * 1e9);
}

// Successor of `rank` in channel c's rotated ring (mirrors the engine's
// channel construction).
int ring_successor(int rank, int c, int nodes, int rpn) {
  const int b = rank / rpn;
  const int g = rank % rpn;
  const int k = (g - c + rpn) % rpn;
  if (k + 1 < rpn) return b * rpn + (c + k + 1) % rpn;
  return ((b + 1) % nodes) * rpn + c;
}

void criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const int per_kind = 34;  // 6 kinds -> 204 fault scenarios
  const std::vector<FaultKind> kinds = {
      FaultKind::slow_connection, FaultKind::slow_compute, FaultKind::nic_degraded,
      FaultKind::rank_crash,      FaultKind::comm_hang,    FaultKind::noncomm_hang};
  const int total = per_kind * static_cast<int>(kinds.size());

  std::vector<std::string> errors(total);
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
  for (int idx = 0; idx < total; ++idx) {
    const FaultKind kind = kinds[idx / per_kind];
    Scenario sc = corpus_scenario(1000 + idx);
    Rng rng(sc.seed, "corpus_fault");
    const double iter = healthy_iter(sc);
    const int n = sc.jobs[0].rank_count();

    c4d::Verdict want = c4d::Verdict::healthy;
    std::vector<int> want_targets;
    std::pair<int, int> want_cell{-1, -1};
    FaultEvent f;
    f.kind = kind;
    f.job = 0;
    f.time_s = 4 * iter + 0.3 * sc.jobs[0].compute_s;
    switch (kind) {
      case FaultKind::slow_connection: {
        f.factor = rng.uniform(3.0, 6.0);
        const int c = rng.next_int(0, 1);
        f.src_rank = rng.next_int(0, n - 1);
        f.dst_rank = ring_successor(f.src_rank, c, 4, 8);
        want = c4d::Verdict::connection_slow;
        want_cell = {f.src_rank, f.dst_rank};
        break;
      }
      case FaultKind::slow_compute: {
        f.factor = rng.uniform(3.0, 5.0);
        f.rank = rng.next_int(0, n - 1);
        want = c4d::Verdict::noncomm_slow;
        want_targets = {f.rank};
        break;
      }
      case FaultKind::nic_degraded: {
        f.factor = 1.0 / rng.uniform(3.0, 6.0);
        const int b = rng.next_int(0, 3);
        f.node = sc.jobs[0].nodes[b];
        f.nic = 0;  // carries channel-0 in and channel-1 out for gpu 0
        f.side = kLeft;
        want = c4d::Verdict::node_slow;
        want_targets = {b * 8};
        break;
      }
      case FaultKind::rank_crash: {
        f.rank = rng.next_int(0, n - 1);
        want = c4d::Verdict::crash;
        want_targets = {f.rank};
        break;
      }
      case FaultKind::comm_hang: {
        f.rank = rng.next_int(0, n - 1);
        f.time_s =
            4 * iter + sc.jobs[0].compute_s + 0.3 * (iter - sc.jobs[0].compute_s);
        want = c4d::Verdict::comm_hang;
        want_targets = {f.rank};
        break;
      }
      case FaultKind::noncomm_hang: {
        f.rank = rng.next_int(0, n - 1);
        want = c4d::Verdict::noncomm_hang;
        want_targets = {f.rank};
        break;
      }
      default:
        break;
    }
    sc.faults.push_back(f);

    RunReport rep = run(sc);
    const c4d::Diagnosis* first = nullptr;
    for (const auto& d : rep.diagnoses)
      if (d.verdict != c4d::Verdict::healthy) {
        first = &d;
        break;
      }
    std::ostringstream err;
    if (!first) {
      err << "no verdict for " << fault_kind_name(kind) << " idx " << idx;
    } else if (first->verdict != want) {
      err << fault_kind_name(kind) << " idx " << idx << ": got "
          << c4d::verdict_name(first->verdict) << " want " << c4d::verdict_name(want);
    } else if (!want_targets.empty() && first->targets != want_targets) {
      err << fault_kind_name(kind) << " idx " << idx << ": wrong target";
    } else if (want_cell.first >= 0 &&
               (first->cells.size() != 1 || first->cells[0] != want_cell)) {
      err << fault_kind_name(kind) << " idx " << idx << ": wrong cell";
    } else if (kind == FaultKind::rank_crash || kind == FaultKind::comm_hang ||
               kind == FaultKind::noncomm_hang) {
      // Hang-type wall-clock bound: within two iterations of onset.
      if (first->t_emitted - f.time_s > 2.0 * iter)
        err << fault_kind_name(kind) << " idx " << idx << ": slow detection";
    } else {
      // Slow-type: verdict lands in the onset window or the next one.
      if (first->window > 5) err << fault_kind_name(kind) << " idx " << idx << ": late window";
    }
    errors[idx] = err.str();
  }

  int wrong = 0;
  std::string first_error;
  for (const auto& e : errors)
    if (!e.empty()) {
      ++wrong;
      if (first_error.empty()) first_error = e;
    }

  // False-positive corpus: fault-free runs stay healthy everywhere.
  const int clean_total = 100;
  std::vector<int> fp(clean_total, 0);
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
  for (int idx = 0; idx < clean_total; ++idx) {
    Scenario sc = corpus_scenario(9000 + idx);
    RunReport rep = run(sc);
    for (const auto& d : rep.diagnoses)
      if (d.verdict != c4d::Verdict::healthy) fp[idx]++;
  }
  int false_positives = 0;
  for (int v : fp) false_positives += v;

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = wrong == 0 && false_positives == 0 && wall <= 300.0;
  verdict_line(5, pass, "diagnosis accuracy",
               std::to_string(total - wrong) + "/" + std::to_string(total) +
                   " exact verdicts" +
                   (first_error.empty() ? "" : " (" + first_error + ")") +
                   ", false positives " + std::to_string(false_positives) + "/" +
                   std::to_string(clean_total) + " runs, wall " + fmt(wall) +
                   "s (<=300)");
}

// ---------------------------------------------------------------- C6
void criterion6() {
  ScenarioConfig jun = load_config("downtime_jun", {});
  ScenarioConfig dec = load_config("downtime_dec", {});
  DowntimeRun rj = run_downtime_model(*jun.downtime, jun.seed);
  DowntimeRun rd = run_downtime_model(*dec.downtime, dec.seed);

  const bool jun_total = std::fabs(rj.mean.total() - 0.3119) <= 0.05;
  const bool dec_total = std::fabs(rd.mean.total() - 0.0116) <= 0.005;
  const bool ordering = rj.mean.diagnosis_isolation > rj.mean.post_checkpoint &&
                        rj.mean.post_checkpoint > rj.mean.detection &&
                        rj.mean.detection > rj.mean.re_initialization;
  const bool analytic_jun =
      std::fabs(rj.mean.total() - rj.analytic.total()) <= 0.02 * rj.analytic.total();
  const bool analytic_dec =
      std::fabs(rd.mean.total() - rd.analytic.total()) <= 0.02 * rd.analytic.total();

  const bool pass = jun_total && dec_total && ordering && analytic_jun && analytic_dec;
  verdict_line(
      6, pass, "downtime calibration",
      "jun " + fmt(100 * rj.mean.total()) + "% (31.19+-5), dec " +
          fmt(100 * rd.mean.total(), 3) + "% (1.16+-0.5), ordering " +
          (ordering ? "ok" : "BAD") + ", analytic gap " +
          fmt(100 * std::fabs(rj.mean.total() / rj.analytic.total() - 1), 3) + "% / " +
          fmt(100 * std::fabs(rd.mean.total() / rd.analytic.total() - 1), 3) +
          "% (<=2%)");
}

// ---------------------------------------------------------------- C7
bool dirs_identical(const fs::path& a, const fs::path& b, std::string* why) {
  std::set<std::string> names;
  for (auto& e : fs::directory_iterator(a)) names.insert(e.path().filename().string());
  for (auto& e : fs::directory_iterator(b)) names.insert(e.path().filename().string());
  for (const auto& n : names) {
    std::ifstream fa(a / n, std::ios::binary), fb(b / n, std::ios::binary);
    if (!fa || !fb) {
      *why = "missing " + n;
      return false;
    }
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    if (sa.str() != sb.str()) {
      *why = "differs: " + n;
      return false;
    }
  }
  return true;
}

void criterion7() {
  // (a) fair_share vs brute-force water-filling, exact to 1e-9 relative.
  bool fs_ok = true;
  {
    Rng rng(424242, "acc_fairshare");
    for (int trial = 0; trial < 500 && fs_ok; ++trial) {
      const int nl = rng.next_int(2, 30);
      const int nf = rng.next_int(1, 20);
      FairShareInput in;
      for (int l = 0; l < nl; ++l) in.capacity.push_back(rng.uniform(5, 500));
      for (int f = 0; f < nf; ++f) {
        std::vector<int> path;
        const int hops = rng.next_int(1, 5);
        for (int h = 0; h < hops; ++h) path.push_back(rng.next_int(0, nl - 1));
        std::sort(path.begin(), path.end());
        path.erase(std::unique(path.begin(), path.end()), path.end());
        in.flows.push_back(path);
      }
      auto got = fair_share(in);
      auto want = oracle::waterfill(in.capacity, in.flows);
      for (size_t f = 0; f < got.size(); ++f) {
        const double scale = std::max(1.0, std::fabs(want[f]));
        if (std::fabs(got[f] - want[f]) > 1e-9 * scale) fs_ok = false;
      }
      if (!oracle::is_max_min(in.capacity, in.flows, got)) fs_ok = false;
    }
  }

  // (b) probe_paths vs graph reachability, exact.
  bool probe_ok = true;
  {
    Rng rng(515151, "acc_probe");
    FatTreeParams p;
    p.node_count = 16;
    p.leaf_count = 8;
    p.spine_count = 8;
    p.nodes_per_leaf_pair = 4;
    for (int trial = 0; trial < 500 && probe_ok; ++trial) {
      Topology t = build_fat_tree(p);
      const int kills = rng.next_int(0, 24);
      for (int k = 0; k < kills; ++k)
        t.set_link_state(t.uplink(rng.next_int(0, 7), rng.next_int(0, 7)),
                         LinkState::down);
      c4p::PathTable table = c4p::probe_paths(t, trial);
      for (int leaf = 0; leaf < 8 && probe_ok; ++leaf)
        for (int spine = 0; spine < 8; ++spine)
          if (table.at(leaf, spine).reachable !=
              oracle::leaf_spine_reachable(t, leaf, spine)) {
            probe_ok = false;
            break;
          }
    }
  }

  // (c) ring allreduce reduction correctness for n in 2..16, exact.
  bool ring_ok = true;
  for (int n = 2; n <= 16; ++n)
    if (!oracle::allreduce_schedule_correct(ring_allreduce_schedule(n, 1 << 22)))
      ring_ok = false;

  // (d) byte-identical bundles for a preset run twice with one seed.
  bool det_ok = true;
  std::string why;
  {
    const fs::path base = fs::temp_directory_path() / "c4sim_acceptance_det";
    fs::remove_all(base);
    Scenario sc = preset_scenario("eight_jobs_1to1", {"run.trace=on"});
    RunReport r1 = run(sc);
    RunReport r2 = run(sc);
    write_bundle((base / "a").string(), sc, r1);
    write_bundle((base / "b").string(), sc, r2);
    det_ok = dirs_identical(base / "a", base / "b", &why);
    fs::remove_all(base);
  }

  const bool pass = fs_ok && probe_ok && ring_ok && det_ok;
  verdict_line(7, pass, "oracle equivalence",
               std::string("fair_share ") + (fs_ok ? "exact" : "MISMATCH") + ", probe " +
                   (probe_ok ? "exact" : "MISMATCH") + ", ring schedule " +
                   (ring_ok ? "exact" : "MISMATCH") + ", determinism " +
                   (det_ok ? "byte-identical" : why));
}

// ---------------------------------------------------------------- C8
void criterion8() {
  FatTreeParams p;
  p.node_count = 16;
  p.leaf_count = 8;
  p.spine_count = 8;
  p.nodes_per_leaf_pair = 4;
  Topology t = build_fat_tree(p);
  c4p::PathTable table = c4p::probe_paths(t, 3);
  c4p::AllocationState state;
  Rng rng(606060, "acc_alloc");
  std::map<std::pair<int, int>, int> next_index;
  int ops = 0, faults = 0;
  bool balance_ok = true, sides_ok = true, exclusion_ok = true;
  int64_t uid = 0;
  while (ops < 10000) {
    ++ops;
    if (faults < 6 && rng.next_double() < 0.002) {
      const int link = t.uplink(rng.next_int(0, 7), rng.next_int(0, 7));
      if (t.link(link).up()) {
        t.set_link_state(link, LinkState::down);
        state.on_link_fault(table, t, link, 3);
        ++faults;
      }
      continue;
    }
    const int src = rng.next_int(0, 7), dst = 8 + rng.next_int(0, 7);
    const int nic = rng.next_int(0, 7);
    auto& qi = next_index[{src, nic}];
    c4p::QpSetupRequest req;
    req.job = 0;
    req.qp_index = qi;
    req.src_node = src;
    req.src_nic = nic;
    req.src_side = qi % 2;
    req.dst_node = dst;
    req.dst_nic = rng.next_int(0, 7);
    ++qi;
    try {
      state.allocate(table, t, req, 3, uid++);
    } catch (const SimError&) {
    }
  }
  for (int sl = 0; sl < 8; ++sl)
    for (int dl = 0; dl < 8; ++dl) {
      int lo = 1 << 30, hi = -1;
      for (int s = 0; s < 8; ++s) {
        if (!table.at(sl, s).reachable || !table.at(dl, s).reachable) continue;
        lo = std::min(lo, state.spine_load(sl, dl, s));
        hi = std::max(hi, state.spine_load(sl, dl, s));
      }
      if (hi > 0 && hi - lo > 1) balance_ok = false;
    }
  for (const auto& [key, n] : next_index) {
    const int l = state.nic_side_count(key.first, key.second, kLeft);
    const int r = state.nic_side_count(key.first, key.second, kRight);
    if (std::abs(l - r) > 1) sides_ok = false;
  }
  for (const auto& [id, entry] : state.assignments())
    for (int link : entry.second.path.link_ids())
      if (table.excluded_links.count(link) || !t.link(link).up()) exclusion_ok = false;

  const bool pass = balance_ok && sides_ok && exclusion_ok;
  verdict_line(8, pass, "allocation invariants",
               std::to_string(ops) + " ops, " + std::to_string(faults) +
                   " faults: balance " + (balance_ok ? "<=1" : "BROKEN") +
                   ", port classes " + (sides_ok ? "<=1" : "BROKEN") + ", exclusion " +
                   (exclusion_ok ? "sound" : "BROKEN"));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto want = [&](int c) { return only.empty() || only.count(c); };

  try {
    if (want(1)) criterion1();
    if (want(2)) criterion2();
    if (want(3)) criterion3();
    if (want(4)) criterion4();
    if (want(5)) criterion5();
    if (want(6)) criterion6();
    if (want(7)) criterion7();
    if (want(8)) criterion8();
  } catch (const std::exception& e) {
    std::cout << "[FAIL] acceptance aborted: " << e.what() << "\n";
    return 99;
  }
  return g_failures;
}
