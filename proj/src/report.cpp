// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#include "c4sim/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "c4sim/text.hpp"

namespace c4sim {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream os(fs::path(dir) / name, std::ios::binary);
  if (!os) throw SimError("cannot write " + (fs::path(dir) / name).string());
  return os;
}

std::string port_label(const Topology& topo, int link_id, int dir) {
  const Link& l = topo.link(link_id);
  std::ostringstream os;
  if (l.kind == LinkKind::host) {
    os << "h" << l.node << "." << l.nic << (l.side == kLeft ? "L" : "R")
       << (dir == 0 ? ":rx" : ":tx");
  } else {
    os << "u" << l.spine << (dir == 0 ? ":tx" : ":rx");
  }
  return os.str();
}

int leaf_of_link(const Topology& topo, int link_id) { return topo.link(link_id).leaf; }

}  // namespace

void write_bundle(const std::string& dir, const Scenario& sc, const RunReport& report) {
  const Topology topo = build_initial_topology(sc);

  {
    auto os = open_out(dir, "iters.csv");
    os << "job,iter,attempt,start_s,compute_s,comm_s,busbw_gbps\n";
    for (const IterRecord& it : report.iters)
      os << it.job << ',' << it.iter << ',' << it.attempt << ',' << fmt_double(it.start_s)
         << ',' << fmt_double(it.compute_s) << ',' << fmt_double(it.comm_s) << ','
         << fmt_double(it.busbw_gbps) << '\n';
  }
  {
    auto os = open_out(dir, "flows.csv");
    os << "flow_id,src,dst,qp,path,start_s,end_s,bytes,mean_gbps\n";
    int id = 0;
    for (const FlowRecord& f : report.flows)
      os << id++ << ',' << f.src << ',' << f.dst << ',' << f.qp_uid << ',' << f.path << ','
         << fmt_double(f.start_s) << ',' << fmt_double(f.end_s) << ',' << f.bytes << ','
         << fmt_double(f.mean_gbps) << '\n';
  }
  {
    auto os = open_out(dir, "ports.csv");
    os << "time_s,switch,port,gbps\n";
    for (const PortSample& s : report.ports)
      os << fmt_double(s.t) << ",leaf" << leaf_of_link(topo, s.link_id) << ','
         << port_label(topo, s.link_id, s.dir) << ',' << fmt_double(s.gbps) << '\n';
  }
  {
    auto os = open_out(dir, "events.csv");
    os << "time_s,kind,detail\n";
    for (const SimEventRecord& e : report.events) {
      std::string detail = e.detail;
      std::replace(detail.begin(), detail.end(), ',', ';');
      os << fmt_double(e.t) << ',' << e.kind << ',' << detail << '\n';
    }
  }
  {
    auto os = open_out(dir, "diagnosis.csv");
    os << "window,verdict,targets,evidence\n";
    for (const c4d::Diagnosis& d : report.diagnoses)
      os << d.window_token() << ',' << c4d::verdict_name(d.verdict) << ','
         << d.targets_token() << ',' << d.cells_token() << '\n';
  }
  {
    auto os = open_out(dir, "downtime.csv");
    os << "post_checkpoint,detection,diagnosis_isolation,re_initialization,total\n";
    const c4d::DowntimeAggregate& a = report.downtime;
    os << fmt_double(a.post_checkpoint) << ',' << fmt_double(a.detection) << ','
       << fmt_double(a.diagnosis_isolation) << ',' << fmt_double(a.re_initialization) << ','
       << fmt_double(a.total()) << '\n';
  }
  {
    auto os = open_out(dir, "incidents.csv");
    os << "id,class,t_last_checkpoint,t_error,t_detect,t_isolated,t_restart_done\n";
    for (const c4d::Incident& i : report.incidents)
      os << i.id << ',' << i.error_class << ',' << fmt_double(i.t_last_checkpoint) << ','
         << fmt_double(i.t_error) << ',' << fmt_double(i.t_detect) << ','
         << fmt_double(i.t_isolated) << ',' << fmt_double(i.t_restart_done) << '\n';
  }
  {
    auto os = open_out(dir, "allocation.csv");
    os << "job,qp,spine,src_port\n";
    std::istringstream is(report.allocation_dump);
    std::string line;
    while (std::getline(is, line)) {
      auto f = split_ws(line);
      if (f.size() == 5 && f[0] == "A")
        os << f[1] << ',' << f[2] << ',' << f[3] << ',' << f[4] << '\n';
    }
  }
  {
    auto os = open_out(dir, "topology.txt");
    os << report.topology_dump;
  }
  if (!report.pathtable_dump.empty()) {
    auto os = open_out(dir, "pathtable.txt");
    os << report.pathtable_dump;
  }
  if (!report.trace.empty()) {
    auto os = open_out(dir, "trace.tsv");
    TraceWriter w(os);
    for (const MonitorRecord& r : report.trace) w.write(r);
  }
}

DowntimeRun run_downtime_model(const c4d::DowntimeModelParams& p, uint64_t seed) {
  DowntimeRun run;
  run.params = p;
  run.trials.resize(p.trials);
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < p.trials; ++i)
    run.trials[i] = c4d::run_month_trial(p, Rng(seed, "downtime_trial", i));
  for (const auto& t : run.trials) {
    run.mean.post_checkpoint += t.frac.post_checkpoint;
    run.mean.detection += t.frac.detection;
    run.mean.diagnosis_isolation += t.frac.diagnosis_isolation;
    run.mean.re_initialization += t.frac.re_initialization;
  }
  const double n = std::max<size_t>(1, run.trials.size());
  run.mean.post_checkpoint /= n;
  run.mean.detection /= n;
  run.mean.diagnosis_isolation /= n;
  run.mean.re_initialization /= n;
  run.analytic = c4d::closed_form_downtime(p);
  return run;
}

void write_downtime_bundle(const std::string& dir, const DowntimeRun& run) {
  {
    auto os = open_out(dir, "downtime.csv");
    os << "trial,incidents,post_checkpoint,detection,diagnosis_isolation,"
          "re_initialization,total\n";
    for (size_t i = 0; i < run.trials.size(); ++i) {
      const auto& t = run.trials[i];
      os << i << ',' << t.incidents << ',' << fmt_double(t.frac.post_checkpoint) << ','
         << fmt_double(t.frac.detection) << ',' << fmt_double(t.frac.diagnosis_isolation)
         << ',' << fmt_double(t.frac.re_initialization) << ',' << fmt_double(t.frac.total())
         << '\n';
    }
  }
  auto os = open_out(dir, "downtime_summary.csv");
  os << "stat,post_checkpoint,detection,diagnosis_isolation,re_initialization,total\n";
  auto row = [&](const std::string& name, const c4d::DowntimeAggregate& a) {
    os << name << ',' << fmt_double(a.post_checkpoint) << ',' << fmt_double(a.detection)
       << ',' << fmt_double(a.diagnosis_isolation) << ',' << fmt_double(a.re_initialization)
       << ',' << fmt_double(a.total()) << '\n';
  };
  row("mean", run.mean);
  row("analytic", run.analytic);
}

std::vector<SweepRow> run_sweep(const Scenario& base, uint64_t seed_lo, uint64_t seed_hi,
                                const std::string& out_dir, bool parallel,
                                int measure_from_iter, bool write_bundles) {
  if (seed_hi < seed_lo) throw ValidationError("sweep: empty seed range");
  const int n = static_cast<int>(seed_hi - seed_lo + 1);
  std::vector<SweepRow> rows(n);
  std::vector<std::string> errors(n);
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
  for (int i = 0; i < n; ++i) {
    try {
      Scenario sc = base;
      sc.seed = seed_lo + i;
      RunReport rep = run(sc);
      SweepRow row;
      row.seed = sc.seed;
      for (size_t j = 0; j < sc.jobs.size(); ++j)
        row.job_busbw.push_back(rep.mean_busbw(static_cast<int>(j), measure_from_iter));
      if (!row.job_busbw.empty()) {
        row.min_busbw = *std::min_element(row.job_busbw.begin(), row.job_busbw.end());
        row.max_busbw = *std::max_element(row.job_busbw.begin(), row.job_busbw.end());
      }
      rows[i] = std::move(row);
      if (write_bundles && !out_dir.empty())
        write_bundle((fs::path(out_dir) / ("seed_" + std::to_string(sc.seed))).string(),
                     sc, rep);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (int i = 0; i < n; ++i)
    if (!errors[i].empty())
      throw SimError("sweep seed " + std::to_string(seed_lo + i) + ": " + errors[i]);
  return rows;
}

void write_sweep_csv(const std::string& dir, const std::vector<SweepRow>& rows) {
  auto os = open_out(dir, "sweep.csv");
  os << "seed,min_busbw,max_busbw,job_busbw\n";
  for (const SweepRow& r : rows) {
    os << r.seed << ',' << fmt_double(r.min_busbw) << ',' << fmt_double(r.max_busbw) << ',';
    for (size_t j = 0; j < r.job_busbw.size(); ++j)
      os << (j ? ";" : "") << fmt_double(r.job_busbw[j]);
    os << '\n';
  }
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw ValidationError("missing bundle file: " + p.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    for (auto f : split_fields(line, ',')) row.emplace_back(f);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string summarize_bundle(const std::string& bundle_dir, double resample_interval_s) {
  const fs::path dir(bundle_dir);
  std::ostringstream text;

  // Per-job busbw statistics.
  auto iters = read_csv(dir / "iters.csv");
  std::map<int, std::vector<double>> busbw;
  for (size_t i = 1; i < iters.size(); ++i)
    busbw[parse_int(iters[i][0], "job")].push_back(parse_double(iters[i][6], "busbw"));
  {
    auto os = open_out(bundle_dir, "report_busbw.csv");
    os << "job,iters,mean_busbw_gbps,min_busbw_gbps,max_busbw_gbps\n";
    text << "busbw per job (Gbps):\n";
    for (const auto& [job, v] : busbw) {
      double sum = 0, lo = v[0], hi = v[0];
      for (double x : v) {
        sum += x;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      const double mean = sum / v.size();
      os << job << ',' << v.size() << ',' << fmt_double(mean) << ',' << fmt_double(lo)
         << ',' << fmt_double(hi) << '\n';
      text << "  job " << job << ": mean " << mean << " min " << lo << " max " << hi
           << "\n";
    }
  }

  // Resampled per-port series: last sample wins within each interval.
  {
    auto ports = read_csv(dir / "ports.csv");
    std::map<std::pair<std::string, std::string>, std::map<int64_t, double>> series;
    for (size_t i = 1; i < ports.size(); ++i) {
      const double t = parse_double(ports[i][0], "time");
      const int64_t bucket = static_cast<int64_t>(t / resample_interval_s);
      series[{ports[i][1], ports[i][2]}][bucket] = parse_double(ports[i][3], "gbps");
    }
    auto os = open_out(bundle_dir, "report_ports.csv");
    os << "time_s,switch,port,gbps\n";
    for (const auto& [key, buckets] : series)
      for (const auto& [bucket, gbps] : buckets)
        os << fmt_double(bucket * resample_interval_s) << ',' << key.first << ','
           << key.second << ',' << fmt_double(gbps) << '\n';
    text << "ports: " << series.size() << " series resampled at "
         << resample_interval_s << " s\n";
  }

  // Downtime passthrough.
  {
    auto rows = read_csv(dir / "downtime.csv");
    auto os = open_out(bundle_dir, "report_downtime.csv");
    for (const auto& row : rows) {
      for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
      os << '\n';
    }
    if (rows.size() >= 2 && rows[0].size() >= 5 && rows[0][0] == "post_checkpoint")
      text << "downtime total fraction: " << rows[1][4] << "\n";
  }
  return text.str();
}

}  // namespace c4sim
